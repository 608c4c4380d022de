"""Distances on Z^2 enriched with always-open diagonal and vertical edges.

The lattice carries three edge families: vertical and horizontal edges of
weight 1 and diagonal edges of weight 2.  Vertical and diagonal edges are
always open; each horizontal edge is open independently with probability
1 - eps.  Distances from the origin are finite everywhere because the
vertical/diagonal skeleton connects everything.

Distance columns are computed by a column sweep: geodesics to a column
i >= 0 never step west, so column i+1 follows from column i via one
horizontal/diagonal relaxation followed by a bidirectional vertical
relaxation.  The sweep runs on a finite row strip; a per-cell certificate
(any path leaving the strip is at least as long as the in-strip optimum)
marks the rows where the strip value equals the infinite-lattice value.

Particles: reading a distance column bottom-up, each down-step of the
distance is a particle and each up-step a hole.  Column by column this
occupation record evolves exactly as the discrete-time parallel TASEP
with jump probability eps, which is what ties distances here to currents
there: D(n, j) = n + j + 2*J(n, j).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .backend import njit, select
from .tasep import Trajectory


class SafeRegionError(ValueError):
    """Query outside the rows certified exact for this strip."""


@dataclass(frozen=True)
class CrossConfig:
    """Open/closed states of horizontal edges over a column range and row strip.

    ``h_open[i, r]`` is the state of edge (i, row_lo+r) -> (i+1, row_lo+r)
    for columns i in 0..n_cols-1.  Vertical and diagonal edges carry no
    state: they are always open.
    """

    n_cols: int
    row_lo: int
    row_hi: int
    eps: float
    h_open: np.ndarray = field(repr=False)
    seed: int | None = None

    def __post_init__(self):
        n_rows = self.row_hi - self.row_lo + 1
        if self.h_open.shape != (self.n_cols, n_rows):
            raise ValueError(
                f"h_open shape {self.h_open.shape} != ({self.n_cols}, {n_rows})"
            )
        if not (self.row_lo <= 0 <= self.row_hi):
            raise ValueError("row strip must contain the origin row")

    @property
    def n_rows(self) -> int:
        return self.row_hi - self.row_lo + 1

    def edge_open(self, i: int, j: int) -> bool:
        return bool(self.h_open[i, j - self.row_lo])


def sample_cross(
    n: int,
    row_lo: int,
    row_hi: int,
    eps: float,
    rng: np.random.Generator,
    seed: int | None = None,
) -> CrossConfig:
    """Horizontal edges open i.i.d. with probability 1 - eps."""
    if n < 1 or row_lo >= row_hi:
        raise ValueError(f"invalid rectangle n={n}, rows [{row_lo}, {row_hi}]")
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps={eps} outside [0, 1]")
    h = rng.random((n, row_hi - row_lo + 1), dtype=np.float32) >= np.float32(eps)
    h.setflags(write=False)
    return CrossConfig(n, row_lo, row_hi, eps, h, seed)


def margin_strip(n: int, j_max: int) -> tuple[int, int]:
    """Conservative row strip: no geodesic to a queried site can leave it."""
    return (-(j_max + n + 2), j_max + n + 2)


def certificate_strip(n: int, j_max: int, eps: float, slack: int = 256) -> tuple[int, int]:
    """Row strip sized so the exactness certificate passes in practice.

    Geodesic excess over the straight path grows like eps*n, so a strip of
    height j_max + O(eps*n) suffices; the certificate still verifies every
    query, so an undersized strip fails loudly rather than silently.
    """
    pad = int(math.ceil(eps * n)) + slack
    return (-pad, j_max + pad)


INF32 = np.int32(1 << 29)


@njit(nogil=True)
def _sweep_loop(h_open, origin_off):
    n, rows = h_open.shape
    D = np.empty((n + 1, rows), dtype=np.int32)
    for r in range(rows):
        D[0, r] = abs(r - origin_off)
    for i in range(n):
        for r in range(rows):
            best = INF32
            if h_open[i, r]:
                best = D[i, r] + 1
            if r > 0:
                c = D[i, r - 1] + 2
                if c < best:
                    best = c
            if r + 1 < rows:
                c = D[i, r + 1] + 2
                if c < best:
                    best = c
            D[i + 1, r] = best
        for r in range(1, rows):
            c = D[i + 1, r - 1] + 1
            if c < D[i + 1, r]:
                D[i + 1, r] = c
        for r in range(rows - 2, -1, -1):
            c = D[i + 1, r + 1] + 1
            if c < D[i + 1, r]:
                D[i + 1, r] = c
    return D


def _sweep_vec(h_open, origin_off):
    n, rows = h_open.shape
    r_idx = np.arange(rows, dtype=np.int32)
    D = np.empty((n + 1, rows), dtype=np.int32)
    D[0] = np.abs(r_idx - np.int32(origin_off))
    for i in range(n):
        prev = D[i]
        cand = np.where(h_open[i], prev + np.int32(1), INF32)
        cand[1:] = np.minimum(cand[1:], prev[:-1] + np.int32(2))
        cand[:-1] = np.minimum(cand[:-1], prev[1:] + np.int32(2))
        up = np.minimum.accumulate(cand - r_idx) + r_idx
        down = np.minimum.accumulate((cand + r_idx)[::-1])[::-1] - r_idx
        D[i + 1] = np.minimum(up, down)
    return D


_sweep_kernel = select(_sweep_loop, _sweep_vec)


@dataclass(frozen=True)
class DistanceField:
    """Distances from the origin over a column range and row strip.

    ``exact`` marks the rows where the strip value is certified equal to
    the infinite-lattice distance (for every column).  Values at other
    rows are upper bounds only and :meth:`value` refuses to serve them.
    """

    row_lo: int
    row_hi: int
    eps: float
    D: np.ndarray = field(repr=False)  # shape (n_cols+1, n_rows), int32
    exact: np.ndarray = field(repr=False)  # per-row bool

    @property
    def n_cols(self) -> int:
        return self.D.shape[0] - 1

    def value(self, i: int, j: int) -> int:
        if not 0 <= i <= self.n_cols:
            raise SafeRegionError(f"column {i} outside 0..{self.n_cols}")
        if not self.row_lo <= j <= self.row_hi:
            raise SafeRegionError(f"row {j} outside strip [{self.row_lo}, {self.row_hi}]")
        if not self.exact[j - self.row_lo]:
            raise SafeRegionError(f"row {j} not certified exact for this strip")
        return int(self.D[i, j - self.row_lo])

    def exact_band(self) -> tuple[int, int]:
        """Largest contiguous certified row interval containing the origin."""
        off = -self.row_lo
        if not self.exact[off]:
            raise SafeRegionError("origin row not certified; widen the strip")
        lo = off
        while lo > 0 and self.exact[lo - 1]:
            lo -= 1
        hi = off
        while hi + 1 < self.exact.shape[0] and self.exact[hi + 1]:
            hi += 1
        return (lo + self.row_lo, hi + self.row_lo)


def _certify(D: np.ndarray, row_lo: int, row_hi: int) -> np.ndarray:
    # A path leaving the strip above costs >= i + 2*(row_hi+1) - j, below
    # >= i + j + 2 - 2*row_lo; rows where the strip optimum never exceeds
    # either bound are exact.
    n_plus_1, rows = D.shape
    i_col = np.arange(n_plus_1, dtype=np.int64).reshape(-1, 1)
    q = (D.astype(np.int64) - i_col).max(axis=0)
    j = np.arange(row_lo, row_hi + 1, dtype=np.int64)
    above = q + j <= 2 * row_hi + 2
    below = q - j <= 2 - 2 * row_lo
    return above & below


def cross_distance(config: CrossConfig) -> DistanceField:
    """Exact shortest-path distances from (0, 0) by column sweep.

    Weights: 1 for open horizontal and all vertical edges, 2 for diagonal
    edges; closed horizontal edges are excluded.
    """
    D = _sweep_kernel(config.h_open, -config.row_lo)
    exact = _certify(D, config.row_lo, config.row_hi)
    D.setflags(write=False)
    exact.setflags(write=False)
    return DistanceField(config.row_lo, config.row_hi, config.eps, D, exact)


def extract_particles(field: DistanceField, check_top: bool = True) -> Trajectory:
    """Occupation record: site j holds a particle at time i iff the
    distance drops by one going up across (i, j-1) -> (i, j).

    The trajectory window is the certified row band.  With ``check_top``
    the top band row is verified particle-free at all times (distance
    exactly i + j there), which guarantees snapshot current counts inside
    the band see every particle.
    """
    band_lo, band_hi = field.exact_band()
    lo_off = band_lo - field.row_lo
    hi_off = band_hi - field.row_lo
    sub = field.D[:, lo_off : hi_off + 1]
    if check_top:
        i_col = np.arange(sub.shape[0], dtype=np.int64)
        if not np.array_equal(sub[:, -1].astype(np.int64), i_col + band_hi):
            raise SafeRegionError(
                "particles may exist above the certified band; widen the strip"
            )
    occ = sub[:, 1:] < sub[:, :-1]
    packed = np.packbits(occ.astype(np.uint8), axis=1)
    packed.setflags(write=False)
    return Trajectory(band_lo + 1, band_hi, field.eps, packed)


def final_column_current(field: DistanceField, j: int) -> int:
    """Current at (n_cols, j) read from the final distance column alone.

    Counts the distance down-steps strictly above j in the last column;
    the top certified row is checked particle-free at the final time so
    the count is complete.
    """
    band_lo, band_hi = field.exact_band()
    if not band_lo <= j < band_hi:
        raise SafeRegionError(f"row {j} outside certified band [{band_lo}, {band_hi}]")
    col = field.D[-1, band_lo - field.row_lo : band_hi - field.row_lo + 1].astype(np.int64)
    if col[-1] != field.n_cols + band_hi:
        raise SafeRegionError(
            "particles may exist above the certified band at the final time"
        )
    off = j - band_lo
    return int(np.count_nonzero(col[off + 1 :] < col[off:-1]))


def distance_current_identity(
    config: CrossConfig, j_max: int | None = None
) -> bool:
    """Check D(n, j) == n + j + 2*J(n, j) for all 0 <= n <= n_cols and
    0 <= j <= j_max.  Deterministic given the configuration; always true
    unless the sweep, the extraction or the strip sizing is broken.
    """
    fieldv = cross_distance(config)
    traj = extract_particles(fieldv)
    band_lo, band_hi = fieldv.exact_band()
    if j_max is None:
        j_max = band_hi - 1
    if j_max < 0 or j_max > band_hi - 1:
        raise SafeRegionError(f"j_max={j_max} outside certified band")
    occ = traj.to_bool()
    # suffix counts J(n, j) for all j in 0..j_max at every time
    suffix = np.cumsum(occ[:, ::-1], axis=1)[:, ::-1].astype(np.int64)
    cols = np.arange(0, j_max + 1) - traj.window_lo + 1
    J = np.where(cols < occ.shape[1], suffix[:, np.minimum(cols, occ.shape[1] - 1)], 0)
    n_idx = np.arange(fieldv.n_cols + 1, dtype=np.int64).reshape(-1, 1)
    j_idx = np.arange(0, j_max + 1, dtype=np.int64)
    lhs = fieldv.D[:, (j_idx - fieldv.row_lo)].astype(np.int64)
    rhs = n_idx + j_idx + 2 * J
    return bool(np.array_equal(lhs, rhs))


def cross_distance_limit(lam: float, eps: float) -> float:
    """Macroscopic distance per column toward (n, n*eps*lam):
    2 - sqrt(1 - eps*(1 + lam^2) + lam^2*eps^2).
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lam={lam} outside [0, 1]")
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"eps={eps} outside [0, 1)")
    radicand = 1.0 - eps * (1.0 + lam * lam) + lam * lam * eps * eps
    if radicand < 0.0:
        raise ValueError(f"negative radicand {radicand}")
    return 2.0 - math.sqrt(radicand)
