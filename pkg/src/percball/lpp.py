"""Last-passage percolation with geometric waiting times.

Cells (i, k), i, k >= 1 carry i.i.d. geometric weights on {1, 2, ...}
with success probability ``eps``.  The passage time of a cell is the
maximum total weight over up-right paths from (1, 1), computed by the
standard wavefront recursion.

The same table drives an exact particle-system coupling: particle k
(starting at site 1-k) performs its i-th jump at time G[i][k].  Because
every weight is at least 1, the recursion forces G[i][k] >= G[i][k-1]+1,
which is precisely the one-step delay of the parallel update rule, so the
coupled trajectory follows the discrete-time TASEP law with jump
probability ``eps``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .backend import njit, select
from .tasep import Trajectory


class HorizonError(ValueError):
    """Passage table too small to determine all moves up to the horizon."""


@dataclass(frozen=True)
class WeightGrid:
    """Waiting times g[i][k] (1-indexed via :meth:`value`), all >= 1."""

    eps: float
    g: np.ndarray = field(repr=False)  # shape (A, B), int64

    def __post_init__(self):
        if self.g.ndim != 2 or self.g.size == 0:
            raise ValueError("weight grid must be a non-empty 2-d array")
        if not np.all(self.g >= 1):
            raise ValueError("geometric weights live on {1, 2, ...}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.g.shape

    def value(self, i: int, k: int) -> int:
        return int(self.g[i - 1, k - 1])


def sample_weights(a: int, b: int, eps: float, rng: np.random.Generator) -> WeightGrid:
    """An a-by-b grid of i.i.d. Geom{1,2,...}(eps) waiting times."""
    if a < 1 or b < 1:
        raise ValueError(f"grid shape ({a}, {b}) must be at least 1x1")
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"eps={eps} must lie in (0, 1] (eps=0 means infinite waits)")
    g = rng.geometric(eps, size=(a, b)).astype(np.int64)
    g.setflags(write=False)
    return WeightGrid(eps, g)


@njit(nogil=True)
def _passage_loop(g):
    a, b = g.shape
    G = np.zeros((a + 1, b + 1), dtype=np.int64)
    for i in range(1, a + 1):
        for k in range(1, b + 1):
            up = G[i - 1, k]
            left = G[i, k - 1]
            best = up if up > left else left
            G[i, k] = g[i - 1, k - 1] + best
    return G[1:, 1:]


def _passage_vec(g):
    # Row recurrence: G[i,j] = S[j] + max_{k<=j}(G[i-1,k] - S[k-1]) with S
    # the row prefix sum, evaluated with a running maximum per row.
    a, b = g.shape
    G = np.empty((a, b), dtype=np.int64)
    prev = np.zeros(b, dtype=np.int64)
    for i in range(a):
        s = np.concatenate(([0], np.cumsum(g[i], dtype=np.int64)))
        run = np.maximum.accumulate(prev - s[:-1])
        prev = s[1:] + run
        G[i] = prev
    return G


_passage_kernel = select(_passage_loop, _passage_vec)


@dataclass(frozen=True)
class PassageTable:
    """Passage times G[i][k]; strictly increasing along both axes (g >= 1)."""

    eps: float
    G: np.ndarray = field(repr=False)  # shape (A, B), int64

    def __post_init__(self):
        if self.G.shape[0] > 1 and not np.all(self.G[1:] > self.G[:-1]):
            raise AssertionError("passage times must increase strictly along rows")
        if self.G.shape[1] > 1 and not np.all(self.G[:, 1:] > self.G[:, :-1]):
            raise AssertionError("passage times must increase strictly along columns")

    @property
    def shape(self) -> tuple[int, int]:
        return self.G.shape

    def value(self, i: int, k: int) -> int:
        return int(self.G[i - 1, k - 1])

    def covers_horizon(self, horizon: int) -> bool:
        """True when every jump event up to ``horizon`` lies in the table.

        Out-of-table cells dominate a boundary cell plus at least one extra
        weight, so it suffices that both boundary minima G[A][1] and
        G[1][B] reach the horizon.
        """
        return bool(self.G[-1, 0] >= horizon and self.G[0, -1] >= horizon)


def passage_times(grid: WeightGrid) -> PassageTable:
    """Wavefront recursion G[i][k] = g[i][k] + max(G[i-1][k], G[i][k-1])."""
    return PassageTable(grid.eps, _passage_kernel(grid.g))


def psi(a: float, b: float, eps: float) -> float:
    """Scaled passage-time limit (a + b + 2*sqrt((1-eps)*a*b)) / eps."""
    if a < 0 or b < 0:
        raise ValueError(f"need a, b >= 0, got ({a}, {b})")
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"eps={eps} must lie in (0, 1]")
    return (a + b + 2.0 * math.sqrt((1.0 - eps) * a * b)) / eps


def tasep_from_lpp(table: PassageTable, horizon: int) -> Trajectory:
    """Trajectory in which particle k completes its i-th jump at G[i][k].

    Particle k starts at site 1-k.  The returned trajectory covers times
    0..horizon and has the parallel-update TASEP law with the table's
    ``eps``; exclusion and the one-step delay are asserted move by move.
    """
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    if not table.covers_horizon(horizon):
        raise HorizonError(
            f"table {table.shape} does not determine all moves up to t={horizon}"
        )
    G = table.G
    n_particles = G.shape[1]
    i_idx, k_idx = np.nonzero(G <= horizon)
    times = G[i_idx, k_idx]
    order = np.argsort(times, kind="stable")
    times = times[order]
    k_sorted = k_idx[order]  # 0-based particle index

    lo = -n_particles - 1
    jumps_p1 = int(np.count_nonzero(G[:, 0] <= horizon))
    hi = max(jumps_p1, 1) + 1
    width = hi - lo + 1
    occ = np.arange(lo, hi + 1) <= 0
    pos = 1 - np.arange(1, n_particles + 1)  # current site of each particle

    packed = np.empty((horizon + 1, (width + 7) // 8), dtype=np.uint8)
    packed[0] = np.packbits(occ.astype(np.uint8))
    ptr = 0
    for t in range(1, horizon + 1):
        start = ptr
        while ptr < times.shape[0] and times[ptr] == t:
            ptr += 1
        movers = k_sorted[start:ptr]
        if movers.shape[0]:
            src = pos[movers] - lo
            # parallel-update checks against the frozen time-(t-1) snapshot
            if not np.all(occ[src]):
                raise AssertionError(f"move from an empty site at t={t}")
            if np.any(occ[src + 1]):
                raise AssertionError(f"one-step delay violated at t={t}")
            occ[src] = False
            occ[src + 1] = True
            pos[movers] += 1
        packed[t] = np.packbits(occ.astype(np.uint8))
    if ptr != times.shape[0]:
        raise AssertionError("unapplied jump events past the horizon")
    packed.setflags(write=False)
    return Trajectory(lo, hi, table.eps, packed)


def _sized_table(a: int, b: int, eps: float, rng: np.random.Generator) -> PassageTable:
    """Sample a square table guaranteed to cover its own G[a][b] horizon."""
    m = 2 * (a + b) + 32
    for _ in range(12):
        table = passage_times(sample_weights(m, m, eps, rng))
        if table.covers_horizon(table.value(a, b)):
            return table
        m *= 2
    raise HorizonError("could not size a table covering its own horizon")


def verify_coupling(a: int, b: int, eps: float, rng: np.random.Generator) -> bool:
    """Check that the coupled current at site a-b equals b at time G[a][b].

    The identity is exact per realization; sampling only picks which
    realization gets checked.
    """
    if not 1 <= b <= a:
        raise ValueError(f"need 1 <= b <= a, got ({a}, {b})")
    table = _sized_table(a, b, eps, rng)
    t = table.value(a, b)
    traj = tasep_from_lpp(table, t)
    occ = traj.to_bool()[t]
    off = (a - b) - traj.window_lo
    current = int(occ[off + 1 :].sum())
    return current == b


def check_coupling_grid(a_max: int, eps: float, rng: np.random.Generator) -> tuple[int, list]:
    """Check the coupling identity for every 1 <= b <= a <= a_max at once.

    One realization is sampled; the current at site a-b and time G[a][b]
    is computed directly from per-particle jump counts.  Returns the
    number of identities checked and the list of failing (a, b) pairs.
    """
    table = _sized_table(a_max, a_max, eps, rng)
    G = table.G
    m = G.shape[0]
    a_idx, b_idx = np.nonzero(np.tril(np.ones((a_max, a_max), dtype=bool)))
    a_arr = a_idx + 1
    b_arr = b_idx + 1
    ts = G[a_idx, b_idx]
    sites = a_arr - b_arr
    counts = np.zeros(ts.shape[0], dtype=np.int64)
    for k in range(m):
        jumps = np.searchsorted(G[:, k], ts, side="right")
        counts += (1 - (k + 1) + jumps) > sites
    bad = [
        (int(a_arr[i]), int(b_arr[i]))
        for i in np.nonzero(counts != b_arr)[0]
    ]
    return ts.shape[0], bad
