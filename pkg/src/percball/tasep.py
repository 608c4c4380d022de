"""Discrete-time parallel TASEP on Z with the step initial condition.

Particles live on integer sites; site j is occupied or empty.  At every
time step, simultaneously for all j, a particle at j moves to j+1 with
probability ``eps`` provided site j+1 was empty in the *previous* snapshot.
The run starts from the step profile (particles at all sites <= 0).

A finite window simulates the infinite line exactly: information travels
at most one site per step, so a window with enough margin (see
:func:`margin_window`) keeps boundary effects away from observed sites for
the whole run.

Occupations are stored bit-packed, one bit per site; a full trajectory of
``n`` steps over a window of ``W`` sites costs ``(n+1) * W/8`` bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .backend import njit, select


class WindowError(ValueError):
    """Window shape is invalid or too small for the requested observable."""


def margin_window(n_steps: int, j_max: int = 0) -> tuple[int, int]:
    """Window bounds that make an ``n_steps`` run exact at sites |j| <= j_max.

    Information propagates at most one site per step, so boundary effects
    cannot reach the observed sites within the run.
    """
    return (-n_steps - j_max - 2, n_steps + j_max + 2)


def _pack(occ: np.ndarray) -> np.ndarray:
    bits = np.packbits(occ.astype(np.uint8))
    bits.setflags(write=False)
    return bits


def _unpack(bits: np.ndarray, width: int) -> np.ndarray:
    return np.unpackbits(bits, count=width).astype(bool)


@dataclass(frozen=True)
class ParticleField:
    """Immutable occupation snapshot of a window [window_lo, window_hi].

    ``bits`` is the packed occupation, ascending site order starting at
    ``window_lo``.  Fields are safe to share across threads.
    """

    window_lo: int
    window_hi: int
    time: int
    bits: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.window_lo >= self.window_hi:
            raise WindowError(
                f"window [{self.window_lo}, {self.window_hi}] needs lo < hi"
            )

    @property
    def width(self) -> int:
        return self.window_hi - self.window_lo + 1

    def to_bool(self) -> np.ndarray:
        """Occupation as a bool array over the window (ascending sites)."""
        return _unpack(self.bits, self.width)

    def occupied(self, j: int) -> bool:
        if not self.window_lo <= j <= self.window_hi:
            raise WindowError(f"site {j} outside window [{self.window_lo}, {self.window_hi}]")
        off = j - self.window_lo
        return bool((self.bits[off >> 3] >> (7 - (off & 7))) & 1)

    def particle_count(self) -> int:
        return int(np.unpackbits(self.bits, count=self.width).sum())


def tasep_init(window_lo: int, window_hi: int) -> ParticleField:
    """Step profile at time 0: occupied exactly at sites <= 0."""
    if window_lo >= window_hi:
        raise WindowError(f"window [{window_lo}, {window_hi}] needs lo < hi")
    if not (window_lo < 0 < window_hi):
        raise WindowError("window must contain sites on both sides of the origin")
    sites = np.arange(window_lo, window_hi + 1)
    return ParticleField(window_lo, window_hi, 0, _pack(sites <= 0))


@njit(nogil=True)
def _step_loop(occ, draws, eps):
    # One parallel update against the frozen snapshot `occ`; draws are
    # consumed in ascending site order, one per site.  The top window site
    # never moves (its target is outside the window).
    w = occ.shape[0]
    new = np.empty(w, dtype=np.bool_)
    moved_prev = False
    for j in range(w):
        moves = False
        if occ[j] and j + 1 < w:
            if not occ[j + 1]:
                moves = draws[j] < eps
        new[j] = (occ[j] and not moves) or moved_prev
        moved_prev = moves
    return new


def _step_vec(occ, draws, eps):
    moves = np.zeros(occ.shape[0], dtype=bool)
    moves[:-1] = occ[:-1] & ~occ[1:] & (draws[:-1] < eps)
    new = occ & ~moves
    new[1:] |= moves[:-1]
    return new


_step_kernel = select(_step_loop, _step_vec)


def tasep_step(
    field: ParticleField,
    eps: float,
    rng: np.random.Generator | None = None,
    draws: np.ndarray | None = None,
) -> ParticleField:
    """One parallel update: movers jump with probability ``eps``.

    A particle moves only if its target site was empty at the field's
    current time; blocked particles never move.  ``draws`` can replace the
    rng (one uniform per site, ascending order) to couple runs on
    different windows site-for-site.
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"jump probability {eps} outside [0, 1]")
    occ = field.to_bool()
    if draws is None:
        if rng is None:
            raise ValueError("either rng or draws must be given")
        draws = rng.random(occ.shape[0])
    new = _step_kernel(occ, np.asarray(draws, dtype=np.float64), eps)
    if new.sum() != occ.sum():
        raise AssertionError("particle count changed inside the window")
    return ParticleField(field.window_lo, field.window_hi, field.time + 1, _pack(new))


@dataclass(frozen=True)
class Trajectory:
    """Bit-packed occupation history: rows are times 0..n_steps.

    Shared output type of direct TASEP runs, of the passage-time coupling
    and of particle extraction from cross-model distance fields.
    """

    window_lo: int
    window_hi: int
    eps: float
    packed: np.ndarray = field(repr=False)  # shape (n_steps+1, ceil(width/8))

    @property
    def width(self) -> int:
        return self.window_hi - self.window_lo + 1

    @property
    def n_steps(self) -> int:
        return self.packed.shape[0] - 1

    def to_bool(self) -> np.ndarray:
        """(n_steps+1, width) bool matrix of occupations."""
        return np.unpackbits(self.packed, axis=1, count=self.width).astype(bool)

    def field_at(self, t: int) -> ParticleField:
        if not 0 <= t <= self.n_steps:
            raise IndexError(f"time {t} outside 0..{self.n_steps}")
        return ParticleField(self.window_lo, self.window_hi, t, self.packed[t].copy())

    def occupied(self, t: int, j: int) -> bool:
        off = j - self.window_lo
        if not (0 <= t <= self.n_steps and 0 <= off < self.width):
            raise WindowError(f"(t={t}, j={j}) outside trajectory")
        return bool((self.packed[t, off >> 3] >> (7 - (off & 7))) & 1)


def run_tasep(
    n_steps: int,
    eps: float,
    rng: np.random.Generator,
    window: tuple[int, int] | None = None,
    j_max: int = 0,
) -> Trajectory:
    """Run ``n_steps`` parallel updates from the step profile.

    Without an explicit window the margin rule for ``j_max`` is applied,
    so sites |j| <= j_max evolve exactly as on the infinite line.
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"jump probability {eps} outside [0, 1]")
    if window is None:
        window = margin_window(n_steps, j_max)
    lo, hi = window
    if lo >= hi or not (lo < 0 < hi):
        raise WindowError(f"window [{lo}, {hi}] invalid for a step-profile run")
    width = hi - lo + 1
    occ = (np.arange(lo, hi + 1) <= 0)
    packed = np.empty((n_steps + 1, (width + 7) // 8), dtype=np.uint8)
    packed[0] = np.packbits(occ.astype(np.uint8))
    count = int(occ.sum())
    for t in range(n_steps):
        occ = _step_kernel(occ, rng.random(width), eps)
        packed[t + 1] = np.packbits(occ.astype(np.uint8))
    if int(occ.sum()) != count:
        raise AssertionError("particle count changed inside the window")
    packed.setflags(write=False)
    return Trajectory(lo, hi, eps, packed)


def current(field: ParticleField, j: int) -> int:
    """Number of occupied sites strictly right of ``j``.

    For step-profile descendants this equals the number of particles that
    have passed through ``j`` plus the initial count above ``j``; for
    j >= 0 the two readings coincide.
    """
    if j < field.window_lo:
        raise WindowError(f"site {j} below window start {field.window_lo}")
    if field.window_hi < field.time:
        raise WindowError(
            "window too small: particles may extend beyond "
            f"window_hi={field.window_hi} at time {field.time}"
        )
    occ = field.to_bool()
    off = j - field.window_lo
    if off >= field.width:
        return 0
    return int(occ[off + 1 :].sum())


def trajectory_current(traj: Trajectory, n: int, j: int) -> int:
    """Occupied sites strictly above j at time n of a trajectory."""
    occ = np.unpackbits(traj.packed[n], count=traj.width).astype(bool)
    off = j - traj.window_lo
    if off < -1 or off >= traj.width:
        raise WindowError(f"site {j} outside trajectory window")
    return int(occ[off + 1 :].sum())


@dataclass(frozen=True)
class CurrentTable:
    """Currents J[n][j] for all times of a trajectory and a range of sites.

    Validated on construction: J decreases by 0 or 1 along j, increases by
    0 or 1 along n, and starts from max(0, -j) at time 0.
    """

    j_lo: int
    j_hi: int
    values: np.ndarray = field(repr=False)  # shape (n_steps+1, j_hi-j_lo+1)

    @classmethod
    def from_trajectory(cls, traj: Trajectory, j_lo: int, j_hi: int) -> "CurrentTable":
        if traj.window_hi < traj.n_steps:
            raise WindowError("window too small to read currents at the final time")
        if j_lo < traj.window_lo or j_hi > traj.window_hi:
            raise WindowError("requested site range outside the trajectory window")
        occ = traj.to_bool()
        # suffix counts: occupied strictly right of j
        suffix = np.zeros((occ.shape[0], occ.shape[1] + 1), dtype=np.int64)
        suffix[:, :-1] = np.cumsum(occ[:, ::-1], axis=1)[:, ::-1]
        cols = np.arange(j_lo, j_hi + 1) - traj.window_lo + 1
        values = suffix[:, cols]
        table = cls(j_lo, j_hi, values)
        table._validate()
        return table

    def _validate(self) -> None:
        dj = self.values[:, :-1] - self.values[:, 1:]
        if dj.size and not np.all((dj == 0) | (dj == 1)):
            raise AssertionError("current must drop by 0 or 1 per site")
        dn = self.values[1:] - self.values[:-1]
        if dn.size and not np.all((dn == 0) | (dn == 1)):
            raise AssertionError("current must grow by 0 or 1 per step")
        j = np.arange(self.j_lo, self.j_hi + 1)
        if not np.array_equal(self.values[0], np.maximum(0, -j)):
            raise AssertionError("time-0 current must be max(0, -j)")

    def value(self, n: int, j: int) -> int:
        return int(self.values[n, j - self.j_lo])


def current_limit(x: float, y: float, eps: float) -> float:
    """Long-time current density at macroscopic time x and height y.

    Defined for x > 0.  Above the rarefaction fan (y > x*eps) the limit is
    0; below the fan (y < -x*eps) the request is rejected.
    """
    if x <= 0:
        raise ValueError(f"need x > 0, got {x}")
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"jump probability {eps} outside [0, 1]")
    if y > x * eps:
        return 0.0
    if y < -x * eps:
        raise ValueError(f"y={y} below -x*eps={-x * eps}")
    if eps == 0.0:
        # only y == 0 reaches here; no particle ever moves
        return 0.0
    return 0.5 * (x - y) - 0.5 * math.sqrt((1.0 - eps) * (x * x - y * y / eps))
