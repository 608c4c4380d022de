import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from percball.lpp import (
    HorizonError,
    PassageTable,
    WeightGrid,
    check_coupling_grid,
    passage_times,
    psi,
    sample_weights,
    tasep_from_lpp,
    verify_coupling,
)
from percball.rng import stream
from percball.tasep import trajectory_current


def brute_force_passage(g):
    """Maximum path weight over all up-right paths, by enumeration."""
    a, b = g.shape
    best = np.zeros((a, b), dtype=np.int64)
    for i in range(a):
        for k in range(b):
            # choose which of the i+k steps go up
            top = -1
            for ups in itertools.combinations(range(i + k), i):
                x = y = 0
                total = g[0, 0]
                for s in range(i + k):
                    if s in ups:
                        x += 1
                    else:
                        y += 1
                    total += g[x, y]
                top = max(top, total)
            best[i, k] = top
    return best


def test_degenerate_weights():
    grid = sample_weights(4, 3, 1.0, np.random.default_rng(0))
    assert np.all(grid.g == 1)
    table = passage_times(grid)
    assert table.value(4, 3) == 4 + 3 - 1


def test_weight_stats():
    rng = np.random.default_rng(1)
    grid = sample_weights(100, 100, 0.5, rng)
    mean = grid.g.mean()
    se = grid.g.std(ddof=1) / 100.0
    assert abs(mean - 2.0) <= 3 * se
    # pmf eps*(1-eps)^(m-1)
    for m in range(1, 6):
        frac = np.mean(grid.g == m)
        p = 0.5**m
        assert abs(frac - p) <= 4 * math.sqrt(p * (1 - p) / grid.g.size) + 1e-9


def test_weight_validation():
    with pytest.raises(ValueError):
        sample_weights(3, 3, 0.0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        sample_weights(0, 3, 0.5, np.random.default_rng(0))
    with pytest.raises(ValueError):
        WeightGrid(0.5, np.array([[1, 0], [1, 1]], dtype=np.int64))


def test_passage_worked_example():
    g = WeightGrid(0.5, np.array([[1, 2], [3, 1]], dtype=np.int64))
    table = passage_times(g)
    assert table.value(1, 1) == 1
    assert table.value(2, 2) == 5


def test_passage_matches_brute_force():
    rng = np.random.default_rng(2)
    for _ in range(10):
        grid = sample_weights(5, 6, 0.4, rng)
        table = passage_times(grid)
        assert np.array_equal(table.G, brute_force_passage(grid.g))


def test_passage_monotone():
    grid = sample_weights(30, 30, 0.3, np.random.default_rng(3))
    G = passage_times(grid).G
    assert np.all(G[1:] > G[:-1])
    assert np.all(G[:, 1:] > G[:, :-1])


def test_psi_values():
    assert psi(1, 1, 1.0) == pytest.approx(2.0)
    assert psi(1, 1, 0.5) == pytest.approx(4 + 2 * math.sqrt(2))
    assert psi(1, 0, 0.25) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        psi(1, 1, 0.0)
    with pytest.raises(ValueError):
        psi(-1, 1, 0.5)


def test_coupling_first_jumps():
    # all-ones weights: particle k first jumps at time k
    grid = sample_weights(6, 6, 1.0, np.random.default_rng(0))
    table = passage_times(grid)
    traj = tasep_from_lpp(table, 6)
    occ = traj.to_bool()
    for k in range(1, 7):
        t = k  # G[1][k] = k
        site = 1 - k
        before = occ[t - 1, site - traj.window_lo]
        after = occ[t, site - traj.window_lo]
        assert before and not after


def test_horizon_check():
    grid = sample_weights(3, 3, 0.5, np.random.default_rng(4))
    table = passage_times(grid)
    with pytest.raises(HorizonError):
        tasep_from_lpp(table, int(table.G.max()) + 100)


def test_verify_coupling_cases():
    assert verify_coupling(1, 1, 0.7, np.random.default_rng(5))
    assert verify_coupling(5, 5, 1.0, np.random.default_rng(6))
    for seed in range(10):
        assert verify_coupling(12, 7, 0.3, np.random.default_rng(seed))
    with pytest.raises(ValueError):
        verify_coupling(3, 5, 0.5, np.random.default_rng(0))


def test_verify_coupling_medium():
    for seed in range(5):
        assert verify_coupling(100, 40, 0.2, stream(77, "lpp-weights", seed))


def test_coupling_grid_all_pairs():
    n_pairs, bad = check_coupling_grid(25, 0.5, np.random.default_rng(7))
    assert n_pairs == 25 * 26 // 2
    assert bad == []


def _direct_exact_law(eps: Fraction, steps: int, sites):
    """Exact distribution of the first `steps` occupation rows."""
    start = tuple(j <= 0 for j in sites)
    dist = {(start,): Fraction(1)}
    for _ in range(steps):
        new = {}
        for hist, pr in dist.items():
            state = hist[-1]
            movers = [
                i
                for i in range(len(state) - 1)
                if state[i] and not state[i + 1]
            ]
            for mask in range(1 << len(movers)):
                prob = pr
                nxt = list(state)
                for b, idx in enumerate(movers):
                    if (mask >> b) & 1:
                        prob *= eps
                        nxt[idx] = False
                        nxt[idx + 1] = True
                    else:
                        prob *= 1 - eps
                key = hist + (tuple(nxt),)
                new[key] = new.get(key, Fraction(0)) + prob
        dist = new
    return dist


def test_coupled_trajectory_matches_direct_law():
    # chi-square of sampled coupled trajectories against the exact law of
    # the parallel dynamics on a small window over 4 steps
    eps = 0.5
    steps = 4
    lo, hi = -4, 5
    sites = list(range(lo, hi + 1))
    exact = _direct_exact_law(Fraction(1, 2), steps, sites)

    n_samples = 4000
    counts = {}
    rng = np.random.default_rng(123)
    for _ in range(n_samples):
        grid = sample_weights(24, 24, eps, rng)
        table = passage_times(grid)
        if not table.covers_horizon(steps):
            continue
        traj = tasep_from_lpp(table, steps)
        occ = traj.to_bool()

        def occupied(t, j):
            off = j - traj.window_lo
            return bool(occ[t, off]) if 0 <= off < traj.width else False

        hist = tuple(
            tuple(occupied(t, j) for j in sites) for t in range(steps + 1)
        )
        counts[hist] = counts.get(hist, 0) + 1
    total = sum(counts.values())
    assert total >= 3900  # horizon almost never falls short at this size
    assert set(counts) <= set(exact)
    keys = sorted(exact, key=lambda k: -exact[k])
    expected = np.array([float(exact[k]) * total for k in keys])
    observed = np.array([counts.get(k, 0) for k in keys], dtype=float)
    # pool tail states so every expected bin is >= 5
    big = expected >= 5
    obs = np.append(observed[big], observed[~big].sum())
    exp = np.append(expected[big], expected[~big].sum())
    chi2, pvalue = stats.chisquare(obs, exp)
    assert pvalue > 1e-3, (chi2, pvalue)


def test_coupled_trajectory_exclusion_and_delay():
    # tasep_from_lpp asserts exclusion and one-step delay internally;
    # run a batch to exercise the checks on real samples
    rng = np.random.default_rng(8)
    for _ in range(20):
        grid = sample_weights(40, 40, 0.3, rng)
        table = passage_times(grid)
        horizon = table.value(10, 10)
        if not table.covers_horizon(horizon):
            continue
        traj = tasep_from_lpp(table, horizon)
        occ = traj.to_bool()
        for t in range(1, horizon + 1):
            vacated = occ[t - 1] & ~occ[t]
            arrived = ~occ[t - 1] & occ[t]
            assert np.array_equal(np.flatnonzero(vacated) + 1, np.flatnonzero(arrived))


def test_current_at_passage_time_spot():
    rng = stream(5, "lpp-weights", 0)
    grid = sample_weights(60, 60, 0.5, rng)
    table = passage_times(grid)
    a, b = 9, 4
    t = table.value(a, b)
    traj = tasep_from_lpp(table, t)
    assert trajectory_current(traj, t, a - b) == b
