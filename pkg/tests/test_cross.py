import numpy as np
import pytest
from conftest import cross_dijkstra_oracle as dijkstra_oracle

from percball.cross import (
    CrossConfig,
    SafeRegionError,
    certificate_strip,
    cross_distance,
    cross_distance_limit,
    distance_current_identity,
    extract_particles,
    final_column_current,
    margin_strip,
    sample_cross,
)
from percball.rng import stream
from percball.tasep import trajectory_current


def test_sampling_extremes():
    rng = np.random.default_rng(0)
    assert np.all(sample_cross(5, -3, 3, 0.0, rng).h_open)
    assert not np.any(sample_cross(5, -3, 3, 1.0, rng).h_open)


def test_sampling_open_fraction():
    rng = np.random.default_rng(1)
    cfg = sample_cross(100, -50, 49, 0.3, rng)
    frac = cfg.h_open.mean()
    se = np.sqrt(0.3 * 0.7 / cfg.h_open.size)
    assert abs(frac - 0.7) <= 3 * se


def test_all_open_distance():
    cfg = sample_cross(6, -10, 10, 0.0, np.random.default_rng(0))
    fld = cross_distance(cfg)
    for i in range(7):
        for j in range(-4, 5):
            assert fld.value(i, j) == i + abs(j)


def test_single_closed_edge_detour():
    h = np.ones((1, 21), dtype=bool)
    h[0, 10] = False  # edge (0,0)->(1,0)
    fld = cross_distance(CrossConfig(1, -10, 10, 0.5, h))
    assert fld.value(1, 0) == 3


def test_diagonal_shortcut():
    # only (0,0)->(1,0) open: (2,1) still reached in 3 via the diagonal
    h = np.zeros((2, 21), dtype=bool)
    h[0, 10] = True
    fld = cross_distance(CrossConfig(2, -10, 10, 0.9, h))
    assert fld.value(2, 1) == 3


@pytest.mark.parametrize("eps", [0.1, 0.5, 0.9])
def test_distance_matches_dijkstra_oracle(eps):
    rng = stream(100, "cross-oracle", int(eps * 10))
    for rep in range(40):
        n = int(rng.integers(2, 21))
        half = int(rng.integers(4, 12))
        cfg = sample_cross(n, -half, half, eps, rng)
        fld = cross_distance(cfg)
        oracle = dijkstra_oracle(cfg)
        assert np.array_equal(fld.D.astype(np.int64), oracle), (eps, rep)


def test_parity_and_lower_bound():
    rng = stream(7, "cross-edges", 0)
    cfg = sample_cross(30, *margin_strip(30, 5), 0.4, rng)
    fld = cross_distance(cfg)
    j = np.arange(cfg.row_lo, cfg.row_hi + 1)
    for i in range(31):
        d = fld.D[i].astype(np.int64)
        assert np.all(d >= i + np.abs(j))
        assert np.all((d - (i + j)) % 2 == 0)
        # vertical increments of one, horizontal increments in {1, 3}
        assert np.all(np.abs(np.diff(d)) == 1)
    dh = fld.D[1:].astype(np.int64) - fld.D[:-1].astype(np.int64)
    assert np.all((dh == 1) | (dh == 3))
    assert np.all(dh[cfg.h_open] == 1)


def test_extraction_step_profile_and_frozen():
    cfg = sample_cross(4, -6, 6, 0.0, np.random.default_rng(0))
    traj = extract_particles(cross_distance(cfg))
    occ = traj.to_bool()
    sites = np.arange(traj.window_lo, traj.window_hi + 1)
    for t in range(5):
        assert np.array_equal(occ[t], sites <= 0)


def test_identity_on_random_configs():
    for eps in (0.1, 0.3, 0.7):
        for rep in range(25):
            cfg = sample_cross(
                50, *margin_strip(50, 8), eps, stream(13, "cross-edges", rep)
            )
            assert distance_current_identity(cfg, j_max=8)


def test_identity_all_closed_small():
    # checked mechanically against the sweep (oracle-verified above)
    for n in range(1, 5):
        cfg = sample_cross(n, *margin_strip(n, 4), 1.0, np.random.default_rng(0))
        fld = cross_distance(cfg)
        assert np.array_equal(fld.D.astype(np.int64), dijkstra_oracle(cfg))
        assert distance_current_identity(cfg, j_max=4)
        # odd columns force one leftover vertical step
        expect = 2 * n + (n % 2)
        assert fld.value(n, 0) == expect


def test_limit_values():
    assert cross_distance_limit(1.0, 0.3) == pytest.approx(1.3)
    assert cross_distance_limit(0.0, 0.19) == pytest.approx(1.1)
    assert cross_distance_limit(0.7, 0.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        cross_distance_limit(1.5, 0.1)
    with pytest.raises(ValueError):
        cross_distance_limit(0.5, 1.0)


def test_certificate_band_and_rejection():
    cfg = sample_cross(40, -8, 8, 0.5, stream(3, "cross-edges", 0))
    fld = cross_distance(cfg)
    band_lo, band_hi = fld.exact_band()
    assert band_lo <= 0 <= band_hi
    with pytest.raises(SafeRegionError):
        fld.value(40, 100)


def test_narrow_strip_matches_wide_strip_on_band():
    # certified rows of a narrow strip agree exactly with a much wider one
    rng_draws = stream(21, "cross-edges", 0)
    n = 60
    wide_lo, wide_hi = margin_strip(n, 0)
    wide = sample_cross(n, wide_lo, wide_hi, 0.3, rng_draws)
    narrow_lo, narrow_hi = -15, 15
    off = narrow_lo - wide_lo
    narrow = CrossConfig(
        n, narrow_lo, narrow_hi, 0.3, wide.h_open[:, off : off + 31]
    )
    f_wide = cross_distance(wide)
    f_narrow = cross_distance(narrow)
    b_lo, b_hi = f_narrow.exact_band()
    for j in range(b_lo, b_hi + 1):
        for i in (0, n // 2, n):
            assert f_narrow.value(i, j) == f_wide.value(i, j)


def test_final_column_current_matches_trajectory():
    cfg = sample_cross(50, *certificate_strip(50, 5, 0.2), 0.2, stream(4, "cross-edges", 1))
    fld = cross_distance(cfg)
    traj = extract_particles(fld)
    for j in (0, 2, 5):
        assert final_column_current(fld, j) == trajectory_current(traj, 50, j)


def test_extraction_window_guarantee():
    # a strip cut far below the fan height cannot certify completeness
    cfg = sample_cross(200, -210, 8, 0.5, stream(5, "cross-edges", 2))
    fld = cross_distance(cfg)
    with pytest.raises(SafeRegionError):
        extract_particles(fld)
