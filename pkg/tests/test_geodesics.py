import numpy as np
import pytest
from conftest import cross_dijkstra_oracle

from percball.cross import (
    CrossConfig,
    certificate_strip,
    cross_distance,
    extract_particles,
    margin_strip,
    sample_cross,
)
from percball.geodesics import (
    BYPASS_DISCONNECTED,
    BYPASS_ESCAPED,
    BYPASS_OK,
    FORCED_CLOSED,
    FORCED_OPEN,
    UNBIASED,
    ModifiedPath,
    bad_edges_of,
    bound_statistics,
    build_geodesic,
    bypass,
    classify_edges,
    dual_clusters,
    eliminate_diagonals,
    resample_unbiased,
)
from percball.io import load_trajectory, save_trajectory
from percball.percolation import BondConfig, derive_cross, sample_bonds
from percball.rng import stream


def _cross_pipeline(n, eps, seed, j_max=6):
    cfg = sample_cross(n, *margin_strip(n, j_max), eps, stream(31, "cross-edges", seed), seed=seed)
    fld = cross_distance(cfg)
    return cfg, fld, extract_particles(fld)


def test_all_open_straight_line():
    cfg, fld, traj = _cross_pipeline(12, 0.0, 0)
    path = build_geodesic(traj, (12, 0))
    assert path.kinds == tuple(["E"] * 12)
    assert path.total_weight == 12 == fld.value(12, 0)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_deterministic_closed_case(n):
    cfg, fld, traj = _cross_pipeline(n, 1.0, n)
    path = build_geodesic(traj, (n, 0))
    oracle = cross_dijkstra_oracle(cfg)
    assert path.total_weight == oracle[n, -cfg.row_lo] == fld.value(n, 0)


def test_weight_equals_distance_random():
    for rep in range(30):
        eps = (0.05, 0.2, 0.5)[rep % 3]
        cfg, fld, traj = _cross_pipeline(50, eps, rep)
        for j_end in (0, 3, 6):
            path = build_geodesic(traj, (50, j_end))
            assert path.total_weight == fld.value(50, j_end), (rep, j_end)


def test_depends_only_on_trajectory(tmp_path):
    cfg, fld, traj = _cross_pipeline(40, 0.3, 5)
    path = build_geodesic(traj, (40, 2))
    dump = tmp_path / "traj.txt"
    save_trajectory(traj, dump)
    reloaded = load_trajectory(dump)
    path2 = build_geodesic(reloaded, (40, 2))
    assert path.kinds == path2.kinds
    assert np.array_equal(path.vertices, path2.vertices)


def test_diagonal_only_when_closed():
    for rep in range(10):
        cfg, fld, traj = _cross_pipeline(40, 0.3, 100 + rep)
        path = build_geodesic(traj, (40, 4))
        for idx, kind in enumerate(path.kinds):
            if kind in ("NE", "SE"):
                x, y = path.vertices[idx]
                assert not cfg.edge_open(x, y), (rep, idx)
            elif kind == "E":
                x, y = path.vertices[idx]
                assert cfg.edge_open(x, y)


def test_eliminate_diagonals_no_diagonal_unchanged():
    cfg, fld, traj = _cross_pipeline(10, 0.0, 0)
    path = build_geodesic(traj, (10, 0))
    mod = eliminate_diagonals(path)
    assert np.array_equal(mod.vertices, path.vertices)
    assert mod.k_edges() == []
    assert mod.unit_length == path.total_weight


def test_eliminate_diagonals_preserves_length():
    for rep in range(10):
        cfg, fld, traj = _cross_pipeline(50, 0.25, 200 + rep)
        path = build_geodesic(traj, (50, 5))
        mod = eliminate_diagonals(path)
        assert mod.unit_length == path.total_weight
        assert mod.end == path.end
        assert len(mod.k_edges()) == path.n_verticals() + 2 * path.n_diagonals()
        deltas = np.abs(np.diff(mod.vertices, axis=0)).sum(axis=1)
        assert np.all(deltas == 1)


def test_classification_all_open_no_forced_closed():
    cfg, fld, traj = _cross_pipeline(20, 0.0, 0)
    cls = classify_edges(traj, cfg)
    n_unbiased, n_open, n_closed = cls.counts()
    assert n_closed == 0
    assert n_open > 0  # step-front movers that stayed put


def test_candidate_edges_unbiased():
    for rep in range(10):
        cfg, fld, traj = _cross_pipeline(40, 0.3, 300 + rep)
        path = build_geodesic(traj, (40, 3))
        mod = eliminate_diagonals(path)
        cls = classify_edges(traj, cfg)
        for kind, x, y in mod.k_edges():
            if kind == "h":
                assert cls.of(x, y) == UNBIASED, (rep, x, y)


def test_forced_edge_neighbors_unbiased():
    # both same-column neighbors of a forced horizontal edge are unbiased
    cfg, fld, traj = _cross_pipeline(40, 0.4, 400)
    cls = classify_edges(traj, cfg)
    forced = np.argwhere(cls.cls != UNBIASED)
    assert forced.shape[0] > 0
    for i, off in forced:
        j = cls.site_lo + off
        for nb in (j - 1, j + 1):
            if cls.site_lo <= nb < cls.site_lo + cls.cls.shape[1]:
                assert cls.of(i, nb) == UNBIASED


def test_resampling_unbiased_reproduces_record():
    rng = stream(32, "resample", 0)
    for rep in range(10):
        cfg, fld, traj = _cross_pipeline(30, 0.35, 500 + rep)
        cls = classify_edges(traj, cfg)
        fresh = resample_unbiased(cfg, cls, rng)
        traj2 = extract_particles(cross_distance(fresh))
        assert traj2.window_lo == traj.window_lo
        assert np.array_equal(traj.packed, traj2.packed), rep


def test_classification_consistency_error():
    cfg, fld, traj = _cross_pipeline(20, 0.5, 600)
    cls = classify_edges(traj, cfg)
    forced = np.argwhere(cls.cls != UNBIASED)
    i, off = forced[0]
    h = np.array(cfg.h_open)
    h[i, (cls.site_lo - cfg.row_lo) + off] ^= True
    bad_cfg = CrossConfig(cfg.n_cols, cfg.row_lo, cfg.row_hi, cfg.eps, h)
    with pytest.raises(ValueError):
        classify_edges(traj, bad_cfg)


def test_conditional_binomial_exact_enumeration():
    # all assignments of the candidate horizontal edges leave the record
    # unchanged, so the closed count among them is exactly binomial
    for seed in range(50):
        cfg, fld, traj = _cross_pipeline(8, 0.5, 700 + seed, j_max=4)
        path = build_geodesic(traj, (8, 1))
        mod = eliminate_diagonals(path)
        k_h = [(x, y) for kind, x, y in mod.k_edges() if kind == "h"]
        if not 1 <= len(k_h) <= 4:
            continue
        for mask in range(1 << len(k_h)):
            h = np.array(cfg.h_open)
            for b, (x, y) in enumerate(k_h):
                h[x, y - cfg.row_lo] = bool((mask >> b) & 1)
            variant = CrossConfig(cfg.n_cols, cfg.row_lo, cfg.row_hi, cfg.eps, h)
            traj2 = extract_particles(cross_distance(variant))
            assert np.array_equal(traj.packed, traj2.packed), (seed, mask)
        return  # one full enumeration is enough
    pytest.fail("no sample with 1..4 candidate horizontal edges found")


def _box_all_open(w=12, h=9):
    hh = np.ones((w - 1, h), dtype=bool)
    vv = np.ones((w, h - 1), dtype=bool)
    return BondConfig(-2, w - 3, -4, h - 5, 0.9, hh, vv)


def test_dual_cluster_isolated_edge():
    config = _box_all_open()
    h = np.array(config.h_open)
    h[config.offset(2, 0)] = False
    config = BondConfig(config.col_lo, config.col_hi, config.row_lo, config.row_hi,
                        config.p, h, config.v_open)
    clusters = dual_clusters(config, [("h", 2, 0)])
    comp = clusters.component_for(("h", 2, 0))
    assert comp.edges == frozenset({("h", 2, 0)})
    assert len(comp.boundary) == 6
    assert not clusters.escaped


def test_dual_cluster_adjacent_pair_shared():
    config = _box_all_open()
    h = np.array(config.h_open)
    h[config.offset(2, 0)] = False
    h[config.offset(2, 1)] = False
    config = BondConfig(config.col_lo, config.col_hi, config.row_lo, config.row_hi,
                        config.p, h, config.v_open)
    clusters = dual_clusters(config, [("h", 2, 0), ("h", 2, 1)])
    assert len(clusters.components) == 1
    comp = clusters.components[0]
    assert comp.edges == frozenset({("h", 2, 0), ("h", 2, 1)})
    assert len(comp.boundary) <= 6 * 2
    assert clusters.component_for(("h", 2, 0)) is clusters.component_for(("h", 2, 1))


def test_dual_cluster_escape_flag():
    config = _box_all_open()
    h = np.array(config.h_open)
    h[config.offset(-2, -4)] = False  # corner edge: dual cluster leaves the box
    config = BondConfig(config.col_lo, config.col_hi, config.row_lo, config.row_hi,
                        config.p, h, config.v_open)
    clusters = dual_clusters(config, [("h", -2, -4)])
    assert clusters.escaped


def test_bypass_trivial_and_detour():
    # no bad edges: the search returns the path itself
    config = _box_all_open()
    verts = np.array([(x, 0) for x in range(0, 6)], dtype=np.int64)
    straight = ModifiedPath(verts, tuple("H" * 5), 5)
    empty = dual_clusters(config, [])
    res = bypass(straight, empty, config)
    assert res.status == BYPASS_OK
    assert np.array_equal(res.vertices, straight.vertices)

    # one isolated closed edge on the straight segment: +2 detour
    h = np.array(config.h_open)
    h[config.offset(2, 0)] = False
    blocked = BondConfig(config.col_lo, config.col_hi, config.row_lo, config.row_hi,
                         config.p, h, config.v_open)
    clusters = dual_clusters(blocked, [("h", 2, 0)])
    res = bypass(straight, clusters, blocked)
    assert res.status == BYPASS_OK
    assert res.length == 7


def test_bypass_escaped_and_disconnected():
    config = _box_all_open()
    verts = np.array([(x, 0) for x in range(0, 6)], dtype=np.int64)
    straight = ModifiedPath(verts, tuple("H" * 5), 5)

    h = np.array(config.h_open)
    h[config.offset(-2, -4)] = False
    esc_cfg = BondConfig(config.col_lo, config.col_hi, config.row_lo, config.row_hi,
                         config.p, h, config.v_open)
    esc = dual_clusters(esc_cfg, [("h", -2, -4)])
    assert bypass(straight, esc, esc_cfg).status == BYPASS_ESCAPED

    # sever the straight path without registering any cluster: no route
    h2 = np.array(config.h_open)
    h2[config.offset(2, 0)] = False
    cut = BondConfig(config.col_lo, config.col_hi, config.row_lo, config.row_hi,
                     config.p, h2, np.zeros_like(config.v_open))
    empty = dual_clusters(cut, [])
    assert bypass(straight, empty, cut).status == BYPASS_DISCONNECTED


def test_bad_edges_subset_of_candidates():
    for rep in range(15):
        bond = sample_bonds((-10, 40, -15, 15), 0.8, stream(33, "bond-edges", rep))
        fld = cross_distance(derive_cross(bond, n_cols=30))
        traj = extract_particles(fld)
        path = build_geodesic(traj, (30, 1))
        mod = eliminate_diagonals(path)
        bad = bad_edges_of(mod, bond)  # raises if any closed edge leaves K
        assert set(bad) <= set(mod.k_edges())


def test_bound_statistics_eps_zero():
    records = []
    for i in range(30):
        records.append({"k": 0, "b": 0, "boundary": 0, "escaped": False})
    stats = bound_statistics(records)
    assert stats["mean_k"] == 0 and stats["mean_b"] == 0 and stats["mean_boundary"] == 0
    assert stats["escape_rate"] == 0.0
    with pytest.raises(ValueError):
        bound_statistics(records[:10])
