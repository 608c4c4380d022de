"""Bernoulli bond percolation on a Z^2 box: chemical distances and clusters.

Each horizontal and vertical edge of the box is open independently with
probability p.  Chemical distance is the open-path graph distance from a
source; unreachable is the value -1, never an exception, so Monte Carlo
loops stay branch-cheap.  Cluster structure comes from a union-find pass;
the largest cluster in the box stands in for the infinite cluster when
conditioning estimates.

Dropping every vertical edge state and declaring diagonals open turns a
box into a cross-model configuration on the same horizontal edges; since
that only adds edges, cross distances never exceed chemical distances,
pathwise, on every realization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .backend import njit, select
from .cross import CrossConfig

UNREACHABLE = -1


@dataclass(frozen=True)
class BondConfig:
    """Edge states over the vertex box [col_lo..col_hi] x [row_lo..row_hi].

    ``h_open[xi, yi]``: edge (x, y)-(x+1, y); ``v_open[xi, yi]``: edge
    (x, y)-(x, y+1); indices are offsets from (col_lo, row_lo).
    """

    col_lo: int
    col_hi: int
    row_lo: int
    row_hi: int
    p: float
    h_open: np.ndarray = field(repr=False)
    v_open: np.ndarray = field(repr=False)
    seed: int | None = None

    def __post_init__(self):
        w, h = self.shape
        if self.h_open.shape != (w - 1, h):
            raise ValueError(f"h_open shape {self.h_open.shape} != ({w - 1}, {h})")
        if self.v_open.shape != (w, h - 1):
            raise ValueError(f"v_open shape {self.v_open.shape} != ({w}, {h - 1})")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.col_hi - self.col_lo + 1, self.row_hi - self.row_lo + 1)

    def offset(self, x: int, y: int) -> tuple[int, int]:
        if not (self.col_lo <= x <= self.col_hi and self.row_lo <= y <= self.row_hi):
            raise ValueError(f"vertex ({x}, {y}) outside box")
        return (x - self.col_lo, y - self.row_lo)


def sample_bonds(
    box: tuple[int, int, int, int],
    p: float,
    rng: np.random.Generator,
    seed: int | None = None,
) -> BondConfig:
    """Edges open i.i.d. with probability p over the given vertex box."""
    col_lo, col_hi, row_lo, row_hi = box
    if col_lo >= col_hi or row_lo >= row_hi:
        raise ValueError(f"degenerate box {box}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")
    w = col_hi - col_lo + 1
    h = row_hi - row_lo + 1
    # float32 draws: half the bandwidth of float64, amply fine for Bernoulli
    h_open = rng.random((w - 1, h), dtype=np.float32) < np.float32(p)
    v_open = rng.random((w, h - 1), dtype=np.float32) < np.float32(p)
    h_open.setflags(write=False)
    v_open.setflags(write=False)
    return BondConfig(col_lo, col_hi, row_lo, row_hi, p, h_open, v_open, seed)


@njit(nogil=True)
def _bfs_loop(h_open, v_open, src):
    w, h = v_open.shape[0], h_open.shape[1]
    n = w * h
    dist = np.full(n, -1, dtype=np.int32)
    queue = np.empty(n, dtype=np.int64)
    dist[src] = 0
    queue[0] = src
    head = 0
    tail = 1
    while head < tail:
        u = queue[head]
        head += 1
        xi = u // h
        yi = u % h
        du = dist[u]
        if xi + 1 < w and h_open[xi, yi] and dist[u + h] < 0:
            dist[u + h] = du + 1
            queue[tail] = u + h
            tail += 1
        if xi > 0 and h_open[xi - 1, yi] and dist[u - h] < 0:
            dist[u - h] = du + 1
            queue[tail] = u - h
            tail += 1
        if yi + 1 < h and v_open[xi, yi] and dist[u + 1] < 0:
            dist[u + 1] = du + 1
            queue[tail] = u + 1
            tail += 1
        if yi > 0 and v_open[xi, yi - 1] and dist[u - 1] < 0:
            dist[u - 1] = du + 1
            queue[tail] = u - 1
            tail += 1
    return dist.reshape(w, h)


def _adjacency(h_open, v_open):
    from scipy.sparse import csr_matrix

    w, h = v_open.shape[0], h_open.shape[1]
    n = w * h
    xi, yi = np.nonzero(h_open)
    hu = xi * h + yi
    xi2, yi2 = np.nonzero(v_open)
    vu = xi2 * h + yi2
    rows = np.concatenate([hu, vu])
    cols = np.concatenate([hu + h, vu + 1])
    data = np.ones(rows.shape[0], dtype=np.int8)
    return csr_matrix((data, (rows, cols)), shape=(n, n))


def _bfs_scipy(h_open, v_open, src):
    from scipy.sparse.csgraph import dijkstra

    w, h = v_open.shape[0], h_open.shape[1]
    mat = _adjacency(h_open, v_open)
    d = dijkstra(mat, directed=False, unweighted=True, indices=src)
    out = np.where(np.isfinite(d), d, -1).astype(np.int32)
    return out.reshape(w, h)


_bfs_kernel = select(_bfs_loop, _bfs_scipy)


@njit(nogil=True)
def _uf_find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(nogil=True)
def _labels_loop(h_open, v_open):
    w, h = v_open.shape[0], h_open.shape[1]
    n = w * h
    parent = np.arange(n, dtype=np.int64)
    for xi in range(w - 1):
        for yi in range(h):
            if h_open[xi, yi]:
                a = _uf_find(parent, xi * h + yi)
                b = _uf_find(parent, (xi + 1) * h + yi)
                if a != b:
                    parent[b] = a
    for xi in range(w):
        for yi in range(h - 1):
            if v_open[xi, yi]:
                a = _uf_find(parent, xi * h + yi)
                b = _uf_find(parent, xi * h + yi + 1)
                if a != b:
                    parent[b] = a
    roots = np.empty(n, dtype=np.int64)
    for i in range(n):
        roots[i] = _uf_find(parent, i)
    return roots


def _labels_scipy(h_open, v_open):
    from scipy.sparse.csgraph import connected_components

    mat = _adjacency(h_open, v_open)
    _, labels = connected_components(mat, directed=False)
    return labels.astype(np.int64)


_labels_kernel = select(_labels_loop, _labels_scipy)


@dataclass(frozen=True)
class ClusterLabeling:
    """Compact per-vertex cluster labels with sizes; giant = largest."""

    col_lo: int
    row_lo: int
    labels: np.ndarray = field(repr=False)  # shape (w, h), int64
    sizes: np.ndarray = field(repr=False)
    giant_label: int = 0

    def label_at(self, x: int, y: int) -> int:
        return int(self.labels[x - self.col_lo, y - self.row_lo])

    def giant_fraction(self) -> float:
        return float(self.sizes[self.giant_label]) / float(self.labels.size)


def label_clusters(config: BondConfig) -> ClusterLabeling:
    """Union-find labeling of open-edge connectivity inside the box."""
    raw = _labels_kernel(config.h_open, config.v_open)
    _, labels = np.unique(raw, return_inverse=True)
    sizes = np.bincount(labels)
    w, h = config.shape
    labels = labels.reshape(w, h)
    labels.setflags(write=False)
    sizes.setflags(write=False)
    return ClusterLabeling(
        config.col_lo, config.row_lo, labels, sizes, int(np.argmax(sizes))
    )


def distance_field(config: BondConfig, src: tuple[int, int]) -> np.ndarray:
    """Chemical distances from ``src`` to every box vertex; -1 unreachable."""
    xi, yi = config.offset(*src)
    h = config.shape[1]
    dist = _bfs_kernel(config.h_open, config.v_open, xi * h + yi)
    dist.setflags(write=False)
    return dist


def chemical_distance(config: BondConfig, src: tuple[int, int], dst: tuple[int, int]) -> int:
    """Shortest open-path length, or UNREACHABLE (-1)."""
    dist = distance_field(config, src)
    xi, yi = config.offset(*dst)
    return int(dist[xi, yi])


def derive_cross(config: BondConfig, n_cols: int | None = None) -> CrossConfig:
    """Cross-model configuration sharing this box's horizontal edges.

    Vertical and diagonal edges become open, so distances can only drop:
    D(0, x) >= D_cross(0, x) for every x, on every realization.
    ``n_cols`` restricts to the first columns east of 0 (default: all).
    """
    if not (config.col_lo <= 0 <= config.col_hi - 1):
        raise ValueError("box must contain column 0 and at least one column east")
    off = -config.col_lo
    h = config.h_open[off:]
    if n_cols is not None:
        if not 1 <= n_cols <= h.shape[0]:
            raise ValueError(f"n_cols={n_cols} outside 1..{h.shape[0]}")
        h = h[:n_cols]
    return CrossConfig(
        n_cols=h.shape[0],
        row_lo=config.row_lo,
        row_hi=config.row_hi,
        eps=1.0 - config.p,
        h_open=h,
        seed=config.seed,
    )
