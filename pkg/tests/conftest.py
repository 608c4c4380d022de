import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from percball.cross import CrossConfig


def cross_dijkstra_oracle(config: CrossConfig) -> np.ndarray:
    """Strip distances by generic weighted shortest path (independent of
    the column sweep: explicit graph, heap-based search)."""
    rows = config.n_rows
    cols = config.n_cols + 1
    n = cols * rows

    def node(i, r):
        return i * rows + r

    src, dst, wgt = [], [], []
    for i in range(cols):
        for r in range(rows - 1):
            src.append(node(i, r))
            dst.append(node(i, r + 1))
            wgt.append(1)
    for i in range(config.n_cols):
        for r in range(rows):
            if config.h_open[i, r]:
                src.append(node(i, r))
                dst.append(node(i + 1, r))
                wgt.append(1)
            if r + 1 < rows:
                src.append(node(i, r))
                dst.append(node(i + 1, r + 1))
                wgt.append(2)
            if r > 0:
                src.append(node(i, r))
                dst.append(node(i + 1, r - 1))
                wgt.append(2)
    mat = csr_matrix((wgt, (src, dst)), shape=(n, n))
    d = dijkstra(mat, directed=False, indices=node(0, -config.row_lo))
    return d.reshape(cols, rows).astype(np.int64)
