"""Canonical cross-model geodesics and their conversion to open Z^2 paths.

The canonical geodesic to E = (n, j_E) is built backwards from the
particle record alone.  After an initial vertical scan to the unique
final-column vertex sitting just above a particle and just below a hole,
each of the n backward steps looks at the tracked particle one time step
earlier: if it had just jumped, the path takes the down-left diagonal; if
the particle one rank up had just vacated the site above, the up-left
diagonal; otherwise the horizontal edge (which is then necessarily open).
Exactly one of the three applies at every step and the walk ends at the
origin.

Replacing every diagonal by a vertical-then-horizontal pair converts the
geodesic into a Z^2 path of the same length.  The candidate set K (the
final verticals plus the per-diagonal replacement edges) consists of
edges whose states the particle record never reads, so conditionally on
the record they stay i.i.d. Bernoulli; the closed ones among them (the
bad edges) are the only obstacles, and walking around the closed dual
cluster of each bad edge along its open boundary yields an open path of
length at most |pi| + |boundary union|.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .cross import CrossConfig
from .percolation import BondConfig
from .tasep import Trajectory, WindowError

# edge-state classes conditional on the particle record
UNBIASED = 0
FORCED_OPEN = 1
FORCED_CLOSED = 2

# bypass outcomes
BYPASS_OK = "ok"
BYPASS_ESCAPED = "escaped"
BYPASS_DISCONNECTED = "disconnected"

_STEP_DELTA = {
    "E": (1, 0),
    "NE": (1, 1),
    "SE": (1, -1),
    "N": (0, 1),
    "S": (0, -1),
}
_STEP_WEIGHT = {"E": 1, "NE": 2, "SE": 2, "N": 1, "S": 1}


@dataclass(frozen=True)
class GeodesicPath:
    """Vertex sequence from the origin to E with one step kind per edge.

    Kinds E/NE/SE appear first (exactly n of them), then only N/S steps
    inside the final column.  Weight counts diagonals twice.
    """

    vertices: np.ndarray = field(repr=False)  # (L+1, 2) int64, (col, row)
    kinds: tuple[str, ...] = ()
    total_weight: int = 0

    def __post_init__(self):
        v = self.vertices
        if v.shape[0] != len(self.kinds) + 1:
            raise ValueError("one step kind per edge required")
        weight = 0
        seen_vertical = False
        final_col = v[-1, 0]
        for idx, kind in enumerate(self.kinds):
            dx, dy = _STEP_DELTA[kind]
            if v[idx + 1, 0] - v[idx, 0] != dx or v[idx + 1, 1] - v[idx, 1] != dy:
                raise ValueError(f"step {idx} ({kind}) does not match vertices")
            if kind in ("N", "S"):
                seen_vertical = True
                if v[idx, 0] != final_col:
                    raise ValueError("vertical steps allowed only in the final column")
            elif seen_vertical:
                raise ValueError("horizontal/diagonal step after a vertical one")
            weight += _STEP_WEIGHT[kind]
        if weight != self.total_weight:
            raise ValueError(f"weight {self.total_weight} != recomputed {weight}")
        if not (v[0, 0] == 0 and v[0, 1] == 0):
            raise ValueError("path must start at the origin")

    @property
    def end(self) -> tuple[int, int]:
        return (int(self.vertices[-1, 0]), int(self.vertices[-1, 1]))

    def n_diagonals(self) -> int:
        return sum(1 for k in self.kinds if k in ("NE", "SE"))

    def n_verticals(self) -> int:
        return sum(1 for k in self.kinds if k in ("N", "S"))


def build_geodesic(traj: Trajectory, end: tuple[int, int]) -> GeodesicPath:
    """Backward construction of the canonical geodesic to ``end``.

    Depends only on the particle record; raises :class:`WindowError`
    whenever a needed site falls outside the trajectory window (the
    caller should rerun with a wider strip rather than guess).
    """
    n, j_end = int(end[0]), int(end[1])
    if not 1 <= n <= traj.n_steps:
        raise WindowError(f"end column {n} outside trajectory times 0..{traj.n_steps}")
    occ = traj.to_bool()
    lo, hi = traj.window_lo, traj.window_hi

    def is_occ(t: int, j: int) -> bool:
        if not lo <= j <= hi:
            raise WindowError(f"site {j} needed at time {t} outside window [{lo}, {hi}]")
        return bool(occ[t, j - lo])

    if not lo <= j_end <= hi:
        raise WindowError(f"end row {j_end} outside window [{lo}, {hi}]")

    # initial vertical scan: find the final-column vertex just above a
    # particle and just below a hole (zero steps if end already is one)
    j = j_end
    if is_occ(n, j):
        while is_occ(n, j + 1):
            j += 1
    else:
        while not is_occ(n, j):
            j -= 1
    if is_occ(n, j + 1):
        raise AssertionError("vertical scan must stop below a hole")

    kinds_rev: list[str] = []
    col, row = n, j
    for i in range(n, 0, -1):
        below = is_occ(i - 1, row)
        above = is_occ(i - 1, row + 1)
        case_jump = not below
        case_vacated = below and above
        case_stay = below and not above
        if case_jump + case_vacated + case_stay != 1:
            raise AssertionError(f"backward cases not exclusive at column {i}")
        if case_jump:
            # tracked particle arrived from one site down: down-left diagonal
            if not is_occ(i - 1, row - 1):
                raise AssertionError(f"no particle source below at column {i}")
            kinds_rev.append("NE")
            row -= 1
        elif case_vacated:
            # the particle one rank up just left: up-left diagonal
            if is_occ(i - 1, row + 2):
                raise AssertionError(f"vacating particle had no room at column {i}")
            kinds_rev.append("SE")
            row += 1
        else:
            # nothing moved here, so the horizontal edge is open
            kinds_rev.append("E")
        col -= 1
        if not (is_occ(col, row) and not is_occ(col, row + 1)):
            raise AssertionError(f"path invariant broken at column {col}")
    if (col, row) != (0, 0):
        raise AssertionError(f"backward walk ended at ({col}, {row}), not the origin")

    kinds = list(reversed(kinds_rev))
    n_vert = abs(j_end - j)
    kinds.extend(["N" if j_end > j else "S"] * n_vert)
    vertices = np.empty((len(kinds) + 1, 2), dtype=np.int64)
    vertices[0] = (0, 0)
    for idx, kind in enumerate(kinds):
        dx, dy = _STEP_DELTA[kind]
        vertices[idx + 1, 0] = vertices[idx, 0] + dx
        vertices[idx + 1, 1] = vertices[idx, 1] + dy
    weight = sum(_STEP_WEIGHT[k] for k in kinds)
    vertices.setflags(write=False)
    path = GeodesicPath(vertices, tuple(kinds), weight)
    if path.end != (n, j_end):
        raise AssertionError(f"path ends at {path.end}, expected ({n}, {j_end})")
    return path


Edge = tuple[str, int, int]  # ('h', x, y): (x,y)-(x+1,y); ('v', x, y): (x,y)-(x,y+1)


def _edge_between(a: tuple[int, int], b: tuple[int, int]) -> Edge:
    (x1, y1), (x2, y2) = a, b
    if (abs(x1 - x2), abs(y1 - y2)) not in ((1, 0), (0, 1)):
        raise ValueError(f"{a} and {b} are not unit-adjacent")
    if x1 != x2:
        return ("h", min(x1, x2), y1)
    return ("v", x1, min(y1, y2))


def _edge_vertices(edge: Edge) -> tuple[tuple[int, int], tuple[int, int]]:
    kind, x, y = edge
    return ((x, y), (x + 1, y)) if kind == "h" else ((x, y), (x, y + 1))


@dataclass(frozen=True)
class ModifiedPath:
    """The geodesic rewritten on unit edges only, same endpoints and length.

    Markers per edge: 'H' horizontal kept from the geodesic, 'V' vertical
    kept from the geodesic, 'D' introduced by a diagonal replacement.
    The candidate set K is all 'V' and 'D' edges.
    """

    vertices: np.ndarray = field(repr=False)  # (L+1, 2) int64
    markers: tuple[str, ...] = ()
    source_weight: int = 0

    def __post_init__(self):
        if self.vertices.shape[0] != len(self.markers) + 1:
            raise ValueError("one marker per edge required")
        if len(self.markers) != self.source_weight:
            raise ValueError("rewriting must preserve the source path length")

    @property
    def unit_length(self) -> int:
        return len(self.markers)

    @property
    def end(self) -> tuple[int, int]:
        return (int(self.vertices[-1, 0]), int(self.vertices[-1, 1]))

    def edges(self) -> list[Edge]:
        return [
            _edge_between(tuple(self.vertices[i]), tuple(self.vertices[i + 1]))
            for i in range(self.unit_length)
        ]

    def k_edges(self) -> list[Edge]:
        """Candidate edges: geodesic verticals plus diagonal replacements."""
        es = self.edges()
        out = [e for e, m in zip(es, self.markers) if m in ("V", "D")]
        if len(set(out)) != len(out):
            raise AssertionError("candidate edges must be distinct")
        return out


def eliminate_diagonals(path: GeodesicPath) -> ModifiedPath:
    """Replace each diagonal by its vertical-then-horizontal pair."""
    verts: list[tuple[int, int]] = [(0, 0)]
    markers: list[str] = []
    for idx, kind in enumerate(path.kinds):
        x, y = verts[-1]
        if kind == "E":
            verts.append((x + 1, y))
            markers.append("H")
        elif kind in ("N", "S"):
            dy = 1 if kind == "N" else -1
            verts.append((x, y + dy))
            markers.append("V")
        else:
            dy = 1 if kind == "NE" else -1
            verts.append((x, y + dy))
            verts.append((x + 1, y + dy))
            markers.extend(["D", "D"])
    arr = np.array(verts, dtype=np.int64)
    arr.setflags(write=False)
    out = ModifiedPath(arr, tuple(markers), path.total_weight)
    if out.end != path.end:
        raise AssertionError("diagonal elimination moved an endpoint")
    return out


@dataclass(frozen=True)
class EdgeClassification:
    """Horizontal-edge classes conditional on the particle record.

    Edge (i, j)->(i+1, j) is read by the dynamics only when site j holds a
    particle with a hole above it at time i; it is then forced closed if
    the particle jumped and forced open if it stayed.  Every other
    horizontal edge, and every vertical edge, is unbiased.
    """

    site_lo: int
    cls: np.ndarray = field(repr=False)  # (n_cols, n_sites) int8

    @property
    def n_cols(self) -> int:
        return self.cls.shape[0]

    def of(self, i: int, j: int) -> int:
        off = j - self.site_lo
        if not (0 <= i < self.cls.shape[0] and 0 <= off < self.cls.shape[1]):
            raise WindowError(f"edge ({i}, {j}) outside classified region")
        return int(self.cls[i, off])

    def counts(self) -> tuple[int, int, int]:
        flat = self.cls.ravel()
        return (
            int(np.count_nonzero(flat == UNBIASED)),
            int(np.count_nonzero(flat == FORCED_OPEN)),
            int(np.count_nonzero(flat == FORCED_CLOSED)),
        )


def classify_edges(traj: Trajectory, config: CrossConfig) -> EdgeClassification:
    """Classify horizontal edges as unbiased / forced-open / forced-closed.

    Raises ``ValueError`` when the record cannot have come from the
    configuration (a forced state contradicting the stored edge state).
    """
    n = config.n_cols
    if traj.n_steps < n:
        raise WindowError(f"trajectory covers {traj.n_steps} steps, need {n}")
    occ = traj.to_bool()
    movers = occ[:n, :-1] & ~occ[:n, 1:]
    jumped = movers & ~occ[1 : n + 1, :-1]
    cls = np.zeros(movers.shape, dtype=np.int8)
    cls[movers & jumped] = FORCED_CLOSED
    cls[movers & ~jumped] = FORCED_OPEN

    off = traj.window_lo - config.row_lo
    if off < 0 or traj.window_hi - 1 > config.row_hi:
        raise ValueError("trajectory window not contained in the configuration")
    h = config.h_open[:, off : off + cls.shape[1]]
    if np.any((cls == FORCED_OPEN) & ~h) or np.any((cls == FORCED_CLOSED) & h):
        raise ValueError("trajectory inconsistent with configuration edge states")
    cls.setflags(write=False)
    return EdgeClassification(traj.window_lo, cls)


def resample_unbiased(
    config: CrossConfig, classification: EdgeClassification, rng: np.random.Generator
) -> CrossConfig:
    """Fresh Bernoulli(1-eps) states on unbiased classified edges, forced
    and unclassified edges pinned.  Re-extracting particles from the
    result must reproduce the original record exactly.
    """
    h = np.array(config.h_open)
    off = classification.site_lo - config.row_lo
    n_sites = classification.cls.shape[1]
    region = h[:, off : off + n_sites]
    fresh = rng.random(region.shape) >= config.eps
    unbiased = classification.cls == UNBIASED
    region[unbiased] = fresh[unbiased]
    h.setflags(write=False)
    return CrossConfig(config.n_cols, config.row_lo, config.row_hi, config.eps, h, None)


def _dual_endpoints(edge: Edge) -> tuple[tuple[int, int], tuple[int, int]]:
    # plaquette (i, j) stands for the dual vertex at (i+1/2, j+1/2)
    kind, x, y = edge
    if kind == "h":
        return ((x, y - 1), (x, y))
    return ((x - 1, y), (x, y))


def _incident_edges(plaq: tuple[int, int]) -> tuple[Edge, Edge, Edge, Edge]:
    i, j = plaq
    return (("h", i, j), ("h", i, j + 1), ("v", i, j), ("v", i + 1, j))


def _dual_neighbors(edge: Edge) -> list[Edge]:
    out = []
    for plaq in _dual_endpoints(edge):
        for nb in _incident_edges(plaq):
            if nb != edge:
                out.append(nb)
    return out


def _edge_state(config: BondConfig, edge: Edge):
    """Open/closed state, or None when the edge leaves the sampled box."""
    kind, x, y = edge
    xi = x - config.col_lo
    yi = y - config.row_lo
    w, hh = config.shape
    if kind == "h":
        if 0 <= xi < w - 1 and 0 <= yi < hh:
            return bool(config.h_open[xi, yi])
    else:
        if 0 <= xi < w and 0 <= yi < hh - 1:
            return bool(config.v_open[xi, yi])
    return None


@dataclass(frozen=True)
class DualComponent:
    """One closed dual cluster with its open-edge boundary."""

    key: Edge
    edges: frozenset
    boundary: frozenset
    escaped: bool


@dataclass(frozen=True)
class DualClusterSet:
    """Closed dual clusters of the bad edges, deduplicated, with the
    union of their open boundaries."""

    components: tuple[DualComponent, ...]
    component_of: dict
    boundary_union: frozenset
    escaped: bool

    def component_for(self, edge: Edge) -> DualComponent:
        return self.components[self.component_of[edge]]


def dual_clusters(config: BondConfig, bad_edges: list[Edge]) -> DualClusterSet:
    """Explore the closed dual component of each bad edge.

    Components shared by several bad edges are stored once (canonical key
    = minimal edge).  A component touching the box boundary is flagged
    escaped; such samples are discarded for statistics.
    """
    components: list[DualComponent] = []
    component_of: dict[Edge, int] = {}
    membership: dict[Edge, int] = {}
    for e in bad_edges:
        state = _edge_state(config, e)
        if state is None:
            raise ValueError(f"bad edge {e} outside the sampled box")
        if state:
            raise ValueError(f"bad edge {e} is open")
        if e in membership:
            component_of[e] = membership[e]
            continue
        edges = {e}
        boundary: set[Edge] = set()
        escaped = False
        frontier = deque([e])
        while frontier:
            cur = frontier.popleft()
            for nb in _dual_neighbors(cur):
                st = _edge_state(config, nb)
                if st is None:
                    escaped = True
                elif st:
                    boundary.add(nb)
                elif nb not in edges:
                    edges.add(nb)
                    frontier.append(nb)
        if len(boundary) > 6 * len(edges):
            raise AssertionError("boundary larger than six times the cluster")
        idx = len(components)
        components.append(
            DualComponent(min(edges), frozenset(edges), frozenset(boundary), escaped)
        )
        for member in edges:
            membership[member] = idx
        component_of[e] = idx
    boundary_union: set[Edge] = set()
    for comp in components:
        boundary_union |= comp.boundary
    return DualClusterSet(
        tuple(components),
        component_of,
        frozenset(boundary_union),
        any(c.escaped for c in components),
    )


def bad_edges_of(modified: ModifiedPath, config: BondConfig) -> list[Edge]:
    """Closed edges of the rewritten path; always a subset of K."""
    k_set = set(modified.k_edges())
    bad = []
    for e in modified.edges():
        state = _edge_state(config, e)
        if state is None:
            raise ValueError(f"path edge {e} outside the sampled box")
        if not state:
            if e not in k_set:
                raise AssertionError(f"closed path edge {e} outside the candidate set")
            bad.append(e)
    return bad


@dataclass(frozen=True)
class BypassResult:
    status: str
    vertices: np.ndarray | None = None

    @property
    def length(self) -> int:
        return -1 if self.vertices is None else self.vertices.shape[0] - 1


def bypass(
    modified: ModifiedPath, clusters: DualClusterSet, config: BondConfig
) -> BypassResult:
    """Open path from the origin to the path end inside (open path edges)
    union (cluster boundaries), by breadth-first search.

    Existence is guaranteed whenever the endpoints are truly connected in
    the open graph and no cluster escaped the box; both failure modes are
    reported distinctly, never raised.
    """
    if clusters.escaped:
        return BypassResult(BYPASS_ESCAPED)
    allowed: set[Edge] = set(clusters.boundary_union)
    for e in modified.edges():
        if _edge_state(config, e):
            allowed.add(e)
    adj: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for e in allowed:
        state = _edge_state(config, e)
        if not state:
            raise AssertionError(f"restricted search fed a non-open edge {e}")
        a, b = _edge_vertices(e)
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    src = (0, 0)
    dst = modified.end
    if src not in adj:
        return BypassResult(BYPASS_DISCONNECTED)
    prev: dict[tuple[int, int], tuple[int, int]] = {src: src}
    queue = deque([src])
    while queue:
        u = queue.popleft()
        if u == dst:
            break
        for v in adj.get(u, ()):
            if v not in prev:
                prev[v] = u
                queue.append(v)
    if dst not in prev:
        return BypassResult(BYPASS_DISCONNECTED)
    chain = [dst]
    while chain[-1] != src:
        chain.append(prev[chain[-1]])
    chain.reverse()
    verts = np.array(chain, dtype=np.int64)
    verts.setflags(write=False)
    result = BypassResult(BYPASS_OK, verts)
    if result.length > modified.unit_length + len(clusters.boundary_union):
        raise AssertionError("bypass longer than path plus boundary budget")
    for i in range(result.length):
        e = _edge_between(tuple(verts[i]), tuple(verts[i + 1]))
        if e not in allowed:
            raise AssertionError(f"bypass used an edge outside the allowed set: {e}")
    return result


def bound_statistics(records: list[dict], min_runs: int = 30) -> dict:
    """Seed-averaged candidate/bad-edge/boundary sizes with standard errors.

    Escaped samples are excluded; their rate is reported.
    """
    if len(records) < min_runs:
        raise ValueError(f"need at least {min_runs} runs, got {len(records)}")
    used = [r for r in records if not r["escaped"]]
    if not used:
        raise ValueError("every sample escaped; enlarge the box")

    def mean_se(key: str) -> tuple[float, float]:
        vals = np.array([r[key] for r in used], dtype=np.float64)
        se = vals.std(ddof=1) / np.sqrt(len(vals)) if len(vals) > 1 else 0.0
        return float(vals.mean()), float(se)

    mean_k, se_k = mean_se("k")
    mean_b, se_b = mean_se("b")
    mean_bd, se_bd = mean_se("boundary")
    return {
        "n_used": len(used),
        "escape_rate": 1.0 - len(used) / len(records),
        "mean_k": mean_k,
        "se_k": se_k,
        "mean_b": mean_b,
        "se_b": se_b,
        "mean_boundary": mean_bd,
        "se_boundary": se_bd,
    }
