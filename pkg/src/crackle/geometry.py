"""Geometric graphs, connected components, minimum enclosing balls, Čech complexes.

All thresholds are closed: an edge joins x and y when |x - y| <= r, and a set of
points spans a Čech simplex when its minimum enclosing ball has radius <= r/2.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import ParameterError

# product of cell occupancies above which a cell pair is resolved with a kd-tree
_DENSE_PAIR = 2048


@dataclass(frozen=True, eq=False)
class GeometricGraph:
    num_vertices: int
    edges: np.ndarray  # (m, 2) int array, i < j, lexicographically sorted
    radius: float
    component_labels: np.ndarray

    @property
    def num_components(self) -> int:
        return int(self.component_labels.max()) + 1 if self.num_vertices else 0

    def adjacency(self) -> list[set[int]]:
        adj = [set() for _ in range(self.num_vertices)]
        for i, j in self.edges:
            adj[i].add(int(j))
            adj[j].add(int(i))
        return adj


@dataclass(frozen=True, eq=False)
class SimplicialComplex:
    simplices_by_dim: list[list[tuple[int, ...]]]
    max_dim: int

    def count(self, p: int) -> int:
        return len(self.simplices_by_dim[p]) if p < len(self.simplices_by_dim) else 0

    def euler_characteristic(self) -> int:
        return sum((-1) ** p * len(s) for p, s in enumerate(self.simplices_by_dim))


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.size == 0:
        return pts.reshape(0, pts.shape[-1] if pts.ndim == 2 else 1)
    return pts


def _labels_from_edges(n: int, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Component labels numbered in order of each component's smallest vertex."""
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    graph = coo_matrix((np.ones(len(i), dtype=np.int8), (i, j)), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    return labels.astype(np.int64)


# ------------------------------------------------------------------ cell machinery


def _cell_table(points: np.ndarray, side: float):
    """Bucket points into cubic cells.

    Returns (order, keys, starts, counts): ``points[order]`` is grouped by cell,
    ``keys`` holds the sorted unique integer cell coordinates and the block of
    cell c is ``order[starts[c]:starts[c] + counts[c]]``.
    """
    cells = np.floor(points / side).astype(np.int64)
    keys, inverse, counts = np.unique(cells, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    order = np.argsort(inverse, kind="stable")
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    return order, keys, starts, counts


def _as_records(keys: np.ndarray) -> np.ndarray:
    d = keys.shape[1]
    dtype = np.dtype([(f"c{i}", np.int64) for i in range(d)])
    return np.ascontiguousarray(keys).view(dtype).reshape(-1)


def _half_offsets(reach: int, d: int, keep) -> np.ndarray:
    """Lexicographically positive integer offsets in [-reach, reach]^d passing ``keep``."""
    out = [o for o in itertools.product(range(-reach, reach + 1), repeat=d)
           if any(o) and next(x for x in o if x) > 0 and keep(o)]
    return np.array(out, dtype=np.int64).reshape(-1, d)


def _neighbor_cell_pairs(keys: np.ndarray, offsets: np.ndarray):
    """All pairs (a, b) of occupied cells with keys[b] - keys[a] in offsets."""
    records = _as_records(keys)
    src, dst = [], []
    for off in offsets:
        target = _as_records(keys + off)
        pos = np.searchsorted(records, target)
        pos_c = np.minimum(pos, len(records) - 1)
        hit = (pos < len(records)) & (records[pos_c] == target)
        src.append(np.nonzero(hit)[0])
        dst.append(pos_c[hit])
    if not src:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    return np.concatenate(src), np.concatenate(dst)


def _expand_block_pairs(a, b, starts, counts, order):
    """Every (point in cell a, point in cell b) pair for the given cell pairs."""
    ca, cb = counts[a], counts[b]
    sizes = ca * cb
    total = int(sizes.sum())
    if total == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    block = np.repeat(np.arange(len(a)), sizes)
    first = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    j = np.arange(total) - first[block]
    cbb = cb[block]
    pi = order[starts[a][block] + j // cbb]
    pj = order[starts[b][block] + j % cbb]
    return pi, pj


# ------------------------------------------------------------------ graphs


def brute_force_edges(points, r: float) -> np.ndarray:
    """O(n^2) reference edge list."""
    pts = _as_points(points)
    n = len(pts)
    if n < 2:
        return np.zeros((0, 2), dtype=np.int64)
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    i, j = np.nonzero(np.triu(d2 <= r * r, k=1))
    return np.column_stack([i, j]).astype(np.int64)


def build_geometric_graph(points, r: float) -> GeometricGraph:
    """Graph with an edge between every pair of points at distance <= r.

    Points are bucketed into cells of side r, so each point only inspects the
    3^d surrounding cells.
    """
    if not r > 0:
        raise ParameterError(f"radius must be positive, got {r}")
    pts = _as_points(points)
    n, d = pts.shape
    if n < 2:
        return GeometricGraph(n, np.zeros((0, 2), np.int64), float(r), np.arange(n, dtype=np.int64))
    order, keys, starts, counts = _cell_table(pts, r)
    same = np.arange(len(keys))
    a, b = _neighbor_cell_pairs(keys, _half_offsets(1, d, lambda o: True))
    # pairs inside one cell
    pi, pj = _expand_block_pairs(same, same, starts, counts, order)
    keep = pi < pj
    qi, qj = _expand_block_pairs(a, b, starts, counts, order)
    pi = np.concatenate([pi[keep], qi])
    pj = np.concatenate([pj[keep], qj])
    close = ((pts[pi] - pts[pj]) ** 2).sum(-1) <= r * r
    lo = np.minimum(pi[close], pj[close])
    hi = np.maximum(pi[close], pj[close])
    edges = np.column_stack([lo, hi])
    edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))] if len(edges) else edges.reshape(0, 2)
    labels = _labels_from_edges(n, edges[:, 0], edges[:, 1])
    return GeometricGraph(n, edges.astype(np.int64), float(r), labels)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, x: int, y: int) -> bool:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return False
        if rx > ry:
            rx, ry = ry, rx
        self.parent[ry] = rx
        return True


def component_labels(points, r: float) -> np.ndarray:
    """Connected-component labels of G(points, r) without materialising every edge.

    In d = 1 the sorted points split wherever a gap exceeds r. Otherwise points
    are bucketed into cells of side r/sqrt(d), so each cell is a clique and only
    cell pairs whose closest corners lie within r need a distance check. Sparse
    cell pairs are checked exhaustively; dense ones by a kd-tree query, skipped
    when the two cells are already joined.
    """
    if not r > 0:
        raise ParameterError(f"radius must be positive, got {r}")
    pts = _as_points(points)
    n, d = pts.shape
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    if d == 1:
        order = np.argsort(pts[:, 0], kind="stable")
        gaps = np.diff(pts[order, 0]) > r
        run = np.concatenate([[0], np.cumsum(gaps)])
        raw = np.empty(n, dtype=np.int64)
        raw[order] = run
        return _relabel_by_first(raw)
    side = r / math.sqrt(d)
    order, keys, starts, counts = _cell_table(pts, side)
    reach = int(math.ceil(math.sqrt(d))) + 1
    offsets = _half_offsets(reach, d, lambda o: sum(max(abs(x) - 1, 0) ** 2 for x in o) <= d)
    a, b = _neighbor_cell_pairs(keys, offsets)
    prod = counts[a] * counts[b]
    sparse = prod <= _DENSE_PAIR
    pi, pj = _expand_block_pairs(a[sparse], b[sparse], starts, counts, order)
    close = ((pts[pi] - pts[pj]) ** 2).sum(-1) <= r * r
    # cell members are chained to the first member of their cell
    first = order[np.repeat(starts, counts)]
    ei = np.concatenate([pi[close], first])
    ej = np.concatenate([pj[close], order])
    labels = _labels_from_edges(n, ei, ej)
    dense = np.nonzero(~sparse)[0]
    if len(dense):
        uf = _UnionFind(int(labels.max()) + 1)
        trees: dict[int, cKDTree] = {}
        for idx in dense[np.argsort(-prod[dense], kind="stable")]:
            ca, cb = int(a[idx]), int(b[idx])
            block_a = order[starts[ca]:starts[ca] + counts[ca]]
            block_b = order[starts[cb]:starts[cb] + counts[cb]]
            la, lb = labels[block_a[0]], labels[block_b[0]]
            if uf.find(la) == uf.find(lb):
                continue
            if counts[ca] < counts[cb]:
                ca, cb, block_a, block_b = cb, ca, block_b, block_a
            tree = trees.get(ca)
            if tree is None:
                tree = trees[ca] = cKDTree(pts[block_a])
            dist, _ = tree.query(pts[block_b], k=1, distance_upper_bound=r * (1 + 1e-12))
            if np.any(dist <= r):
                # confirm with exact arithmetic on the nearest candidates
                hit = block_b[np.isfinite(dist)]
                d2 = ((pts[hit][:, None, :] - pts[block_a][None, :, :]) ** 2).sum(-1)
                if np.any(d2 <= r * r):
                    uf.union(la, lb)
        roots = np.array([uf.find(x) for x in range(len(uf.parent))])
        labels = roots[labels]
    return _relabel_by_first(labels)


def _relabel_by_first(raw: np.ndarray) -> np.ndarray:
    """Renumber labels 0..m-1 in order of each component's smallest index."""
    _, first, inverse = np.unique(raw, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[inverse.reshape(-1)]


def components_of_size(labels: np.ndarray, k: int) -> list[np.ndarray]:
    """Index arrays of all components with exactly k members, ordered by smallest index."""
    if len(labels) == 0:
        return []
    sizes = np.bincount(labels)
    wanted = np.nonzero(sizes == k)[0]
    if len(wanted) == 0:
        return []
    mask = np.isin(labels, wanted)
    idx = np.nonzero(mask)[0]
    idx = idx[np.argsort(labels[idx], kind="stable")]
    return list(idx.reshape(-1, k))


def isolated_components_of_size(cloud, r: float, k: int) -> list[tuple[int, ...]]:
    """Connected components of G(cloud, r) with exactly k points, as sorted index tuples."""
    if k < 1:
        raise ParameterError(f"component size must be >= 1, got {k}")
    pts = cloud.points if hasattr(cloud, "points") else _as_points(cloud)
    labels = component_labels(pts, r)
    return [tuple(int(i) for i in comp) for comp in components_of_size(labels, k)]


# ------------------------------------------------------------------ enclosing balls


def _circumball(boundary: list[np.ndarray]) -> tuple[np.ndarray, float]:
    """Smallest ball with all boundary points on its surface (centre in their affine hull)."""
    p0 = boundary[0]
    if len(boundary) == 1:
        return p0.copy(), 0.0
    A = np.array([p - p0 for p in boundary[1:]])
    rhs = 0.5 * (A * A).sum(axis=1)
    gram = A @ A.T
    try:
        lam = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        lam = np.linalg.lstsq(gram, rhs, rcond=None)[0]
    center = p0 + lam @ A
    radius = max(float(np.linalg.norm(p - center)) for p in boundary)
    return center, radius


def _inside(p: np.ndarray, center: np.ndarray, radius: float) -> bool:
    return float(np.linalg.norm(p - center)) <= radius * (1 + 1e-12) + 1e-14


def _welzl(pts: list[np.ndarray], end: int, boundary: list[np.ndarray], d: int):
    # move-to-front: a point found outside is pushed to the front for later calls
    if boundary:
        center, radius = _circumball(boundary)
    else:
        center, radius = pts[0].copy(), 0.0
        if end == 0:
            return center, -1.0
    if len(boundary) == d + 1:
        return center, radius
    i = 0
    while i < end:
        p = pts[i]
        if radius < 0 or not _inside(p, center, radius):
            center, radius = _welzl(pts, i, boundary + [p], d)
            pts.insert(0, pts.pop(i))
        i += 1
    return center, radius


def min_enclosing_ball(points) -> tuple[np.ndarray, float]:
    """Exact smallest enclosing ball (Welzl's move-to-front recursion).

    Duplicate points are removed first. Intended for small inputs (tens of points).
    """
    pts = _as_points(points)
    if len(pts) == 0:
        raise ParameterError("need at least one point")
    unique = np.unique(pts, axis=0)
    d = pts.shape[1]
    work = [p for p in unique]
    center, radius = _welzl(work, len(work), [], d)
    radius = max(radius, 0.0)
    # the enclosing radius is the farthest input point from the centre
    radius = float(np.sqrt(((unique - center) ** 2).sum(axis=1).max()))
    return center, radius


def cech_complex(points, r: float, max_dim: int) -> SimplicialComplex:
    """Čech complex: a simplex is present iff its minimum enclosing ball has radius <= r/2.

    Candidates are grown one vertex at a time from cliques of the geometric
    graph at threshold r; a candidate is kept only when all its facets are
    already present, which keeps the result downward closed.
    """
    if not r > 0:
        raise ParameterError(f"radius must be positive, got {r}")
    if max_dim < 0:
        raise ParameterError(f"max_dim must be >= 0, got {max_dim}")
    pts = _as_points(points)
    n = len(pts)
    levels: list[list[tuple[int, ...]]] = [[(i,) for i in range(n)]]
    if max_dim == 0 or n == 0:
        return SimplicialComplex(levels, max_dim)
    graph = build_geometric_graph(pts, r)
    adj = graph.adjacency()
    levels.append([tuple(int(v) for v in e) for e in graph.edges])
    half = r / 2
    for p in range(2, max_dim + 1):
        prev = set(levels[-1])
        nxt = []
        for sigma in levels[-1]:
            common = set.intersection(*(adj[v] for v in sigma))
            for v in sorted(u for u in common if u > sigma[-1]):
                cand = sigma + (v,)
                if any(cand[:i] + cand[i + 1:] not in prev for i in range(len(cand) - 1)):
                    continue
                if min_enclosing_ball(pts[list(cand)])[1] <= half:
                    nxt.append(cand)
        if not nxt:
            levels.append([])
            break
        levels.append(sorted(nxt))
    while len(levels) > 1 and not levels[-1]:
        levels.pop()
    return SimplicialComplex(levels, max_dim)
