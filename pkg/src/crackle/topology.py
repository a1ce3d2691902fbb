"""GF(2) Betti numbers, small-graph isomorphism and the geometric indicators h."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, StructureError
from .geometry import SimplicialComplex, build_geometric_graph, cech_complex

MAX_ISO_VERTICES = 8


@dataclass(frozen=True)
class BettiVector:
    betti: tuple[int, ...]

    def __getitem__(self, p: int) -> int:
        return self.betti[p] if p < len(self.betti) else 0

    def __len__(self) -> int:
        return len(self.betti)

    def euler_characteristic(self) -> int:
        return sum((-1) ** p * b for p, b in enumerate(self.betti))


# ------------------------------------------------------------------ homology


def _gf2_rank(columns: list[int]) -> int:
    """Rank over GF(2) of a matrix given as integer bitmask columns."""
    pivots: dict[int, int] = {}
    rank = 0
    for col in columns:
        while col:
            low = col.bit_length() - 1
            other = pivots.get(low)
            if other is None:
                pivots[low] = col
                rank += 1
                break
            col ^= other
    return rank


def boundary_rank(faces: list[tuple[int, ...]], simplices: list[tuple[int, ...]]) -> int:
    """Rank of the boundary map from ``simplices`` onto ``faces`` over GF(2)."""
    if not simplices or not faces:
        return 0
    index = {f: i for i, f in enumerate(faces)}
    cols = []
    for s in simplices:
        mask = 0
        for i in range(len(s)):
            face = s[:i] + s[i + 1:]
            pos = index.get(face)
            if pos is None:
                raise StructureError(f"face {face} of simplex {s} is missing")
            mask |= 1 << pos
        cols.append(mask)
    return _gf2_rank(cols)


def betti_numbers(complex_: SimplicialComplex, max_dim: int | None = None) -> BettiVector:
    """beta_p = S_p - rank d_p - rank d_{p+1} for p = 0..max_dim.

    Simplices above ``max_dim + 1`` are ignored; if the complex stops at
    ``max_dim`` the top boundary is treated as zero.
    """
    levels = complex_.simplices_by_dim
    if max_dim is None:
        max_dim = complex_.max_dim
    for p, simplices in enumerate(levels):
        for s in simplices:
            if len(s) != p + 1 or any(a >= b for a, b in zip(s, s[1:])):
                raise StructureError(f"simplex {s} stored at dimension {p} is not a strictly increasing {p + 1}-tuple")
    ranks = [0]
    for p in range(1, max_dim + 2):
        if p < len(levels):
            ranks.append(boundary_rank(levels[p - 1], levels[p]))
        else:
            ranks.append(0)
    if len(levels) == 0 or len(levels[0]) == 0:
        return BettiVector(tuple(0 for _ in range(max_dim + 1)))
    betti = []
    for p in range(max_dim + 1):
        count = len(levels[p]) if p < len(levels) else 0
        betti.append(count - ranks[p] - ranks[p + 1])
    return BettiVector(tuple(betti))


# ------------------------------------------------------------------ small graphs


@dataclass(frozen=True)
class SmallGraph:
    """Undirected simple graph on vertices 0..num_vertices-1."""

    num_vertices: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        norm = frozenset(tuple(sorted((int(a), int(b)))) for a, b in self.edges)
        if any(a == b or not (0 <= a < self.num_vertices and 0 <= b < self.num_vertices) for a, b in norm):
            raise StructureError("edge endpoints must be distinct vertices of the graph")
        object.__setattr__(self, "edges", norm)

    @classmethod
    def from_edges(cls, num_vertices: int, edges) -> "SmallGraph":
        return cls(num_vertices, frozenset(map(tuple, edges)))

    def neighbours(self) -> list[set[int]]:
        adj = [set() for _ in range(self.num_vertices)]
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj

    def is_connected(self) -> bool:
        if self.num_vertices == 0:
            return True
        adj = self.neighbours()
        seen = {0}
        stack = [0]
        while stack:
            for w in adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == self.num_vertices


def path_graph(k: int) -> SmallGraph:
    return SmallGraph.from_edges(k, [(i, i + 1) for i in range(k - 1)])


def complete_graph(k: int) -> SmallGraph:
    return SmallGraph.from_edges(k, itertools.combinations(range(k), 2))


def cycle_graph(k: int) -> SmallGraph:
    return SmallGraph.from_edges(k, [(i, (i + 1) % k) for i in range(k)])


def star_graph(leaves: int) -> SmallGraph:
    return SmallGraph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def _as_small_graph(g) -> SmallGraph:
    if isinstance(g, SmallGraph):
        return g
    if hasattr(g, "num_vertices") and hasattr(g, "edges"):
        return SmallGraph.from_edges(g.num_vertices, [tuple(e) for e in np.asarray(g.edges).reshape(-1, 2)])
    n, edges = g
    return SmallGraph.from_edges(n, edges)


def graph_isomorphic(g1, g2) -> bool:
    """Exact isomorphism test by backtracking over degree-compatible vertex maps."""
    a, b = _as_small_graph(g1), _as_small_graph(g2)
    if max(a.num_vertices, b.num_vertices) > MAX_ISO_VERTICES:
        raise ParameterError(f"isomorphism is limited to graphs with at most {MAX_ISO_VERTICES} vertices")
    if a.num_vertices != b.num_vertices or len(a.edges) != len(b.edges):
        return False
    adj_a, adj_b = a.neighbours(), b.neighbours()
    deg_a = [len(s) for s in adj_a]
    deg_b = [len(s) for s in adj_b]
    if sorted(deg_a) != sorted(deg_b):
        return False
    n = a.num_vertices
    order = sorted(range(n), key=lambda v: -deg_a[v])
    mapping: dict[int, int] = {}
    used = [False] * n

    def extend(pos: int) -> bool:
        if pos == n:
            return True
        v = order[pos]
        for w in range(n):
            if used[w] or deg_b[w] != deg_a[v]:
                continue
            if all((mapping[u] in adj_b[w]) == (u in adj_a[v]) for u in mapping):
                mapping[v] = w
                used[w] = True
                if extend(pos + 1):
                    return True
                del mapping[v]
                used[w] = False
        return False

    return extend(0)


# ------------------------------------------------------------------ indicators


class ConstraintKind(str, enum.Enum):
    GAMMA_ISO = "gamma_iso"
    BETTI_CYCLE = "betti_cycle"
    CONNECTED = "connected"


@dataclass(frozen=True)
class ConstraintH:
    """A translation invariant indicator h on k-point configurations at unit scale."""

    kind: ConstraintKind
    tuple_size: int
    target: SmallGraph | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ConstraintKind(self.kind))
        if self.tuple_size < 1:
            raise ParameterError(f"tuple size must be >= 1, got {self.tuple_size}")
        if self.kind is ConstraintKind.GAMMA_ISO:
            if self.target is None or self.target.num_vertices != self.tuple_size:
                raise ParameterError("GammaIso needs a target graph on tuple_size vertices")
            if not self.target.is_connected():
                raise ParameterError("GammaIso target graph must be connected")
            if self.tuple_size > MAX_ISO_VERTICES:
                raise ParameterError(f"GammaIso targets are limited to {MAX_ISO_VERTICES} vertices")
        elif self.kind is ConstraintKind.BETTI_CYCLE and self.tuple_size < 2:
            raise ParameterError("BettiCycle needs tuple size >= 2")

    @property
    def proximity_M(self) -> float:
        return proximity_bound(self)

    def describe(self) -> dict:
        out = {"kind": self.kind.value, "tuple_size": self.tuple_size}
        if self.target is not None:
            out["target_edges"] = sorted(self.target.edges)
        return out


def connected(k: int) -> ConstraintH:
    return ConstraintH(ConstraintKind.CONNECTED, k)


def betti_cycle(k: int) -> ConstraintH:
    return ConstraintH(ConstraintKind.BETTI_CYCLE, k)


def gamma_iso(target: SmallGraph) -> ConstraintH:
    return ConstraintH(ConstraintKind.GAMMA_ISO, target.num_vertices, target)


def proximity_bound(constraint: ConstraintH) -> float:
    """A connected geometric graph on k points at unit radius has diameter <= k - 1.

    All three indicator kinds vanish on disconnected configurations, so the
    same bound applies to each.
    """
    return float(constraint.tuple_size - 1)


def _pairwise_close(points: np.ndarray, r: float) -> np.ndarray:
    d2 = ((points[:, None, :] - points[None, :, :]) ** 2).sum(-1)
    return d2 <= r * r


def _graph_code(close: np.ndarray) -> int:
    k = close.shape[0]
    code = 0
    for bit, (i, j) in enumerate(itertools.combinations(range(k), 2)):
        if close[i, j]:
            code |= 1 << bit
    return code


def _code_graph(code: int, k: int) -> SmallGraph:
    pairs = itertools.combinations(range(k), 2)
    return SmallGraph.from_edges(k, [p for bit, p in enumerate(pairs) if code >> bit & 1])


def evaluate_h(constraint: ConstraintH, points, r: float) -> int:
    """h(points / r) for the given indicator; returns 0 or 1."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    k = constraint.tuple_size
    if pts.shape[0] != k:
        raise ParameterError(f"indicator expects {k} points, got {pts.shape[0]}")
    return int(evaluate_h_batch(constraint, pts[None], r)[0])


def evaluate_h_batch(constraint: ConstraintH, configs: np.ndarray, r: float,
                     _cache: dict | None = None) -> np.ndarray:
    """Vectorised h over an array of configurations of shape (m, k, d)."""
    configs = np.asarray(configs, dtype=float)
    m, k, _ = configs.shape
    if k != constraint.tuple_size:
        raise ParameterError(f"indicator expects {constraint.tuple_size} points, got {k}")
    if k == 1:
        return np.ones(m, dtype=np.int8)
    pairs = list(itertools.combinations(range(k), 2))
    ii = np.array([p[0] for p in pairs])
    jj = np.array([p[1] for p in pairs])
    d2 = ((configs[:, ii, :] - configs[:, jj, :]) ** 2).sum(-1)
    bits = (d2 <= r * r).astype(np.int64)
    codes = (bits << np.arange(len(pairs), dtype=np.int64)).sum(axis=1)
    cache = {} if _cache is None else _cache
    uniq, inverse = np.unique(codes, return_inverse=True)
    per_code = np.empty(len(uniq), dtype=np.int8)
    for u, code in enumerate(uniq):
        key = (constraint.kind, int(code))
        val = cache.get(key)
        if val is None:
            g = _code_graph(int(code), k)
            if constraint.kind is ConstraintKind.GAMMA_ISO:
                val = int(graph_isomorphic(g, constraint.target))
            else:
                val = int(g.is_connected())
            cache[key] = val
        per_code[u] = val
    out = per_code[inverse.reshape(-1)]
    if constraint.kind is ConstraintKind.BETTI_CYCLE and k > 2:
        # disconnected k-point complexes cannot carry a (k-2)-cycle
        for idx in np.nonzero(out)[0]:
            cx = cech_complex(configs[idx], r, k - 1)
            out[idx] = int(betti_numbers(cx, k - 2)[k - 2] == 1)
    return out


def evaluate_h_tilde(points, r: float) -> int:
    """1 iff the Čech complex (equivalently the geometric graph) at scale r is connected."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if len(pts) == 0:
        return 0
    g = build_geometric_graph(pts, r)
    return int(g.num_components == 1)
