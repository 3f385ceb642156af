"""Log-domain graph functions and the structural operations on them.

A non-negative irreducible matrix ``A`` is represented by the weighted digraph
with an edge ``(i, j)`` of weight ``log|a_ij|`` for every non-zero entry.
Vertices are 0-based throughout the library.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np


class GraphError(ValueError):
    pass


class EmptyMatrix(GraphError):
    pass


class DimensionMismatch(GraphError):
    pass


class EdgeSetMismatch(GraphError):
    pass


class MatrixNotIrreducible(GraphError):
    def __init__(self, components):
        self.components = [sorted(c) for c in components]
        labels = ", ".join("{" + ",".join(str(v + 1) for v in c) + "}" for c in self.components)
        super().__init__(f"matrix is not irreducible; strongly connected components: {labels}")


class Digraph:
    """Immutable edge structure shared by every graph function on the same graph.

    Edges are stored sorted by ``(src, dst)`` so that neighbour scans visit the
    lowest-index neighbour first.
    """

    def __init__(self, n: int, src, dst):
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if n < 1:
            raise EmptyMatrix("graph needs at least one vertex")
        if src.shape != dst.shape:
            raise DimensionMismatch("src and dst differ in length")
        if src.size and (src.min() < 0 or dst.min() < 0 or src.max() >= n or dst.max() >= n):
            raise GraphError("edge endpoint out of range")
        keys = src * n + dst
        if np.unique(keys).size != keys.size:
            raise GraphError("duplicate edge")
        if np.any(keys[1:] < keys[:-1]):
            raise GraphError("edges must be sorted by (src, dst)")
        self.n = int(n)
        self.src = src
        self.dst = dst
        self.m = int(src.size)
        self.out_ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=self.out_ptr[1:])
        self.out_edges = np.arange(self.m, dtype=np.int64)
        self.in_edges = np.lexsort((src, dst)).astype(np.int64)
        self.in_ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(dst, minlength=n), out=self.in_ptr[1:])
        self.index = {(int(u), int(v)): k for k, (u, v) in enumerate(zip(src, dst))}
        for arr in (self.src, self.dst, self.out_ptr, self.out_edges, self.in_ptr, self.in_edges):
            arr.flags.writeable = False

    @cached_property
    def loops(self) -> np.ndarray:
        return self.src == self.dst

    def out_neighbors(self, v: int) -> np.ndarray:
        return self.dst[self.out_edges[self.out_ptr[v]:self.out_ptr[v + 1]]]

    def in_neighbors(self, v: int) -> np.ndarray:
        return self.src[self.in_edges[self.in_ptr[v]:self.in_ptr[v + 1]]]

    def same_edges(self, other: "Digraph") -> bool:
        return (self is other) or (
            self.n == other.n
            and self.m == other.m
            and np.array_equal(self.src, other.src)
            and np.array_equal(self.dst, other.dst)
        )

    @cached_property
    def transposed(self) -> tuple["Digraph", np.ndarray]:
        """Transpose graph and the permutation mapping its edges to ours."""
        order = np.lexsort((self.src, self.dst))
        return Digraph(self.n, self.dst[order], self.src[order]), order


@dataclass(frozen=True, eq=False)
class GraphFunction:
    """Finite real weights on the edges of a fixed digraph."""

    graph: Digraph
    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64)
        if w.shape != (self.graph.m,):
            raise DimensionMismatch(f"expected {self.graph.m} weights, got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise GraphError("edge weights must be finite")
        w.flags.writeable = False
        object.__setattr__(self, "w", w)

    @classmethod
    def from_edges(cls, n: int, edges) -> "GraphFunction":
        """Build from an iterable of ``(u, v, weight)`` triples, in any order."""
        triples = sorted((int(u), int(v), float(x)) for u, v, x in edges)
        src = [t[0] for t in triples]
        dst = [t[1] for t in triples]
        return cls(Digraph(n, src, dst), np.array([t[2] for t in triples], dtype=np.float64))

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def m(self) -> int:
        return self.graph.m

    @property
    def src(self) -> np.ndarray:
        return self.graph.src

    @property
    def dst(self) -> np.ndarray:
        return self.graph.dst

    def with_weights(self, w) -> "GraphFunction":
        return GraphFunction(self.graph, w)

    def weight(self, u: int, v: int) -> float:
        return float(self.w[self.graph.index[(u, v)]])

    def edges(self) -> list[tuple[int, int, float]]:
        return [(int(u), int(v), float(x)) for u, v, x in zip(self.src, self.dst, self.w)]

    def as_dict(self) -> dict[tuple[int, int], float]:
        return {(u, v): x for u, v, x in self.edges()}

    @cached_property
    def out_max(self) -> np.ndarray:
        return _segment_max(self.w, self.graph.out_edges, self.graph.out_ptr)

    @cached_property
    def in_max(self) -> np.ndarray:
        return _segment_max(self.w, self.graph.in_edges, self.graph.in_ptr)

    @property
    def rho_raise(self) -> np.ndarray:
        return np.maximum(0.0, self.out_max - self.in_max)

    @property
    def rho_lower(self) -> np.ndarray:
        return np.maximum(0.0, self.in_max - self.out_max)

    @property
    def rho_vertex(self) -> np.ndarray:
        return np.abs(self.out_max - self.in_max)

    def imbalance(self) -> float:
        return float(self.rho_vertex.max())

    def raising_imbalance(self) -> float:
        return float(self.rho_raise.max())

    def lowering_imbalance(self) -> float:
        return float(self.rho_lower.max())

    def scale(self) -> float:
        """Magnitude used to make tolerances relative: ``max(1, max|w|)``."""
        return max(1.0, float(np.abs(self.w).max())) if self.m else 1.0

    def transpose(self) -> "GraphFunction":
        tgraph, order = self.graph.transposed
        return GraphFunction(tgraph, self.w[order])

    def __repr__(self) -> str:
        return f"GraphFunction(n={self.n}, m={self.m})"


def _segment_max(w, order, ptr):
    out = np.full(ptr.size - 1, -np.inf)
    counts = np.diff(ptr)
    nonempty = counts > 0
    if w.size:
        red = np.maximum.reduceat(w[order], ptr[:-1][nonempty])
        out[nonempty] = red
    return out


@dataclass(frozen=True)
class VertexStats:
    out_max: float
    in_max: float
    rho: float
    rho_raise: float
    rho_lower: float


def vertex_stats(alpha: GraphFunction, v: int) -> VertexStats:
    if not 0 <= v < alpha.n:
        raise IndexError(f"vertex {v} out of range")
    out_m, in_m = float(alpha.out_max[v]), float(alpha.in_max[v])
    return VertexStats(
        out_max=out_m,
        in_max=in_m,
        rho=abs(out_m - in_m),
        rho_raise=max(0.0, out_m - in_m),
        rho_lower=max(0.0, in_m - out_m),
    )


def from_matrix(entries) -> GraphFunction:
    """Graph function of the magnitudes of a square real or complex matrix.

    Raises MatrixNotIrreducible when the non-zero pattern is not strongly
    connected.
    """
    a = np.asarray(entries)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n == 0:
        raise EmptyMatrix("matrix has no rows")
    mag = np.abs(a).astype(np.float64)
    src, dst = np.nonzero(mag)
    if src.size == 0:
        raise EmptyMatrix("matrix has no non-zero entries")
    alpha = GraphFunction(Digraph(n, src, dst), np.log(mag[src, dst]))
    ok, comps = is_irreducible(alpha)
    if not ok:
        raise MatrixNotIrreducible(comps)
    return alpha


def to_matrix(alpha: GraphFunction) -> np.ndarray:
    """Dense magnitude matrix ``exp(alpha)`` with zeros off the edge set."""
    a = np.zeros((alpha.n, alpha.n))
    a[alpha.src, alpha.dst] = np.exp(alpha.w)
    return a


def apply_scaling(entries, p) -> np.ndarray:
    """Similarity transform ``D^-1 A D`` with ``D = diag(exp(p))``."""
    a = np.asarray(entries)
    p = np.asarray(p, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or p.shape != (a.shape[0],):
        raise DimensionMismatch(f"matrix {a.shape} and scaling {p.shape} do not match")
    factor = np.exp(p[None, :] - p[:, None])
    np.fill_diagonal(factor, 1.0)
    return a * factor


def rescale(alpha: GraphFunction, p) -> GraphFunction:
    """Log-domain counterpart of ``apply_scaling``: ``w_uv + p_v - p_u``."""
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (alpha.n,):
        raise DimensionMismatch("scaling vector has the wrong length")
    return alpha.with_weights(alpha.w + p[alpha.dst] - p[alpha.src])


def shift(alpha: GraphFunction, S, x: float) -> GraphFunction:
    """``alpha`` shifted by ``x`` at the vertex set ``S``."""
    ind = np.zeros(alpha.n)
    ind[list(S)] = 1.0
    return alpha.with_weights(alpha.w + x * (ind[alpha.src] - ind[alpha.dst]))


def potential_difference(alpha: GraphFunction, gamma: GraphFunction):
    """Vertex potential ``p`` fitted to ``alpha - gamma`` along a spanning tree.

    Returns ``(p, residual)`` where ``residual`` is the largest violation of
    ``alpha_uv - gamma_uv = p_u - p_v`` over all edges.
    """
    if not alpha.graph.same_edges(gamma.graph):
        raise EdgeSetMismatch("graph functions live on different edge sets")
    g = alpha.graph
    d = alpha.w - gamma.w
    p = np.full(g.n, np.nan)
    for root in range(g.n):
        if not np.isnan(p[root]):
            continue
        p[root] = 0.0
        stack = [root]
        while stack:
            u = stack.pop()
            for k in range(g.out_ptr[u], g.out_ptr[u + 1]):
                e = g.out_edges[k]
                v = g.dst[e]
                if np.isnan(p[v]):
                    p[v] = p[u] - d[e]
                    stack.append(v)
            for k in range(g.in_ptr[u], g.in_ptr[u + 1]):
                e = g.in_edges[k]
                v = g.src[e]
                if np.isnan(p[v]):
                    p[v] = p[u] + d[e]
                    stack.append(v)
    resid = np.abs(d - (p[g.src] - p[g.dst]))
    return p, float(resid.max()) if resid.size else 0.0


def equivalent(alpha: GraphFunction, gamma: GraphFunction, tol: float = 1e-9) -> bool:
    """True iff the two functions have the same sum around every cycle (within ``tol``)."""
    try:
        _, resid = potential_difference(alpha, gamma)
    except EdgeSetMismatch:
        return False
    return resid <= tol


def strongly_connected_components(n: int, src, dst, vertices=None) -> list[list[int]]:
    """Tarjan's algorithm, iterative. Components come out in reverse topological order."""
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in zip(src, dst):
        adj[int(u)].append(int(v))
    todo = range(n) if vertices is None else vertices
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0
    for root in todo:
        if root in index:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, i = work[-1]
            if i < len(adj[v]):
                work[-1] = (v, i + 1)
                w = adj[v][i]
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, 0))
                elif w in on_stack:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                comps.append(sorted(comp))
    return comps


def is_irreducible(alpha: GraphFunction) -> tuple[bool, list[list[int]]]:
    comps = strongly_connected_components(alpha.n, alpha.src, alpha.dst)
    return len(comps) == 1, comps


@dataclass(frozen=True)
class ThresholdSubgraph:
    threshold: float
    vertices: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]

    def components(self) -> list[list[int]]:
        if not self.edges:
            return []
        src = [u for u, _ in self.edges]
        dst = [v for _, v in self.edges]
        n = max(self.vertices) + 1
        return strongly_connected_components(n, src, dst, vertices=self.vertices)

    def is_strongly_connected(self) -> bool:
        return len(self.components()) <= 1

    def issubset(self, other: "ThresholdSubgraph") -> bool:
        return set(self.edges) <= set(other.edges)


def threshold_subgraph(alpha: GraphFunction, w: float) -> ThresholdSubgraph:
    """Edges of weight at least ``w``, with isolated vertices dropped."""
    keep = alpha.w >= w
    src, dst = alpha.src[keep], alpha.dst[keep]
    verts = tuple(sorted(set(src.tolist()) | set(dst.tolist())))
    return ThresholdSubgraph(float(w), verts, tuple(zip(src.tolist(), dst.tolist())))


class Order(enum.Enum):
    LESS = "less"
    GREATER = "greater"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"


def compare_order(alpha: GraphFunction, gamma: GraphFunction) -> Order:
    """Compare by threshold subgraphs at the largest weight where they differ.

    Threshold subgraphs at ``w`` differ exactly on edges ``e`` with
    ``min(a_e, g_e) < w <= max(a_e, g_e)``, so the largest differing threshold
    is the largest ``max(a_e, g_e)`` over edges where the two disagree.
    """
    if not alpha.graph.same_edges(gamma.graph):
        raise EdgeSetMismatch("graph functions live on different edge sets")
    a, g = alpha.w, gamma.w
    diff = a != g
    if not diff.any():
        return Order.EQUAL
    top = np.maximum(a, g)
    w_star = top[diff].max()
    at_top = diff & (top == w_star)
    only_alpha = bool(np.any(at_top & (a > g)))
    only_gamma = bool(np.any(at_top & (g > a)))
    if only_alpha and only_gamma:
        return Order.INCOMPARABLE
    return Order.GREATER if only_alpha else Order.LESS


@dataclass(frozen=True)
class CycleBounds:
    w1: float
    m1: float
    b: float


def min_mean_cycle(alpha: GraphFunction) -> float:
    """Minimum mean weight over directed cycles (Karp's dynamic program)."""
    n = alpha.n
    src, dst, w = alpha.src, alpha.dst, alpha.w
    D = np.full((n + 1, n), np.inf)
    D[0] = 0.0
    for k in range(1, n + 1):
        np.minimum.at(D[k], dst, D[k - 1][src] + w)
    with np.errstate(invalid="ignore"):
        ks = np.arange(n)[:, None]
        ratios = (D[n][None, :] - D[:n]) / (n - ks)
    ratios[~np.isfinite(D[:n])] = -np.inf
    per_vertex = ratios.max(axis=0)
    per_vertex[~np.isfinite(D[n])] = np.inf
    best = per_vertex.min()
    if not np.isfinite(best):
        raise GraphError("graph has no cycle")
    return float(best)


def cycle_bounds(alpha: GraphFunction) -> CycleBounds:
    w1 = min_mean_cycle(alpha)
    m1 = float(alpha.w.max())
    return CycleBounds(w1=w1, m1=m1, b=w1 - (alpha.n - 1) * (m1 - w1))
