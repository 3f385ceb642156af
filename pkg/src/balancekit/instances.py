"""Strongly connected benchmark and test instances."""
from __future__ import annotations

import numpy as np

from .graph import GraphFunction, is_irreducible

FAMILIES = ("cycle", "two-cycles", "sparse-random")
DENSITIES = ("cycle", "3n", "quarter")


def cycle(n: int, rho: float) -> GraphFunction:
    """Directed n-cycle of unit entries with one heavy edge of log-weight ``rho``."""
    if n < 2:
        raise ValueError("a cycle needs n >= 2")
    edges = [(i, i + 1, 0.0) for i in range(n - 1)] + [(n - 1, 0, float(rho))]
    return GraphFunction.from_edges(n, edges)


def two_cycles(n: int, rho: float) -> GraphFunction:
    """Two directed cycles through vertex 0, of lengths about n/2 each.

    The heavy edge sits on the first cycle.
    """
    if n < 3:
        raise ValueError("two cycles need n >= 3")
    k = (n + 1) // 2  # first cycle: 0, 1, ..., k-1
    first = [0] + list(range(1, k))
    second = [0] + list(range(k, n))
    edges = []
    for ring in (first, second):
        for a, b in zip(ring, ring[1:] + ring[:1]):
            edges.append((a, b, 0.0))
    edges[k - 1] = (first[-1], 0, float(rho))
    return GraphFunction.from_edges(n, edges)


def edge_count(n: int, density: str) -> int:
    cap = n * (n - 1)
    if density == "cycle":
        return n
    if density == "3n":
        return min(3 * n, cap)
    if density == "quarter":
        return min(max(n, n * n // 4), cap)
    raise ValueError(f"unknown density {density!r}")


def sparse_random(n: int, m: int, spread: float, rng: np.random.Generator,
                  loops: bool = False) -> GraphFunction:
    """Random Hamiltonian cycle plus random extra edges, ``m`` edges in total.

    Weights are uniform on ``[-spread/2, spread/2]``, so the imbalance is at
    most ``spread``.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    cap = n * n if loops else n * (n - 1)
    m = max(n, min(m, cap))
    perm = rng.permutation(n)
    pairs = {(int(perm[i]), int(perm[(i + 1) % n])) for i in range(n)}
    while len(pairs) < m:
        u, v = (int(x) for x in rng.integers(0, n, size=2))
        if u != v or loops:
            pairs.add((u, v))
    pairs = sorted(pairs)
    w = rng.uniform(-spread / 2, spread / 2, size=len(pairs))
    return GraphFunction.from_edges(n, [(u, v, float(x)) for (u, v), x in zip(pairs, w)])


def make(family: str, n: int, rho: float, rng: np.random.Generator | None = None) -> GraphFunction:
    """Instance of a named family, checked to be strongly connected."""
    if family == "cycle":
        g = cycle(n, rho)
    elif family == "two-cycles":
        g = two_cycles(n, rho)
    elif family == "sparse-random":
        g = sparse_random(n, edge_count(n, "3n"), rho, rng if rng is not None else np.random.default_rng(0))
    else:
        raise ValueError(f"unknown family {family!r}")
    ok, _ = is_irreducible(g)
    assert ok, "generator produced a reducible graph"
    return g
