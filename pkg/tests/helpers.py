import math

import numpy as np
from hypothesis import strategies as st

from balancekit.graph import GraphFunction, from_matrix

EX_A = np.array([[0, 2, 0, 0], [8, 0, 2, 0], [0, 1, 0, 2], [0, 0, 8, 0]], dtype=float)
EX_B1 = np.array([[0, 4, 0, 0], [4, 0, 2, 0], [0, 1, 0, 4], [0, 0, 4, 0]], dtype=float)
EX_B2 = np.array([[0, 4, 0, 0], [4, 0, 1, 0], [0, 2, 0, 4], [0, 0, 4, 0]], dtype=float)
# cyclic sweep from the second vertex ends here
EX_B3 = np.array([[0, 4, 0, 0], [4, 0, 0.5, 0], [0, 4, 0, 4], [0, 0, 4, 0]], dtype=float)

LOG2 = math.log(2.0)
LOG4 = math.log(4.0)


def gf(entries) -> GraphFunction:
    return from_matrix(entries)


def uniform_cycle(n: int, c: float = 0.0) -> GraphFunction:
    return GraphFunction.from_edges(n, [(i, (i + 1) % n, c) for i in range(n)])


def random_graph(rng, n, extra=None, spread=5.0, loops=False) -> GraphFunction:
    """Hamiltonian cycle plus ``extra`` random edges; always strongly connected."""
    if extra is None:
        extra = int(rng.integers(0, 2 * n + 1))
    cap = n * n if loops else n * (n - 1)
    perm = rng.permutation(n)
    pairs = {(int(perm[i]), int(perm[(i + 1) % n])) for i in range(n)}
    target = min(cap, n + extra)
    while len(pairs) < target:
        u, v = (int(x) for x in rng.integers(0, n, size=2))
        if u != v or loops:
            pairs.add((u, v))
    pairs = sorted(pairs)
    w = rng.uniform(-spread / 2, spread / 2, size=len(pairs))
    return GraphFunction.from_edges(n, [(u, v, float(x)) for (u, v), x in zip(pairs, w)])


@st.composite
def graph_functions(draw, min_n=2, max_n=7, loops=True, max_extra=10, spread=8.0, integer=False):
    n = draw(st.integers(min_n, max_n))
    perm = draw(st.permutations(range(n)))
    pairs = {(perm[i], perm[(i + 1) % n]) for i in range(n)}
    vert = st.integers(0, n - 1)
    for u, v in draw(st.lists(st.tuples(vert, vert), max_size=max_extra)):
        if u != v or loops:
            pairs.add((u, v))
    pairs = sorted(pairs)
    if integer:
        wt = st.integers(-int(spread), int(spread)).map(float)
    else:
        wt = st.floats(-spread, spread, allow_nan=False, allow_infinity=False)
    ws = draw(st.lists(wt, min_size=len(pairs), max_size=len(pairs)))
    return GraphFunction.from_edges(n, [(u, v, w) for (u, v), w in zip(pairs, ws)])


def seeds():
    return st.integers(0, 2**32 - 1)
