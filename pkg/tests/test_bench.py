import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from balancekit import instances
from balancekit.bench import loglog_fit, run_bench
from balancekit.graph import is_irreducible


@pytest.mark.parametrize("n", [2, 3, 10])
def test_cycle_instance_has_exact_imbalance(n):
    g = instances.cycle(n, 4.0)
    assert g.m == n
    assert g.imbalance() == 4.0
    assert is_irreducible(g)[0]


@pytest.mark.parametrize("n", [3, 4, 9, 16])
def test_two_cycles_share_one_vertex(n):
    g = instances.two_cycles(n, 2.5)
    assert g.m == n + 1
    assert len(g.graph.out_neighbors(0)) == 2 and len(g.graph.in_neighbors(0)) == 2
    assert is_irreducible(g)[0]
    assert g.imbalance() == 2.5


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 40), st.sampled_from(instances.DENSITIES), st.integers(0, 10**6), st.booleans())
def test_sparse_random_is_strongly_connected(n, density, seed, loops):
    m = instances.edge_count(n, density)
    g = instances.sparse_random(n, m, 20.0, np.random.default_rng(seed), loops=loops)
    assert is_irreducible(g)[0]
    assert g.m == max(n, min(m, n * n if loops else n * (n - 1)))
    assert g.imbalance() <= 20.0


def test_make_rejects_unknown_family():
    with pytest.raises(ValueError):
        instances.make("lattice", 5, 1.0)


def test_loglog_fit_recovers_power():
    sizes = [4, 8, 16, 32]
    slope, intercept = loglog_fit(sizes, [3.0 * n**2.5 for n in sizes])
    assert slope == pytest.approx(2.5)
    assert intercept == pytest.approx(np.log(3.0))


def test_two_cycle_converges_in_one_step():
    res = run_bench("cycle", [2], reps=5)
    assert all(s.nontrivial == 1 and s.reached for s in res.samples)


def test_bench_within_budget_and_reps():
    res = run_bench("two-cycles", [5, 9], reps=5, rho=3.0, epsilon=1e-6)
    assert len(res.samples) == 10
    assert all(s.reached and s.ops <= s.budget for s in res.samples)
    with pytest.raises(ValueError):
        run_bench("cycle", [4], reps=3)


def test_bench_worker_count_does_not_change_results():
    a = run_bench("sparse-random", [6, 10], reps=5, seed=3, workers=1)
    b = run_bench("sparse-random", [6, 10], reps=5, seed=3, workers=2)
    assert a.to_dict() == b.to_dict()
