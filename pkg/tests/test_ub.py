import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from balancekit.balancer import two_phase_balance
from balancekit.graph import GraphFunction, from_matrix, threshold_subgraph
from balancekit.ub import NotBalanced, Verdict, find_distinct_limits, group_thresholds, is_ub, is_ub_balanced
from helpers import EX_A, EX_B1, EX_B2, LOG4, gf, graph_functions, random_graph, uniform_cycle


def test_group_thresholds():
    assert group_thresholds([3.0, 1.0, 1.0 + 1e-12, 2.0], 1e-9) == [3.0, 2.0, 1.0]
    assert group_thresholds([1.0, 1.5], 1.0) == [1.0]
    assert group_thresholds([], 1.0) == []


@pytest.mark.parametrize("entries", [EX_B1, EX_B2])
def test_balanced_example_is_not_ub(entries):
    rep = is_ub_balanced(gf(entries), 1e-9)
    assert rep.verdict is Verdict.NOT_UB
    assert rep.witness_threshold == pytest.approx(LOG4)
    assert sorted(map(sorted, rep.components)) == [[0, 1], [2, 3]]
    assert not threshold_subgraph(rep.balanced_representative, rep.witness_threshold).is_strongly_connected()


def test_uniform_cycle_is_ub():
    rep = is_ub_balanced(uniform_cycle(6, 1.0), 0.0)
    assert rep.verdict is Verdict.UB and rep.witness_threshold is None
    assert rep.thresholds == [1.0]


def test_is_ub_balanced_rejects_unbalanced_input():
    with pytest.raises(NotBalanced):
        is_ub_balanced(gf(EX_A), 1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_is_ub_example_stable_over_seeds(seed):
    rep = is_ub(gf(EX_A), seed=seed)
    assert rep.verdict is Verdict.NOT_UB
    assert rep.witness_threshold == pytest.approx(LOG4, abs=1e-8)


@pytest.mark.parametrize("entries", [[[0, 4, 0], [0, 0, 4], [4, 0, 0]], [[0, 1, 0], [0, 0, 1], [64, 0, 0]]])
def test_is_ub_three_cycles(entries):
    assert is_ub(from_matrix(entries)).verdict is Verdict.UB


def test_is_ub_ambiguous_gap_is_indeterminate():
    # two weights 1e-7 apart: merged at tau=1e-6 (connected) but split at the 1e-9 resolution
    a = GraphFunction.from_edges(3, [(0, 1, 1e-7), (1, 0, 0.0), (1, 2, 0.0), (2, 1, 0.0)])
    rep = is_ub_balanced(a, 1e-6, resolution=1e-9)
    assert rep.verdict is Verdict.INDETERMINATE
    assert is_ub_balanced(a, 1e-6).verdict is Verdict.UB


def test_is_ub_unreached_is_indeterminate(monkeypatch):
    import balancekit.ub as U
    real = U.two_phase_balance
    monkeypatch.setattr(U, "two_phase_balance", lambda a, e, s, **kw: real(a, e, s, max_ops=1, **kw))
    rep = U.is_ub(random_graph(np.random.default_rng(0), 10))
    assert rep.verdict is Verdict.INDETERMINATE


def test_find_distinct_limits_example():
    pair = find_distinct_limits(gf(EX_A))
    assert pair is not None
    first, second = pair
    assert pair.gap > 0.5
    for g in (first, second):
        assert g.imbalance() < 1e-8
    assert find_distinct_limits(uniform_cycle(5, 2.0)) is None


def test_report_json():
    d = is_ub(gf(EX_A)).to_dict()
    assert d["verdict"] == "NotUB"
    assert d["components"] and d["balanced_representative"]["n"] == 4


def _snap(beta, tau):
    # replace each weight by the smallest member of its group
    reps = np.array(group_thresholds(beta.w, tau))
    return beta.with_weights([reps[reps <= w].max() for w in beta.w])


def _dense_sweep_verdict(beta, count=1000):
    grid = np.linspace(beta.w.min(), beta.w.max(), count)
    for w in np.concatenate([grid, beta.w]):
        if not threshold_subgraph(beta, w).is_strongly_connected():
            return Verdict.NOT_UB
    return Verdict.UB


@settings(max_examples=40, deadline=None)
@given(graph_functions(max_n=6, integer=True, spread=3), st.integers(0, 100))
def test_grouped_verdict_matches_dense_sweep(alpha, seed):
    beta, tr = two_phase_balance(alpha, 1e-10, record=False)
    rep = is_ub_balanced(beta, 1e-7)
    assert rep.verdict is _dense_sweep_verdict(_snap(beta, 1e-7))


@settings(max_examples=25, deadline=None)
@given(graph_functions(max_n=6, integer=True, spread=2))
def test_ub_consistency_and_seed_independence(alpha):
    verdicts = {is_ub(alpha, seed=s).verdict for s in range(5)}
    assert len(verdicts) == 1
    pair = find_distinct_limits(alpha, attempts=6)
    if pair is not None:
        assert verdicts.pop() is not Verdict.UB
