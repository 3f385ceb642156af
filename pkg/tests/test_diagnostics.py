import dataclasses
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from balancekit.balancer import ReplayMismatch, ScheduleSpec, StopRule, raise_at, raising_phase, two_phase_balance
from balancekit.diagnostics import (
    InconsistentChart, OracleBudgetExceeded, audit_bounds, chart, missing_exit_edges, phi,
    potential_series, raising_limit,
)
from balancekit.graph import GraphFunction, equivalent, from_matrix
from helpers import EX_A, EX_B2, LOG2, LOG4, gf, graph_functions, random_graph, uniform_cycle


@pytest.fixture(scope="module")
def ex_limit():
    return raising_limit(gf(EX_A))


def test_raising_limit_example(ex_limit):
    tol = 10 * ex_limit.oracle_epsilon
    np.testing.assert_allclose(ex_limit.r_star, [0, LOG2, 0, LOG2], atol=tol)
    np.testing.assert_allclose(ex_limit.alpha_R.w, gf(EX_B2).w, atol=tol)
    assert ex_limit.residual <= ex_limit.oracle_epsilon


def test_raising_limit_of_balanced_input_is_zero():
    lim = raising_limit(gf(EX_B2))
    np.testing.assert_array_equal(lim.r_star, 0.0)
    np.testing.assert_array_equal(lim.alpha_R.w, gf(EX_B2).w)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_raising_limit_schedule_independent(seed):
    alpha = random_graph(np.random.default_rng(seed), 7, loops=True)
    base = raising_limit(alpha)
    other = raising_limit(alpha, schedule=ScheduleSpec.uniform(seed + 10))
    np.testing.assert_allclose(base.r_star, other.r_star, atol=10 * base.oracle_epsilon)
    assert equivalent(alpha, base.alpha_R, 1e-9)
    assert base.alpha_R.raising_imbalance() <= base.oracle_epsilon


def test_raising_limit_budget(monkeypatch):
    import balancekit.diagnostics as D
    monkeypatch.setattr(D, "compute_T", lambda *a: 0)
    with pytest.raises(OracleBudgetExceeded):
        D.raising_limit(random_graph(np.random.default_rng(0), 9))


# --- chart ------------------------------------------------------------------

def test_chart_example(ex_limit):
    ch = chart(gf(EX_A), ex_limit)
    tol = 10 * ex_limit.oracle_epsilon
    np.testing.assert_allclose(ch.y, [0, -LOG2, 0, -LOG2], atol=tol)
    np.testing.assert_allclose(ch.x, LOG4, atol=tol)
    np.testing.assert_allclose(ch.m, [LOG2, -LOG2, LOG2, -LOG2], atol=tol)
    assert ch.h == pytest.approx(LOG2, abs=tol)
    assert ch.psi == pytest.approx(2 * LOG2, abs=tol)
    assert [s.tolist() for s in ch.S] == [[1, 3], [], [1, 3], []]


def test_chart_of_raising_balanced_input():
    b = gf(EX_B2)
    ch = chart(b, raising_limit(b))
    assert np.all(ch.y == 0) and np.all(ch.m == 0)
    assert all(s.size == 0 for s in ch.S)
    np.testing.assert_array_equal(ch.z, ch.x.max() - ch.x)


# --- audits -----------------------------------------------------------------

def test_audit_example_all_pass_half_rho_tight(ex_limit):
    a = gf(EX_A)
    rep = audit_bounds(a, chart(a, ex_limit), ex_limit)
    assert rep.passed, rep.failures()
    half_rho = next(c for c in rep.checks if c.name.startswith("max rho_R/2"))
    assert abs(half_rho.slack) <= 10 * ex_limit.oracle_epsilon


def test_audit_balanced_trivial():
    b = uniform_cycle(5, 0.7)
    lim = raising_limit(b)
    ch = chart(b, lim)
    rep = audit_bounds(b, ch, lim)
    assert rep.passed and ch.h == 0 and b.raising_imbalance() == 0


def test_audit_detects_corrupted_momentum(ex_limit):
    a = gf(EX_A)
    ch = chart(a, ex_limit)
    m = ch.m.copy()
    m[0] += 1.0
    rep = audit_bounds(a, dataclasses.replace(ch, m=m), ex_limit)
    assert not rep.passed
    assert any(name == "momentum bound" for name in rep.failures())


def test_audit_rejects_inconsistent_heights(ex_limit):
    a = gf(EX_A)
    ch = chart(a, ex_limit)
    with pytest.raises(InconsistentChart):
        audit_bounds(a, dataclasses.replace(ch, y=ch.y + np.array([0, 1.0, 0, 0])), ex_limit)


def test_audit_report_json_shape(ex_limit):
    a = gf(EX_A)
    d = audit_bounds(a, chart(a, ex_limit), ex_limit).to_dict()
    assert d["passed"] is True
    assert {"name", "passed", "slack", "count", "detail"} <= set(d["checks"][0])


@settings(max_examples=25, deadline=None)
@given(graph_functions(max_n=8, max_extra=12), st.integers(0, 10_000))
def test_audits_hold_along_raising_runs(alpha, seed):
    lim = raising_limit(alpha)
    _, tr = raising_phase(alpha, StopRule(1e-13 * alpha.scale(), 10**6), ScheduleSpec.uniform(seed))
    series = potential_series(tr, alpha, max(1, tr.ops // 15), limit=lim, audit=True)
    for rep in series.audits:
        assert rep.passed, rep.failures()
    for v in missing_exit_edges(lim.alpha_R, chart(alpha, lim)):
        pytest.fail(f"no top-level exit edge for vertex {v}")


# --- potentials -------------------------------------------------------------

def test_potential_series_example_monotone(ex_limit):
    a = gf(EX_A)
    _, tr = raising_phase(a, StopRule(1e-12, 1000), ScheduleSpec.uniform(0))
    s = potential_series(tr, a, 1, limit=ex_limit, with_phi=True)
    assert s.psi[0] == pytest.approx(2 * LOG2)
    assert all(b <= a_ + 1e-12 for a_, b in zip(s.psi, s.psi[1:]))
    assert s.psi[-1] == pytest.approx(0, abs=1e-9)
    assert s.psi[0] <= a.n**3 * a.imbalance()
    assert s.to_csv().splitlines()[0] == "t,psi,h,sum_rho_R,phi"
    assert len(s.to_csv().splitlines()) == len(s.t) + 1


def test_potential_series_uses_raising_prefix_only():
    alpha = random_graph(np.random.default_rng(1), 5)
    _, tr = two_phase_balance(alpha, 1e-9)
    s = potential_series(tr, alpha, 10)
    assert s.t[-1] == tr.phases[0].ops
    with pytest.raises(ReplayMismatch):
        potential_series(tr, random_graph(np.random.default_rng(2), 5), 10)


def test_phi_exact_and_edge_limit():
    a = gf(EX_A)
    exact = phi(a, exact=True)
    assert isinstance(exact, Fraction)
    assert float(exact) == pytest.approx(phi(a))
    big = random_graph(np.random.default_rng(0), 8, extra=20)
    with pytest.raises(ValueError):
        phi(big)


def test_phi_ignores_self_loops():
    g = GraphFunction.from_edges(2, [(0, 0, 3.0), (0, 1, 1.0), (1, 0, 2.0)])
    assert phi(g, exact=True) == 1 * Fraction(1.0) + 2 * Fraction(2.0)


def test_phi_continuous_at_ties():
    base = GraphFunction.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 0.0)])
    w = base.w.copy()
    w[0] += 1e-12
    assert abs(phi(base.with_weights(w)) - phi(base)) < 1e-9


@settings(max_examples=80, deadline=None)
@given(graph_functions(max_n=6, max_extra=8), st.lists(st.integers(0, 5), min_size=1, max_size=40))
def test_phi_decreases_along_raising(alpha, vs):
    if int((alpha.src != alpha.dst).sum()) > 18:
        return
    cur = alpha
    for v in vs:
        v %= alpha.n
        rho = cur.rho_raise[v]
        nxt, amt = raise_at(cur, v)
        if amt > 0:
            before = phi(cur)
            assert phi(nxt) - before <= -rho / 2 + 1e-9 * abs(before)
        cur = nxt


def test_psi_initial_bound_on_random_graphs():
    rng = np.random.default_rng(4)
    for _ in range(10):
        a = random_graph(rng, int(rng.integers(2, 10)), loops=True)
        lim = raising_limit(a)
        ch = chart(a, lim)
        assert ch.psi <= a.n**3 * a.imbalance() + 1e-9
        assert ch.h <= ch.psi + 1e-12 and ch.psi / a.n <= ch.h + 1e-12


def test_chart_values_match_definitions():
    a = from_matrix([[0, 3, 0], [0, 1, 5], [0.5, 2, 0]])
    lim = raising_limit(a)
    ch = chart(a, lim)
    R = lim.alpha_R
    for v in range(a.n):
        ins = [u for u in range(a.n) if (u, v) in a.as_dict()]
        assert ch.x[v] == pytest.approx(max(R.weight(u, v) for u in ins))
        assert ch.m[v] == pytest.approx(max(a.weight(u, v) for u in ins) - ch.x[v])
        assert ch.y[v] == pytest.approx(-lim.r_star[v])
    assert math.isclose(ch.y_max, 0.0, abs_tol=10 * lim.oracle_epsilon)
