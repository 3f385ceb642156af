"""Raising limit, height/level charts, potentials and the bound audits.

Heights are ``y = -r*`` where ``r*`` is the limiting raising vector. Charts
along a run reuse one limit: after raising vector ``r(t)`` the remaining
height is ``y(t) = r(t) - r*``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .balancer import (
    BalanceTrace,
    ReplayMismatch,
    ScheduleSpec,
    StopRule,
    compute_T,
    raising_phase,
)
from . import _kernels as K
from .graph import GraphFunction, rescale

ORACLE_REL_EPS = 1e-12
# the oracle keeps going this far below its nominal tolerance when it can
REFINE = 1e-2
HEIGHT_TOL = 1e-9
PHI_MAX_EDGES = 18


class OracleBudgetExceeded(RuntimeError):
    pass


class InconsistentChart(ValueError):
    pass


@dataclass(frozen=True)
class RaisingLimit:
    r_star: np.ndarray
    alpha_R: GraphFunction
    oracle_epsilon: float
    residual: float
    ops: int


def raising_limit(alpha: GraphFunction, oracle_epsilon: float | None = None,
                  schedule: ScheduleSpec = ScheduleSpec.cyclic(0)) -> RaisingLimit:
    """Run raising operations until ``rho^R <= oracle_epsilon``.

    The limit of any fair raising sequence is unique, so the estimate does not
    depend on ``schedule``. The run then continues, best effort with a small
    extra budget, to ``REFINE * oracle_epsilon`` to tighten ``r*``.
    """
    if oracle_epsilon is None:
        oracle_epsilon = ORACLE_REL_EPS * alpha.scale()
    n = alpha.n
    budget = max(n, 10 * compute_T(n, alpha.imbalance(), oracle_epsilon, 1.0 / n if n > 1 else 0.5))
    _, tr = raising_phase(alpha, StopRule(oracle_epsilon, budget), schedule, record=False)
    r = tr.raising
    ops = tr.ops
    if tr.final_rho_raise > oracle_epsilon:
        raise OracleBudgetExceeded(
            f"raising imbalance {tr.final_rho_raise:.3g} still above {oracle_epsilon:.3g} after {ops} operations"
        )
    residual = tr.final_rho_raise
    if residual > oracle_epsilon * REFINE:
        extra = StopRule(oracle_epsilon * REFINE, 4 * ops + 100 * n)
        _, tr2 = raising_phase(rescale(alpha, r), extra, schedule, record=False)
        r = r + tr2.raising
        ops += tr2.ops
        residual = tr2.final_rho_raise
    return RaisingLimit(r, rescale(alpha, r), float(oracle_epsilon), float(residual), ops)


@dataclass
class HeightLevelChart:
    y: np.ndarray
    x: np.ndarray
    m: np.ndarray
    z: np.ndarray
    rho_R: np.ndarray
    S: list[np.ndarray]
    rho_S: np.ndarray
    tol: float

    @property
    def y_min(self) -> float:
        return float(self.y.min())

    @property
    def y_max(self) -> float:
        return float(self.y.max())

    @property
    def h(self) -> float:
        return self.y_max - self.y_min

    @property
    def psi(self) -> float:
        return float(-self.y.sum())

    def to_dict(self) -> dict:
        return {
            "y": self.y.tolist(),
            "x": self.x.tolist(),
            "m": self.m.tolist(),
            "z": self.z.tolist(),
            "rho_R": self.rho_R.tolist(),
            "S": [s.tolist() for s in self.S],
            "rho_S": self.rho_S.tolist(),
            "h": self.h,
            "psi": self.psi,
            "y_min": self.y_min,
            "y_max": self.y_max,
            "tol": self.tol,
        }


def chart(alpha: GraphFunction, limit: RaisingLimit, r=None, tol: float | None = None) -> HeightLevelChart:
    """Two-dimensional chart of ``alpha`` relative to its raising limit.

    ``r`` is the raising already applied to the original function whose limit
    was computed (``alpha == rescale(alpha0, r)``); heights are ``r - r*``.
    Height comparisons treat differences below ``tol`` as ties.
    """
    if tol is None:
        tol = limit.oracle_epsilon
    r = np.zeros(alpha.n) if r is None else np.asarray(r, dtype=np.float64)
    y = r - limit.r_star
    alpha_R = limit.alpha_R
    x = alpha_R.in_max
    m = alpha.in_max - x
    rho_R = alpha.rho_raise
    S = []
    rho_S = np.empty(alpha.n)
    z = np.empty(alpha.n)
    for v in range(alpha.n):
        below = y < y[v] - tol
        S.append(np.flatnonzero(below))
        rho_S[v] = rho_R[below].sum()
        z[v] = x[y <= y[v] + tol].max() - x[v]
    return HeightLevelChart(y=y, x=x, m=m, z=z, rho_R=rho_R, S=S, rho_S=rho_S, tol=tol)


@dataclass
class CheckResult:
    name: str
    passed: bool
    slack: float  # min over instances of (rhs - lhs); negative means violated
    count: int
    detail: str = ""


@dataclass
class AuditReport:
    checks: list[CheckResult] = field(default_factory=list)
    height_residual: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "height_residual": self.height_residual,
            "checks": [c.__dict__ for c in self.checks],
        }


def _check(report, name, lhs, rhs, slack, detail=""):
    lhs = np.atleast_1d(np.asarray(lhs, dtype=np.float64))
    rhs = np.atleast_1d(np.asarray(rhs, dtype=np.float64))
    gap = rhs - lhs
    worst = float(gap.min()) if gap.size else math.inf
    report.checks.append(CheckResult(name, worst >= -slack, worst, int(gap.size), detail))


def missing_exit_edges(alpha_R: GraphFunction, ch: HeightLevelChart):
    """For each vertex above the minimum height, search for the guaranteed edge.

    Returns the list of vertices for which no edge ``(u', v')`` with ``u'`` in
    the top-level set ``U``, ``v'`` outside it, ``alpha^R_{u'v'} >= x_U`` and
    ``y_{v'} >= y_v`` exists.
    """
    tol = ch.tol
    y, x = ch.y, ch.x
    missing = []
    for v in range(alpha_R.n):
        if y[v] <= ch.y_min + tol:
            continue
        lower = y < y[v] - tol
        if not lower.any():
            continue
        x_U = x[lower].max()
        U = lower & (x >= x_U - tol)
        ok = False
        for e in np.flatnonzero(U[alpha_R.src] & ~U[alpha_R.dst]):
            vp = alpha_R.dst[e]
            if alpha_R.w[e] >= x_U - tol and y[vp] >= y[v] - tol:
                ok = True
                break
        if not ok:
            missing.append(v)
    return missing


def audit_bounds(alpha: GraphFunction, ch: HeightLevelChart, limit: RaisingLimit,
                 slack: float | None = None) -> AuditReport:
    """Check every height/momentum inequality on one state; reports slack per check."""
    if slack is None:
        slack = 10 * limit.oracle_epsilon
    alpha_R = limit.alpha_R
    src, dst = alpha.src, alpha.dst
    y, x, m, z, rho = ch.y, ch.x, ch.m, ch.z, ch.rho_R
    n = alpha.n
    resid = np.abs(alpha_R.w - alpha.w - (y[src] - y[dst]))
    report = AuditReport(height_residual=float(resid.max()) if resid.size else 0.0)
    if report.height_residual > HEIGHT_TOL * alpha.scale():
        raise InconsistentChart(f"height identity residual {report.height_residual:.3g}")

    h = ch.h
    _check(report, "max rho_R/2 <= h", rho.max() / 2, h, slack)
    _check(report, "h <= (n-1) sum rho_R", h, (n - 1) * rho.sum(), slack)
    _check(report, "y_max = 0", abs(ch.y_max), 0.0, slack)
    psi = ch.psi
    _check(report, "h <= psi", h, psi, slack)
    _check(report, "psi/n <= h", psi / n, h, slack)

    rhs5 = np.zeros(n)
    lower_edge = y[src] < y[dst] - ch.tol
    cand = m[src] + rho[src] + x[src] - x[dst]
    for e in np.flatnonzero(lower_edge):
        rhs5[dst[e]] = max(rhs5[dst[e]], cand[e])
    _check(report, "momentum bound", m, rhs5, slack)
    _check(report, "height along edges", y[dst],
           y[src] + m[src] + rho[src] + x[src] - alpha_R.w, slack)
    # edges with y_u >= y_v cannot carry weight above the level of v
    above = y[src] >= y[dst] - ch.tol
    _check(report, "edges from above: alpha_uv - x_v <= 0", (alpha.w - x[dst])[above], np.zeros(above.sum()), slack)
    _check(report, "lower-set momentum: m_v <= rho(S_v) + z_v", m, ch.rho_S + z, slack)
    sizes = np.array([s.size for s in ch.S], dtype=np.float64)
    _check(report, "lower-set height: y_v - y_min <= |S_v| rho(S_v)", y - ch.y_min, sizes * ch.rho_S, slack)
    _check(report, "z >= 0", -z, np.zeros(n), slack)

    # xz-monotone: y_u <= y_v implies x_u + z_u <= x_v + z_v
    xz = x + z
    le = y[:, None] <= y[None, :] - ch.tol
    viol = (xz[:, None] - xz[None, :])[le]
    _check(report, "xz-monotone", viol, np.zeros(viol.size), slack)

    # a raised vertex has edges (u,v), (v,w) with y_v + rho_v/2 <= (y_u + y_w)/2
    gaps = []
    g = alpha.graph
    for v in np.flatnonzero(rho > 0):
        ins = g.in_neighbors(v)
        outs = g.out_neighbors(v)
        best = (y[ins].max() + y[outs].max()) / 2 - (y[v] + rho[v] / 2)
        gaps.append(best)
    _check(report, "raising edge pair", np.zeros(len(gaps)), np.array(gaps), slack)

    missing = missing_exit_edges(alpha_R, ch)
    report.checks.append(CheckResult(
        "top-level exit edge", not missing, 0.0 if not missing else -1.0, n,
        "" if not missing else f"no witness edge for vertices {missing}",
    ))
    return report


def phi(alpha: GraphFunction, exact: bool = False):
    """Factorial-weighted potential over non-loop edges.

    Coefficients are ``N!`` with ``N`` the rank of the edge's weight among
    non-loop edges, ties broken by edge index, which keeps the potential
    continuous as weights cross. Only defined for at most 18 such edges.
    """
    keep = np.flatnonzero(alpha.src != alpha.dst)
    if keep.size > PHI_MAX_EDGES:
        raise ValueError(f"potential limited to {PHI_MAX_EDGES} edges, graph has {keep.size}")
    w = alpha.w[keep]
    order = np.lexsort((keep, w))
    total = Fraction(0)
    for rank, k in enumerate(order, start=1):
        total += math.factorial(rank) * Fraction(float(w[k]))
    return total if exact else float(total)


@dataclass
class PotentialSeries:
    t: list[int] = field(default_factory=list)
    psi: list[float] = field(default_factory=list)
    h: list[float] = field(default_factory=list)
    sum_rho_R: list[float] = field(default_factory=list)
    phi: list[float | None] = field(default_factory=list)
    audits: list[AuditReport] = field(default_factory=list)

    def rows(self):
        for i in range(len(self.t)):
            yield self.t[i], self.psi[i], self.h[i], self.sum_rho_R[i], self.phi[i]

    def to_csv(self) -> str:
        lines = ["t,psi,h,sum_rho_R,phi"]
        for t, p, h, s, f in self.rows():
            lines.append(f"{t},{p:.17g},{h:.17g},{s:.17g},{'' if f is None else format(f, '.17g')}")
        return "\n".join(lines) + "\n"


def potential_series(trace: BalanceTrace, alpha0: GraphFunction, sample_every: int = 1, *,
                     limit: RaisingLimit | None = None, with_phi: bool = False,
                     audit: bool = False) -> PotentialSeries:
    """Replay the raising steps of ``trace`` and sample the potentials.

    Only the raising part of the trace is used. Every recorded increment is
    re-derived from the replayed state and must match bit-for-bit.
    """
    if not trace.recorded:
        raise ReplayMismatch("trace has no recorded steps")
    if limit is None:
        limit = raising_limit(alpha0)
    g = alpha0.graph
    args = (alpha0.w, g.src, g.dst, g.out_ptr, g.out_edges, g.in_ptr, g.in_edges)
    raising = trace.modes == K.RAISE
    steps = np.flatnonzero(raising)
    if steps.size and steps[-1] != steps.size - 1:
        raise ReplayMismatch("raising steps must form a prefix of the trace")
    with_phi = with_phi and int((g.src != g.dst).sum()) <= 18
    series = PotentialSeries()
    r = np.zeros(alpha0.n)

    def sample(t):
        alpha = rescale(alpha0, r)
        ch = chart(alpha, limit, r)
        series.t.append(t)
        series.psi.append(ch.psi)
        series.h.append(ch.h)
        series.sum_rho_R.append(float(alpha.rho_raise.sum()))
        series.phi.append(phi(alpha) if with_phi else None)
        if audit:
            series.audits.append(audit_bounds(alpha, ch, limit))

    sample(0)
    for i in range(steps.size):
        bad = K.replay_block(trace.modes[i:i + 1].astype(np.int64), trace.vertices[i:i + 1],
                             trace.amounts[i:i + 1], r, *args)
        if bad != K.ALL_MATCH:
            raise ReplayMismatch(f"step {i} does not reproduce from this input")
        if (i + 1) % sample_every == 0 or i + 1 == steps.size:
            sample(i + 1)
    return series
