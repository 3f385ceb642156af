"""Unique-balance test on balanced representatives.

A balanced function has a unique balanced equivalent exactly when every
threshold subgraph (edges of weight >= w) is strongly connected. Only the
distinct weights need testing; between them the subgraph does not change.

Floating balancing leaves weights that should coincide slightly apart, so
weights are grouped: consecutive sorted weights closer than ``tau`` share a
group and each group is tested at its smallest member.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .balancer import ScheduleSpec, classic_balance, two_phase_balance
from .graph import GraphFunction, threshold_subgraph


class Verdict(str, Enum):
    UB = "UB"
    NOT_UB = "NotUB"
    INDETERMINATE = "Indeterminate"


class NotBalanced(ValueError):
    pass


@dataclass
class UBReport:
    verdict: Verdict
    witness_threshold: float | None
    balanced_representative: GraphFunction
    grouping_tolerance: float
    components: list[list[int]] = field(default_factory=list)
    thresholds: list[float] = field(default_factory=list)
    distinct_limits: "LimitPair | None" = None
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "witness_threshold": self.witness_threshold,
            "components": self.components,
            "grouping_tolerance": self.grouping_tolerance,
            "thresholds": self.thresholds,
            "note": self.note,
            "balanced_representative": {
                "n": self.balanced_representative.n,
                "edges": [{"u": u, "v": v, "w": w} for u, v, w in self.balanced_representative.edges()],
            },
        }


def group_thresholds(weights, tau: float) -> list[float]:
    """Smallest member of each group, in decreasing order."""
    ws = np.unique(np.asarray(weights, dtype=float))[::-1]
    if ws.size == 0:
        return []
    out = []
    for a, b in zip(ws[:-1], ws[1:]):
        if a - b > tau:
            out.append(float(a))
    out.append(float(ws[-1]))
    return out


def _first_failure(beta: GraphFunction, thresholds):
    for w in thresholds:
        sub = threshold_subgraph(beta, w)
        if not sub.is_strongly_connected():
            return w, sub.components()
    return None, []


def is_ub_balanced(beta: GraphFunction, tau: float, resolution: float | None = None) -> UBReport:
    """Decide unique balance for a ``tau``-balanced ``beta``.

    With ``resolution < tau`` the test is repeated with the finer grouping;
    gaps between ``resolution`` and ``tau`` are ambiguous, and if the two
    groupings disagree the verdict is Indeterminate. Groupings are nested, so
    agreement of the extremes settles every grouping in between.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    rho = beta.imbalance()
    if rho > tau:
        raise NotBalanced(f"imbalance {rho:.6g} exceeds grouping tolerance {tau:.6g}")
    coarse = group_thresholds(beta.w, tau)
    witness, comps = _first_failure(beta, coarse)
    verdict = Verdict.UB if witness is None else Verdict.NOT_UB
    note = ""
    if resolution is not None and resolution < tau:
        fine = group_thresholds(beta.w, resolution)
        fine_witness, fine_comps = _first_failure(beta, fine)
        if (fine_witness is None) != (witness is None):
            verdict = Verdict.INDETERMINATE
            note = f"weight gaps in ({resolution:.3g}, {tau:.3g}] change the verdict"
            if fine_witness is not None:
                witness, comps = fine_witness, fine_comps
    return UBReport(verdict, witness, beta, tau, comps, coarse, note=note)


def is_ub(alpha: GraphFunction, epsilon: float | None = None, tau: float | None = None,
          seed: int = 0) -> UBReport:
    """Balance with the two-phase method, then test the representative.

    The two-phase limit does not depend on the schedule, so the verdict is
    reproducible across seeds. Weights that coincide in the exact limit can
    sit up to about ``n * epsilon`` apart, which is used as the resolution
    below which gaps are treated as noise.
    """
    if epsilon is None:
        epsilon = 1e-10 * alpha.scale()
    if tau is None:
        tau = 1e3 * epsilon
    beta, trace = two_phase_balance(alpha, epsilon, ScheduleSpec.uniform(seed), record=False)
    if not trace.reached:
        return UBReport(Verdict.INDETERMINATE, None, beta, tau,
                        note=f"balancing stopped at imbalance {trace.final_rho:.3g}")
    return is_ub_balanced(beta, tau, resolution=alpha.n * epsilon)


@dataclass
class LimitPair:
    first: GraphFunction
    second: GraphFunction
    schedules: tuple[ScheduleSpec, ScheduleSpec]
    gap: float

    def __iter__(self):
        return iter((self.first, self.second))


def find_distinct_limits(alpha: GraphFunction, epsilon: float | None = None,
                         attempts: int = 8) -> LimitPair | None:
    """Look for two classic-balancing outputs that differ by more than ``10 * epsilon``.

    Cyclic sweeps from each start vertex come first, then random seeds. Runs go
    to ``epsilon / (10 n)`` so that rounding spread stays well below the
    separation threshold. Finding nothing proves nothing.
    """
    if epsilon is None:
        epsilon = 1e-8 * alpha.scale()
    n = alpha.n
    run_eps = epsilon / (10 * n)
    schedules = [ScheduleSpec.cyclic(s, discipline="classic") for s in range(n)]
    schedules += [ScheduleSpec.uniform(k, discipline="classic") for k in range(max(0, attempts - n))]
    seen: list[tuple[ScheduleSpec, GraphFunction]] = []
    for sch in schedules[:attempts]:
        beta, trace = classic_balance(alpha, run_eps, sch, record=False)
        if not trace.reached:
            continue
        for other_sch, other in seen:
            gap = float(np.max(np.abs(beta.w - other.w)))
            if gap > 10 * epsilon:
                return LimitPair(other, beta, (other_sch, sch), gap)
        seen.append((sch, beta))
    return None
