"""Balancing operations, schedules and the classic / two-phase iterations.

Runs keep a single vertex potential ``p`` (cumulative log-scaling): the
current function is always ``rescale(alpha0, p)``. Every recorded step is the
increment applied to one coordinate of ``p``; raising steps add
``rho_v^R / 2``, lowering steps subtract ``rho_v^L / 2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .graph import GraphFunction, rescale

PHASE_NAMES = {K.BALANCE: "classic", K.RAISE: "raise", K.LOWER: "lower"}
PHASE_CODES = {name: code for code, name in PHASE_NAMES.items()}

# a step may push a neighbour's opposite imbalance up by rounding only
AUDIT_TOL = 1e-12


class InvalidParameter(ValueError):
    pass


class TargetNotReached(RuntimeError):
    def __init__(self, trace: "BalanceTrace"):
        self.trace = trace
        super().__init__(
            f"target {trace.epsilon:g} not reached: final imbalance {trace.final_rho:.6g} "
            f"after {trace.ops} operations"
        )


class ReplayMismatch(RuntimeError):
    pass


# --- single operations ------------------------------------------------------

def _local_max(alpha: GraphFunction, v: int) -> tuple[float, float]:
    g = alpha.graph
    out_e = g.out_edges[g.out_ptr[v]:g.out_ptr[v + 1]]
    in_e = g.in_edges[g.in_ptr[v]:g.in_ptr[v + 1]]
    return float(alpha.w[out_e].max()), float(alpha.w[in_e].max())


def _bump(alpha: GraphFunction, v: int, d: float) -> GraphFunction:
    # in-edges of v gain d, out-edges lose d, a self-loop is untouched
    if d == 0.0:
        return alpha
    w = alpha.w.copy()
    into = (alpha.dst == v) & (alpha.src != v)
    out = (alpha.src == v) & (alpha.dst != v)
    w[into] += d
    w[out] -= d
    return alpha.with_weights(w)


def balance_at(alpha: GraphFunction, v: int) -> tuple[GraphFunction, float]:
    """Balancing operation at ``v``.

    Returns the new function and the shift amount ``(in_max - out_max) / 2``,
    i.e. the result equals ``shift(alpha, {v}, amount)``.
    """
    out_m, in_m = _local_max(alpha, v)
    return _bump(alpha, v, 0.5 * (out_m - in_m)), 0.5 * (in_m - out_m)


def raise_at(alpha: GraphFunction, v: int) -> tuple[GraphFunction, float]:
    """Balance at ``v`` only if its out-max exceeds its in-max; returns ``rho_v^R / 2``."""
    out_m, in_m = _local_max(alpha, v)
    if out_m <= in_m:
        return alpha, 0.0
    d = 0.5 * (out_m - in_m)
    return _bump(alpha, v, d), d


def lower_at(alpha: GraphFunction, v: int) -> tuple[GraphFunction, float]:
    """Balance at ``v`` only if its in-max exceeds its out-max; returns ``rho_v^L / 2``."""
    out_m, in_m = _local_max(alpha, v)
    if in_m <= out_m:
        return alpha, 0.0
    d = 0.5 * (in_m - out_m)
    return _bump(alpha, v, -d), d


def raise_vector_at(alpha0: GraphFunction, r, v: int) -> np.ndarray:
    """Raising vector after one more raising operation at ``v``.

    ``r`` need not be reachable; the update
    ``r_v <- max(r_v, (max_w(a_vw + r_w) + min_u(r_u - a_uv)) / 2)`` is
    monotone in every coordinate of ``r``.
    """
    r = np.array(r, dtype=np.float64)
    g = alpha0.graph
    out_e = g.out_edges[g.out_ptr[v]:g.out_ptr[v + 1]]
    in_e = g.in_edges[g.in_ptr[v]:g.in_ptr[v + 1]]
    out_m = (alpha0.w[out_e] + r[g.dst[out_e]] - r[v]).max()
    in_m = (alpha0.w[in_e] + r[v] - r[g.src[in_e]]).max()
    if out_m > in_m:
        r[v] += 0.5 * (out_m - in_m)
    return r


def compute_T(n: int, rho: float, epsilon: float, delta: float) -> int:
    """Operation budget ``ceil(6 n^3 ln(2 rho n / (epsilon delta)))`` for one phase."""
    if n < 1:
        raise InvalidParameter("n must be positive")
    if not epsilon > 0:
        raise InvalidParameter("epsilon must be positive")
    if rho < 0:
        raise InvalidParameter("rho must be non-negative")
    if rho <= epsilon:
        return 0
    if not 0 < delta < 1:
        raise InvalidParameter("delta must lie in (0, 1)")
    return math.ceil(6 * n**3 * math.log(2 * rho * n / (epsilon * delta)))


# --- schedules and traces ---------------------------------------------------

@dataclass(frozen=True)
class ScheduleSpec:
    kind: str = "random"  # random | cyclic | greedy
    seed: int = 0
    start: int = 0
    discipline: str = "two-phase"  # two-phase | classic

    def __post_init__(self):
        if self.kind not in ("random", "cyclic", "greedy"):
            raise InvalidParameter(f"unknown schedule kind {self.kind!r}")
        if self.discipline not in ("two-phase", "classic"):
            raise InvalidParameter(f"unknown discipline {self.discipline!r}")

    @classmethod
    def uniform(cls, seed: int = 0, **kw) -> "ScheduleSpec":
        return cls("random", seed=seed, **kw)

    @classmethod
    def cyclic(cls, start: int = 0, **kw) -> "ScheduleSpec":
        return cls("cyclic", start=start, **kw)

    @classmethod
    def greedy(cls, **kw) -> "ScheduleSpec":
        return cls("greedy", **kw)

    @property
    def fair(self) -> bool:
        # greedy is an experimental extra, without convergence guarantees
        return self.kind != "greedy"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, "start": self.start, "discipline": self.discipline}


@dataclass(frozen=True)
class StopRule:
    epsilon: float
    max_ops: int
    early_exit: bool = True

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidParameter("epsilon must be positive")
        if self.max_ops < 1:
            raise InvalidParameter("max_ops must be at least 1")


@dataclass
class PhaseRecord:
    name: str
    ops: int
    nontrivial: int
    stop_cause: str  # target | max_ops | skipped
    reached: bool
    final_imbalance: float
    max_ops: int
    violations: int = 0


@dataclass
class BalanceTrace:
    schedule: ScheduleSpec
    epsilon: float
    n: int
    phases: list[PhaseRecord]
    scaling: np.ndarray
    raising: np.ndarray
    lowering: np.ndarray
    final_rho: float
    final_rho_raise: float
    final_rho_lower: float
    vertices: np.ndarray | None = None
    amounts: np.ndarray | None = None
    modes: np.ndarray | None = None
    delta: float | None = None
    T: int | None = None

    @property
    def ops(self) -> int:
        return sum(ph.ops for ph in self.phases)

    @property
    def nontrivial(self) -> int:
        return sum(ph.nontrivial for ph in self.phases)

    @property
    def reached(self) -> bool:
        return all(ph.reached for ph in self.phases)

    @property
    def recorded(self) -> bool:
        return self.vertices is not None

    @property
    def opposite_increases(self) -> int:
        return sum(ph.violations for ph in self.phases)

    @property
    def stop_cause(self) -> str:
        return "target" if self.reached else "max_ops"

    def summary(self) -> dict:
        return {
            "ops": self.ops,
            "nontrivial": self.nontrivial,
            "reached": self.reached,
            "stop_cause": self.stop_cause,
            "rho": self.final_rho,
            "rho_R": self.final_rho_raise,
            "rho_L": self.final_rho_lower,
            "phases": [ph.__dict__ for ph in self.phases],
            "scaling": self.scaling.tolist(),
        }


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), stream])))


@dataclass
class _Recorder:
    record: bool
    verts: list = field(default_factory=list)
    amts: list = field(default_factory=list)
    modes: list = field(default_factory=list)

    def arrays(self):
        if not self.record:
            return None, None, None
        cat = lambda xs, dt: np.concatenate(xs).astype(dt) if xs else np.empty(0, dt)
        return cat(self.verts, np.int64), cat(self.amts, np.float64), cat(self.modes, np.int8)


def _run_phase(alpha, p, mode, schedule, stop, rng, recorder, audit, name):
    """Advance ``p`` in place by one phase; returns its PhaseRecord."""
    g = alpha.graph
    n = g.n
    args = (alpha.w, g.src, g.dst, g.out_ptr, g.out_edges, g.in_ptr, g.in_edges)
    block = max(1, (1 << 16) // n) * n
    t = 0
    nontrivial = violations = 0
    reached = False
    audit_tol = AUDIT_TOL * alpha.scale()
    while t < stop.max_ops:
        size = min(block, stop.max_ops - t)
        if schedule.kind == "random":
            choices = rng.integers(0, n, size=size, dtype=np.int64)
        elif schedule.kind == "cyclic":
            choices = (schedule.start + t + np.arange(size, dtype=np.int64)) % n
        else:
            choices = np.full(size, -1, dtype=np.int64)
        rec_v = np.empty(size if recorder.record else 0, dtype=np.int64)
        rec_a = np.empty(size if recorder.record else 0, dtype=np.float64)
        done, hit, nt, viol = K.run_block(
            mode, choices, t, n, stop.epsilon, stop.early_exit, recorder.record, audit,
            audit_tol, p, *args, rec_v, rec_a,
        )
        if recorder.record:
            recorder.verts.append(rec_v[:done])
            recorder.amts.append(rec_a[:done])
            recorder.modes.append(np.full(done, mode, dtype=np.int8))
        t += done
        nontrivial += nt
        violations += viol
        if hit:
            reached = True
            break
    final = K.phase_imbalance(mode, p, *args)
    cause = "target" if reached else "max_ops"
    reached = reached or final <= stop.epsilon
    return PhaseRecord(name, t, nontrivial, cause, reached, float(final), stop.max_ops, violations)


def _finish(alpha, p, schedule, epsilon, phases, recorder, raising, lowering, **extra):
    beta = rescale(alpha, p)
    verts, amts, modes = recorder.arrays()
    trace = BalanceTrace(
        schedule=schedule,
        epsilon=epsilon,
        n=alpha.n,
        phases=phases,
        scaling=p.copy(),
        raising=raising,
        lowering=lowering,
        final_rho=beta.imbalance(),
        final_rho_raise=beta.raising_imbalance(),
        final_rho_lower=beta.lowering_imbalance(),
        vertices=verts,
        amounts=amts,
        modes=modes,
        **extra,
    )
    return beta, trace


def raising_phase(alpha: GraphFunction, stop: StopRule, schedule: ScheduleSpec = ScheduleSpec(),
                  *, record: bool = True, audit: bool = False):
    """Raising operations only, until ``rho^R <= epsilon`` or ``max_ops``."""
    p = np.zeros(alpha.n)
    rec = _Recorder(record)
    ph = _run_phase(alpha, p, K.RAISE, schedule, stop, _rng(schedule.seed, 0), rec, audit, "raise")
    return _finish(alpha, p, schedule, stop.epsilon, [ph], rec, p.copy(), np.zeros(alpha.n))


def lowering_phase(alpha: GraphFunction, stop: StopRule, schedule: ScheduleSpec = ScheduleSpec(),
                   *, record: bool = True, audit: bool = False):
    """Mirror image of :func:`raising_phase`."""
    p = np.zeros(alpha.n)
    rec = _Recorder(record)
    ph = _run_phase(alpha, p, K.LOWER, schedule, stop, _rng(schedule.seed, 1), rec, audit, "lower")
    return _finish(alpha, p, schedule, stop.epsilon, [ph], rec, np.zeros(alpha.n), -p)


def two_phase_balance(alpha: GraphFunction, epsilon: float, schedule: ScheduleSpec = ScheduleSpec(),
                      delta: float | None = None, *, max_ops: int | None = None, early_exit: bool = True,
                      record: bool = True, audit: bool = False, strict: bool = False):
    """Raising phase followed by lowering phase, each with budget ``compute_T``.

    Returns ``(balanced, trace)``. A phase that exhausts its budget above
    ``epsilon`` is reported through ``trace.reached``; with ``strict`` it
    raises TargetNotReached instead.
    """
    n = alpha.n
    if delta is None:
        delta = 1.0 / n if n > 1 else 0.5
    rho = alpha.imbalance()
    T = compute_T(n, rho, epsilon, delta) if max_ops is None else int(max_ops)
    p = np.zeros(n)
    rec = _Recorder(record)
    phases = []
    raising = np.zeros(n)
    for mode, stream in ((K.RAISE, 0), (K.LOWER, 1)):
        name = PHASE_NAMES[mode]
        if T == 0:
            final = K.phase_imbalance(mode, p, alpha.w, alpha.src, alpha.dst, alpha.graph.out_ptr,
                                      alpha.graph.out_edges, alpha.graph.in_ptr, alpha.graph.in_edges)
            phases.append(PhaseRecord(name, 0, 0, "skipped", final <= epsilon, float(final), 0))
            continue
        stop = StopRule(epsilon, T, early_exit)
        phases.append(_run_phase(alpha, p, mode, schedule, stop, _rng(schedule.seed, stream), rec, audit, name))
        if mode == K.RAISE:
            raising = p.copy()
    beta, trace = _finish(alpha, p, schedule, epsilon, phases, rec, raising, raising - p, delta=delta, T=T)
    if strict and not trace.reached:
        raise TargetNotReached(trace)
    return beta, trace


def classic_balance(alpha: GraphFunction, epsilon: float, schedule: ScheduleSpec = ScheduleSpec(discipline="classic"),
                    max_ops: int | None = None, *, record: bool = True, strict: bool = False):
    """Unrestricted balancing operations until ``rho <= epsilon``.

    The limit depends on the schedule unless the input has a unique balance.
    The default budget is four times the two-phase per-phase budget.
    """
    n = alpha.n
    if max_ops is None:
        max_ops = max(1, 4 * compute_T(n, alpha.imbalance(), epsilon, 1.0 / n if n > 1 else 0.5))
    p = np.zeros(n)
    rec = _Recorder(record)
    ph = _run_phase(alpha, p, K.BALANCE, schedule, StopRule(epsilon, max_ops), _rng(schedule.seed, 2),
                    rec, False, "classic")
    beta, trace = _finish(alpha, p, schedule, epsilon, [ph], rec, np.maximum(p, 0), np.maximum(-p, 0))
    if strict and not trace.reached:
        raise TargetNotReached(trace)
    return beta, trace


def replay(alpha0: GraphFunction, trace: BalanceTrace) -> GraphFunction:
    """Re-run a recorded trace from ``alpha0``, checking every step bit-for-bit."""
    if not trace.recorded:
        raise ReplayMismatch("trace has no recorded steps")
    if trace.n != alpha0.n:
        raise ReplayMismatch(f"trace is for n={trace.n}, input has n={alpha0.n}")
    g = alpha0.graph
    p = np.zeros(alpha0.n)
    if trace.vertices.size and (trace.vertices.min() < 0 or trace.vertices.max() >= alpha0.n):
        raise ReplayMismatch("trace refers to vertices outside the input")
    bad = K.replay_block(trace.modes.astype(np.int64), trace.vertices.astype(np.int64),
                         trace.amounts.astype(np.float64), p, alpha0.w, g.src, g.dst,
                         g.out_ptr, g.out_edges, g.in_ptr, g.in_edges)
    if bad != K.ALL_MATCH:
        raise ReplayMismatch(f"step {bad} does not reproduce from this input")
    if not np.array_equal(p, trace.scaling):
        raise ReplayMismatch("final scaling differs from the recorded one")
    return rescale(alpha0, p)
