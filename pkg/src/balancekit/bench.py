"""Operation counts of the two-phase method as a function of n."""
from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .balancer import ScheduleSpec, compute_T, two_phase_balance
from . import instances

MIN_REPS = 5


@dataclass
class BenchSample:
    size: int
    rep: int
    ops: int
    nontrivial: int
    reached: bool
    budget: int  # 2 * (raising + lowering budgets)


@dataclass
class BenchResult:
    family: str
    sizes: list[int]
    reps: int
    rho: float
    epsilon: float
    seed: int
    medians: list[float]
    slope: float
    intercept: float
    samples: list[BenchSample]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["samples"] = [asdict(s) for s in self.samples]
        return d

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["size", "rep", "ops", "nontrivial", "reached", "budget"])
        for s in self.samples:
            wr.writerow([s.size, s.rep, s.ops, s.nontrivial, int(s.reached), s.budget])
        return buf.getvalue()


def loglog_fit(sizes, values) -> tuple[float, float]:
    """Least-squares slope and intercept of ln(values) against ln(sizes)."""
    x = np.log(np.asarray(sizes, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def _one(job) -> BenchSample:
    family, n, rep, rho, epsilon, seed = job
    rng = np.random.default_rng([seed, n, rep])
    alpha = instances.make(family, n, rho, rng)
    _, trace = two_phase_balance(alpha, epsilon, ScheduleSpec.uniform(seed * 1_000_003 + n * 1009 + rep),
                                 record=False)
    T = compute_T(n, alpha.imbalance(), epsilon, 1.0 / n)
    return BenchSample(n, rep, trace.ops, trace.nontrivial, trace.reached, 2 * 2 * T)


def run_bench(family: str, sizes, reps: int = MIN_REPS, rho: float = 4.0, epsilon: float = 1e-6,
              seed: int = 0, workers: int = 1) -> BenchResult:
    if reps < MIN_REPS:
        raise ValueError(f"need at least {MIN_REPS} repetitions per size")
    sizes = sorted(int(s) for s in sizes)
    jobs = [(family, n, rep, rho, epsilon, seed) for n in sizes for rep in range(reps)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            samples = list(ex.map(_one, jobs))
    else:
        samples = [_one(j) for j in jobs]
    samples.sort(key=lambda s: (s.size, s.rep))
    medians = [float(np.median([s.ops for s in samples if s.size == n])) for n in sizes]
    slope, intercept = loglog_fit(sizes, medians) if len(sizes) > 1 else (float("nan"), float("nan"))
    return BenchResult(family, sizes, reps, rho, epsilon, seed, medians, slope, intercept, samples)
