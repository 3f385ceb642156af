"""Compare raising-phase operation counts under random, cyclic and greedy schedules.

The greedy schedule is outside the convergence guarantees and is shown for comparison only.
"""
import argparse

import numpy as np

from balancekit.balancer import ScheduleSpec, StopRule, compute_T, raising_phase
from balancekit.instances import DENSITIES, edge_count, sparse_random


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="8,16,32")
    ap.add_argument("--reps", type=int, default=10)
    ap.add_argument("--epsilon", type=float, default=1e-6)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(f"{'n':>4s} {'density':>8s} {'random':>10s} {'cyclic':>10s} {'greedy':>10s}")
    for n in (int(s) for s in args.sizes.split(",")):
        for density in DENSITIES:
            counts = {"random": [], "cyclic": [], "greedy": []}
            for rep in range(args.reps):
                rng = np.random.default_rng([args.seed, n, rep])
                alpha = sparse_random(n, edge_count(n, density), 10.0, rng)
                budget = max(1, 4 * compute_T(n, alpha.imbalance(), args.epsilon, 1.0 / n))
                stop = StopRule(args.epsilon, budget)
                for name, sch in (("random", ScheduleSpec.uniform(rep)), ("cyclic", ScheduleSpec.cyclic(0)),
                                  ("greedy", ScheduleSpec.greedy())):
                    _, tr = raising_phase(alpha, stop, sch, record=False)
                    # greedy scans all n vertices per operation; count it as one
                    counts[name].append(tr.ops)
            med = {k: int(np.median(v)) for k, v in counts.items()}
            print(f"{n:4d} {density:>8s} {med['random']:10d} {med['cyclic']:10d} {med['greedy']:10d}")


if __name__ == "__main__":
    main()
