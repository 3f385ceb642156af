"""Audit every height/momentum inequality along raising runs on random graphs.

Prints, per check, the worst slack in units of the oracle tolerance
(negative values are still within the allowance as long as they stay above -10).
"""
import argparse
from collections import defaultdict

import numpy as np

from balancekit.balancer import ScheduleSpec, StopRule, raising_phase
from balancekit.diagnostics import potential_series, raising_limit
from balancekit.instances import sparse_random


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", type=int, default=100)
    ap.add_argument("--max-n", type=int, default=12)
    ap.add_argument("--samples", type=int, default=30, help="audited states per run")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    worst = defaultdict(lambda: np.inf)
    states = failures = 0
    for i in range(args.runs):
        n = int(rng.integers(2, args.max_n + 1))
        m = int(rng.integers(n, 3 * n + 1))
        alpha = sparse_random(n, m, float(rng.choice([1.0, 5.0, 10.0])), rng, loops=bool(i % 2))
        lim = raising_limit(alpha)
        _, tr = raising_phase(alpha, StopRule(1e-13 * alpha.scale(), 10**7), ScheduleSpec.uniform(i))
        series = potential_series(tr, alpha, max(1, tr.ops // args.samples), limit=lim, audit=True)
        for rep in series.audits:
            states += 1
            failures += not rep.passed
            for c in rep.checks:
                worst[c.name] = min(worst[c.name], c.slack / lim.oracle_epsilon)
    print(f"{states} states, {failures} failing")
    for name, s in worst.items():
        print(f"  {name:45s} {s:10.4g}")


if __name__ == "__main__":
    main()
