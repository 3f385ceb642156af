"""Operation counts of the two-phase method on the benchmark families, with log-log slopes."""
import argparse
import json

from balancekit.bench import run_bench
from balancekit.instances import FAMILIES


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--families", default=",".join(FAMILIES))
    ap.add_argument("--sizes", default="8,16,32,64")
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--rho", type=float, default=4.0)
    ap.add_argument("--epsilon", type=float, default=1e-6)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--json", help="write all results here")
    args = ap.parse_args()

    sizes = [int(s) for s in args.sizes.split(",")]
    results = []
    for fam in args.families.split(","):
        res = run_bench(fam, sizes, args.reps, args.rho, args.epsilon, args.seed, args.workers)
        results.append(res.to_dict())
        print(f"{fam:14s} slope {res.slope:6.3f}  medians " + " ".join(f"{int(m):>9d}" for m in res.medians))
        over = [s for s in res.samples if s.ops > s.budget or not s.reached]
        if over:
            print(f"  {len(over)} runs missed the target or exceeded the budget")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)


if __name__ == "__main__":
    main()
