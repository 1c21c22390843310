"""Train the tiny preset on a 50-sentence corpus until it reproduces the training labels."""

import argparse
import json
from dataclasses import asdict

from racapnet.experiments import overfit


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--target", type=float, default=0.95)
    ap.add_argument("--max-epochs", type=int, default=200)
    ap.add_argument("--out", help="write results as JSON")
    args = ap.parse_args()

    results = []
    for seed in args.seeds:
        r = overfit(seed, args.target, args.max_epochs)
        results.append(asdict(r))
        print(f"seed {seed}: match {r.match:.3f} after {r.epochs} epochs, {r.seconds:.1f}s, reached={r.reached}")
    print(f"{sum(r['reached'] for r in results)}/{len(results)} seeds reached {args.target}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(results, fh, indent=2)


if __name__ == "__main__":
    main()
