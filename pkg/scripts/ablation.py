"""Held-out PR-AUC with each disagreement term switched on or off, optionally with a constant query."""

import argparse
import json

from racapnet.experiments import ablation


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--epochs", type=int, default=4)
    ap.add_argument("--batch-size", type=int, default=20)
    ap.add_argument("--constant-query", action="store_true", help="replace the entity-pair query by a learned vector")
    ap.add_argument("--out")
    args = ap.parse_args()

    table = {}
    for seed in args.seeds:
        table[seed] = ablation(seed, args.epochs, args.batch_size, relation_query=not args.constant_query)
        print(f"seed {seed}: " + "  ".join(f"{k} {v:.4f}" for k, v in table[seed].items()), flush=True)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(table, fh, indent=2)


if __name__ == "__main__":
    main()
