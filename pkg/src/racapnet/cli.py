"""Command line: generate, train, eval, inspect, gradcheck."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, TrainConfig
from .data import FormatError, SynthSpec, bags, generate, load_nyt, read_corpus_dir, write_corpus
from .evaluation import gold_pairs, pr_curve, score_bags, summarize, write_pr_csv, write_summary
from .gradcheck import report, run_gradcheck
from .train import TrainingError, load_checkpoint, train

PRESETS = {"default": TrainConfig, "tiny": TrainConfig.tiny, "gradcheck": TrainConfig.gradcheck}


def _config(args) -> TrainConfig:
    if args.config:
        return TrainConfig.from_json(args.config)
    return PRESETS[args.preset]()


def _split_for_model(model, data_dir: Path, split: str):
    path = data_dir / f"{split}.txt"
    if not path.exists():
        raise FileNotFoundError(f"{path} does not exist")
    return load_nyt(path, split="test", relations=model.relations, vocab=model.vocab, max_len=model.cfg.model.max_len)


def cmd_generate(args) -> int:
    spec = SynthSpec.from_json(args.spec) if args.spec else SynthSpec()
    out = write_corpus(generate(spec), args.out)
    (out / "spec.json").write_text(json.dumps(spec.to_dict(), indent=2))
    print(f"wrote corpus to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    splits = read_corpus_dir(args.data, max_len=cfg.model.max_len)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg.to_json(out / "config.json")
    result = train(splits.train, cfg, test=splits.test, out_dir=out)
    last = result.history[-1] if result.history else {}
    print(json.dumps({"final": last, "best_heldout_auc": result.best_auc}))
    return 0


def cmd_eval(args) -> int:
    model = load_checkpoint(args.model)
    corpus = _split_for_model(model, Path(args.data), args.split)
    grouped = bags(corpus)
    preds = score_bags(model.norms, grouped, model.relation_of_capsule, model.cfg.aggregate)
    gold = gold_pairs(grouped)
    summary = summarize(preds, gold)
    if args.pr:
        write_pr_csv(pr_curve(preds, gold), args.pr)
    if args.summary:
        write_summary(summary, args.summary)
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_inspect(args) -> int:
    model = load_checkpoint(args.model)
    corpus = _split_for_model(model, Path(args.data), args.split)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = [model.relations[r] for r in model.relation_of_capsule]
    with open(out / "attention.jsonl", "w") as att_fh, open(out / "coupling.jsonl", "w") as cpl_fh:
        for idx, inst in enumerate(corpus.instances[: args.limit]):
            cache = model.inspect(inst)
            base = {"index": idx, "bag_key": list(inst.bag_key), "tokens": inst.tokens}
            att_fh.write(json.dumps({**base, "weights": cache.attention.weights.tolist()}) + "\n")
            cpl_fh.write(
                json.dumps(
                    {
                        **base,
                        "capsules": names,
                        "coupling": cache.routing.coupling.tolist(),
                        "norms": model.norms(inst).tolist(),
                    }
                )
                + "\n"
            )
    print(f"wrote {min(len(corpus), args.limit)} instances to {out}")
    return 0


def cmd_gradcheck(args) -> int:
    cfg = _config(args)
    results = run_gradcheck(cfg, seed=args.seed, length=args.length)
    print(report(results))
    failed = [r for r in results if not r.ok]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 0 if not failed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="racapnet")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic corpus")
    p.add_argument("--spec")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    def config_args(p, preset):
        p.add_argument("--config", help="TrainConfig JSON; overrides --preset")
        p.add_argument("--preset", choices=sorted(PRESETS), default=preset)

    p = sub.add_parser("train", help="train on a corpus directory")
    config_args(p, "default")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="held-out PR curve and P@N")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--pr")
    p.add_argument("--summary")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("inspect", help="dump attention weights and coupling coefficients")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out", required=True)
    p.add_argument("--limit", type=int, default=1000)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("gradcheck", help="finite-difference check of every parameter")
    config_args(p, "gradcheck")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--length", type=int, default=6)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FormatError, TrainingError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
