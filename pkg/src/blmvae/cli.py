"""Command-line surface: synth, train, eval, analyze-errors, analyze-masking,
report.

Every subcommand writes a config snapshot (config.json) next to its outputs
and derives all randomness from --seed, so any successful run can be
reproduced from the snapshot alone.  Exit codes: 0 success, 2 usage/config,
3 data or IO, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .analysis import (emit_report, error_breakdown, eval_results_from_json,
                       kappa_matrix, masking_analysis)
from .checkpoint import load_checkpoint, save_checkpoint
from .data import (DatasetSplit, SynthConfig, load_dataset, save_dataset,
                   split_dataset, synth_generate)
from .errors import ConfigError, DataError, NumericError, ShapeError, StoreError
from .store import read_store, write_store
from .training import TrainConfig, evaluate, multi_run, results_to_json


def _write_snapshot(out_dir: Path, subcommand: str, args: argparse.Namespace) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    snap = {k: v for k, v in vars(args).items() if k != "func"}
    snap["subcommand"] = subcommand
    snap["deterministic_kernels"] = os.environ.get("LD_DETERMINISTIC", "1") == "1"
    (out_dir / "config.json").write_text(json.dumps(snap, indent=2, default=str),
                                         encoding="utf-8")


def _load_instances(paths) -> list:
    """Load one or more JSONL files, inferring the dataset from the first line."""
    instances = []
    datasets = set()
    for path in paths:
        with open(path, encoding="utf-8") as fh:
            first = fh.readline().strip()
        if not first:
            raise DataError(f"{path}: empty dataset file")
        try:
            dataset = json.loads(first)["dataset"]
        except (json.JSONDecodeError, KeyError):
            raise DataError(f"{path}:1: cannot infer dataset from first line") from None
        datasets.add(dataset)
        instances.extend(load_dataset(path, dataset))
    if len(datasets) > 1:
        raise DataError(f"mixed datasets across input files: {sorted(datasets)}")
    return instances


def _prepare_split(instances, seed: int, train_types=None, test_type=None) -> DatasetSplit:
    """Plain 90:10/dev split, or the per-tier train/test matrix when type
    filters are given (each tier splits with the same seed; the test side
    always comes from a tier's held-out 10%)."""
    if not train_types and not test_type:
        return split_dataset(instances, seed)
    tiers: dict[str, list] = {}
    for inst in instances:
        tiers.setdefault(inst.context[0].type_tier, []).append(inst)
    train_types = train_types or sorted(tiers)
    missing = [t for t in train_types if t not in tiers]
    if missing:
        raise DataError(f"no instances of type {missing} in the input")
    splits = {t: split_dataset(tiers[t], seed) for t in sorted(tiers)}
    train, dev = [], []
    for t in train_types:
        train.extend(splits[t].train)
        dev.extend(splits[t].dev)
    if test_type:
        if test_type not in splits:
            raise DataError(f"no instances of type {test_type!r} in the input")
        test = splits[test_type].test
    else:
        test = [inst for t in train_types for inst in splits[t].test]
    return DatasetSplit(train=train, dev=dev, test=test, seed=seed)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_synth(args) -> int:
    out = Path(args.out)
    cfg = SynthConfig(count=args.count, dim=args.dim, noise=args.noise,
                      dataset=args.dataset, planted_factor=args.planted_factor)
    instances, store = synth_generate(cfg, args.seed)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(instances, out / "data.jsonl")
    write_store(store, out / "embeddings.emb")
    _write_snapshot(out, "synth", args)
    print(f"wrote {len(instances)} instances and {store.count} embeddings to {out}")
    return 0


def cmd_train(args) -> int:
    out = Path(args.out)
    instances = _load_instances(args.data)
    store = read_store(args.emb)
    split = _prepare_split(instances, args.seed, args.train_type, args.test_type)
    cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch, lr=args.lr,
                      runs=args.runs, seed=args.seed, model=args.model,
                      latent=args.latent, tau=args.tau, tau_anneal=args.tau_anneal,
                      beta=args.beta, channels=args.channels,
                      hidden=tuple(args.hidden), rows=args.rows, cols=args.cols,
                      select=args.select)
    cfg.validate()
    agg = multi_run(cfg, split, store, parallel_runs=args.parallel_runs)
    out.mkdir(parents=True, exist_ok=True)
    for r, ckpt in enumerate(agg.checkpoints):
        save_checkpoint(ckpt, out / f"run{r}.ckpt")
    (out / "results.json").write_text(
        json.dumps(results_to_json(cfg, agg), indent=2), encoding="utf-8")
    _write_snapshot(out, "train", args)
    print(f"F1 mean {agg.mean_f1:.4f} std {agg.std_f1:.6f} over {cfg.runs} run(s); "
          f"results in {out}")
    return 0


def cmd_eval(args) -> int:
    out = Path(args.out)
    ckpt = load_checkpoint(args.ckpt)
    instances = _load_instances([args.data])
    store = read_store(args.emb)
    if args.split != "all":
        split = split_dataset(instances, args.seed)
        instances = getattr(split, args.split)
    res = evaluate(ckpt, instances, store, run_seed=args.seed)
    out.mkdir(parents=True, exist_ok=True)
    (out / "eval.json").write_text(json.dumps({
        "f1": res.f1, "n_instances": res.n_instances, "dataset": res.dataset,
        "error_counts": res.per_label_error_counts, "split": args.split,
    }, indent=2), encoding="utf-8")
    _write_snapshot(out, "eval", args)
    print(f"F1 {res.f1:.4f} on {res.n_instances} instances ({args.split})")
    return 0


def cmd_analyze_errors(args) -> int:
    out = Path(args.out)
    summaries, breakdowns = [], {}
    for path in args.results:
        results_json = json.loads(Path(path).read_text("utf-8"))
        cfg = results_json["config"]
        setting = args.setting or f"{cfg['model']}_{cfg['latent']}"
        summaries.append({"setting": setting, "f1_mean": results_json["f1_mean"],
                          "f1_std": results_json["f1_std"]})
        breakdowns[setting] = error_breakdown(eval_results_from_json(results_json))
    written = emit_report(out, f1_summaries=summaries, breakdowns=breakdowns)
    _write_snapshot(out, "analyze-errors", args)
    print(f"wrote {len(written)} report files to {out}")
    return 0


def cmd_analyze_masking(args) -> int:
    out = Path(args.out)
    ckpt = load_checkpoint(args.ckpt)
    instances = _load_instances([args.data])
    store = read_store(args.emb)
    if args.split != "all":
        split = split_dataset(instances, args.seed)
        instances = getattr(split, args.split)
    runs = masking_analysis(ckpt, instances, store)
    km = kappa_matrix(runs)
    out.mkdir(parents=True, exist_ok=True)
    (out / "masking_runs.json").write_text(json.dumps({
        "variants": [r.variant for r in runs],
        "labels": {r.variant: r.labels for r in runs},
        "indices": {r.variant: r.indices for r in runs},
    }, indent=2), encoding="utf-8")
    written = emit_report(out, kappa=km)
    _write_snapshot(out, "analyze-masking", args)
    print(f"wrote kappa matrix over {len(runs)} variants to {out}")
    return 0


def cmd_report(args) -> int:
    out = Path(args.out)
    summaries, breakdowns = [], {}
    for path in args.results or []:
        results_json = json.loads(Path(path).read_text("utf-8"))
        cfg = results_json["config"]
        setting = f"{cfg['model']}_{cfg['latent']}"
        summaries.append({"setting": setting, "f1_mean": results_json["f1_mean"],
                          "f1_std": results_json["f1_std"]})
        breakdowns[setting] = error_breakdown(eval_results_from_json(results_json))
    km = None
    if args.masking:
        from .analysis import MaskingRun
        masking = json.loads(Path(args.masking).read_text("utf-8"))
        runs = [MaskingRun(variant=v, labels=masking["labels"][v],
                           indices=masking["indices"][v])
                for v in masking["variants"]]
        km = kappa_matrix(runs)
    written = emit_report(out, f1_summaries=summaries or None,
                          breakdowns=breakdowns or None, kappa=km)
    _write_snapshot(out, "report", args)
    print(f"wrote {len(written)} report files to {out}")
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blmvae",
        description="Train and analyze answer-prediction models over BLM data.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("synth", help="generate synthetic instances + embeddings")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--dataset", choices=["agreement_fr", "alt_atl", "atl_alt"],
                   default="agreement_fr")
    p.add_argument("--dim", type=int, default=768)
    p.add_argument("--planted-factor", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train one or more runs and report F1")
    p.add_argument("--data", nargs="+", required=True)
    p.add_argument("--emb", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model", choices=["baseline", "encdec"], default="encdec")
    p.add_argument("--latent", default="c5")
    p.add_argument("--epochs", type=int, default=120)
    p.add_argument("--batch", type=int, default=100)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--tau-anneal", action="store_true")
    p.add_argument("--channels", type=int, default=16)
    p.add_argument("--hidden", type=int, nargs=2, default=[5376, 1024])
    p.add_argument("--rows", type=int, default=32)
    p.add_argument("--cols", type=int, default=24)
    p.add_argument("--select", choices=["best", "last"], default="best")
    p.add_argument("--train-type", choices=["I", "II", "III"], nargs="+", default=None)
    p.add_argument("--test-type", choices=["I", "II", "III"], default=None)
    p.add_argument("--parallel-runs", type=int, default=1)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--emb", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", choices=["all", "train", "dev", "test"], default="all")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("analyze-errors", help="per-label error breakdown from results")
    p.add_argument("--results", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--setting", default=None)
    p.set_defaults(func=cmd_analyze_errors)

    p = sub.add_parser("analyze-masking", help="latent masking + kappa matrix")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--emb", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", choices=["all", "train", "dev", "test"], default="test")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_analyze_masking)

    p = sub.add_parser("report", help="combined report bundle")
    p.add_argument("--results", nargs="*", default=None)
    p.add_argument("--masking", default=None, help="masking_runs.json path")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error:usage: {e}", file=sys.stderr)
        return 2
    except (DataError, StoreError, ShapeError, KeyError, OSError) as e:
        print(f"error:data: {e}", file=sys.stderr)
        return 3
    except NumericError as e:
        print(f"error:numeric: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
