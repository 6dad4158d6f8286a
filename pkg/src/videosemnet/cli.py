"""Command-line entry point.

Subcommands: gen-data, train, embed, eval, gradcheck, memtrace, report.
Exit codes: 0 success, 1 validation/usage error, 2 runtime error.
Precedence for settings: flags > config file > defaults.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import audit, corpus, evaluation, memory, model as model_mod
from .config import RunConfig, load_run_config
from .errors import ConfigError, RangeError, SchemaError, VideoSemNetError

log = logging.getLogger("videosemnet")


def _setup_logging() -> None:
    level = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("SEMNET_LOG", "info").lower(), logging.INFO
    )
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _load_config(args) -> RunConfig:
    cfg = load_run_config(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
        cfg.train.seed = args.seed
        cfg.synthetic.seed = args.seed
    if getattr(args, "variant", None):
        cfg.variant = args.variant
    if getattr(args, "read", None):
        cfg.train.read_mode = args.read
    cfg.validate()
    return cfg


def _file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def cmd_gen_data(args) -> int:
    cfg = _load_config(args)
    manifest = corpus.generate_synthetic(cfg.synthetic, args.out)
    log.info("wrote %s (%d items)", manifest, cfg.synthetic.num_items)
    print(manifest)
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)
    items = corpus.load_manifest(args.manifest)
    result = model_mod.train(items, cfg.train, cfg.variant, args.out, config_hash=cfg.config_hash())
    log.info(
        "trained %s for %d epochs; first/last mean loss %.4f / %.4f",
        cfg.variant,
        cfg.train.epochs,
        result.epoch_losses[0],
        result.epoch_losses[-1],
    )
    print(result.checkpoint_path)
    return 0


def cmd_embed(args) -> int:
    items = corpus.load_manifest(args.manifest)
    net = model_mod.Model.load_checkpoint(args.checkpoint)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    model_mod.embed_corpus(items, net, out_path=out)
    log.info("wrote embeddings for %d items to %s", len(items), out)
    print(out)
    return 0


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    items = corpus.load_manifest(args.manifest)
    net = model_mod.Model.load_checkpoint(args.checkpoint)
    embeddings = model_mod.embed_corpus(items, net)
    result = {
        "variant": net.variant,
        "task": args.task,
        "seed": cfg.seed,
        "checkpoint_hash": _file_hash(args.checkpoint),
        "timestamp": time.time(),
    }
    if args.task == "retrieval":
        plots = model_mod.encode_plots(items, net)
        for k in (1, 5, min(10, len(items))):
            result[f"recall_at_{k}"] = model_mod.retrieval_eval(embeddings, plots, k)
    else:
        train_items, test_items = corpus.split_train_test(items, fraction=0.8, seed=cfg.seed)
        task = evaluation.evaluate_task(embeddings, items, train_items, test_items, args.task, probe_seed=cfg.seed)
        result["weighted_f1"] = task.weighted_f1
        result["per_class_f1"] = {str(k): v for k, v in task.per_class.items()}
        result["confusion"] = {
            "labels": [str(l) for l in task.confusion.labels],
            "counts": task.confusion.counts.tolist(),
        }
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(result, indent=2), encoding="utf-8")
    log.info("task %s: %s", args.task, {k: v for k, v in result.items() if k.startswith(("weighted", "recall"))})
    print(out)
    return 0


def cmd_gradcheck(args) -> int:
    cfg = _load_config(args)
    err, elapsed = audit.gradcheck_full_model(
        cfg.train,
        variant=cfg.variant,
        max_entries_per_param=args.entries_per_param,
    )
    print(f"max relative error {err:.3e} ({elapsed:.1f}s, variant={cfg.variant}, read={cfg.train.read_mode})")
    if err >= 1e-4:
        log.error("gradient audit FAILED: %.3e >= 1e-4", err)
        return 2
    return 0


def cmd_memtrace(args) -> int:
    cfg = _load_config(args)
    trace = audit.run_memtrace(
        dim=cfg.train.dim,
        slots=cfg.train.memory_slots,
        steps=args.steps,
        seed=cfg.seed,
        read_mode=cfg.train.read_mode,
        r_max=cfg.train.r_max,
    )
    if args.verify:
        expected = memory.load_trace(args.verify)
        actual = [json.loads(rec.to_json()) for rec in trace]
        if actual != expected:
            log.error("memory trace replay diverges from %s", args.verify)
            return 2
        print(f"trace verified against {args.verify} ({len(trace)} cycles)")
        return 0
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    memory.dump_trace(trace, out)
    print(out)
    return 0


def cmd_report(args) -> int:
    rows = {}
    for path in args.results:
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise SchemaError(f"{path}: cannot read results file: {exc}") from None
        for field in ("variant", "task", "timestamp"):
            if field not in obj:
                raise SchemaError(f"{path}: results file missing field {field!r}")
        key = (obj["variant"], obj["task"])
        if key in rows and rows[key]["timestamp"] >= obj["timestamp"]:
            log.warning("duplicate results for %s; keeping newer entry", key)
            continue
        if key in rows:
            log.warning("duplicate results for %s; keeping newer entry", key)
        rows[key] = obj
    variants = sorted({k[0] for k in rows})
    tasks = sorted({k[1] for k in rows})

    def cell(variant, task):
        obj = rows.get((variant, task))
        if obj is None:
            return "-"
        if "weighted_f1" in obj:
            return f"{obj['weighted_f1']:.3f}"
        if "recall_at_1" in obj:
            return f"{obj['recall_at_1']:.3f}"
        return "-"

    width = max([len("variant")] + [len(v) for v in variants])
    header = "variant".ljust(width) + "".join(f"  {t:>12}" for t in tasks)
    print(header)
    for v in variants:
        print(v.ljust(width) + "".join(f"  {cell(v, t):>12}" for t in tasks))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="videosemnet", description=__doc__)
    sub = p.add_subparsers(dest="command")

    def common(sp, *flags):
        if "config" in flags:
            sp.add_argument("--config", help="JSON run config")
        if "seed" in flags:
            sp.add_argument("--seed", type=int, default=None)
        if "variant" in flags:
            sp.add_argument("--variant", choices=("ssm", "slm", "semnet"), default=None)
        if "read" in flags:
            sp.add_argument("--read", choices=("hard", "soft"), default=None)

    sp = sub.add_parser("gen-data", help="generate a synthetic corpus")
    common(sp, "config", "seed")
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_gen_data)

    sp = sub.add_parser("train", help="train a model variant")
    common(sp, "config", "seed", "variant", "read")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", required=True, help="checkpoint/loss-curve directory")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("embed", help="embed a corpus with a checkpoint")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--out", required=True, help="output VSNT file")
    sp.set_defaults(func=cmd_embed)

    sp = sub.add_parser("eval", help="evaluate embeddings on a downstream task")
    common(sp, "config", "seed")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--task", choices=("genre", "rating", "retrieval"), required=True)
    sp.add_argument("--out", required=True, help="results JSON path")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("gradcheck", help="finite-difference audit of the full model")
    common(sp, "config", "seed", "variant", "read")
    sp.add_argument("--entries-per-param", type=int, default=40, help="sampled entries per parameter (None=all)")
    sp.set_defaults(func=cmd_gradcheck)

    sp = sub.add_parser("memtrace", help="dump or verify a memory-module trace")
    common(sp, "config", "seed", "read")
    sp.add_argument("--steps", type=int, default=64)
    sp.add_argument("--out", default="memtrace.jsonl")
    sp.add_argument("--verify", default=None, help="existing trace to replay against")
    sp.set_defaults(func=cmd_memtrace)

    sp = sub.add_parser("report", help="tabulate results files by variant and task")
    sp.add_argument("results", nargs="+")
    sp.set_defaults(func=cmd_report)

    return p


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except (SchemaError, ConfigError, RangeError) as exc:
        log.error("%s", exc)
        return 1
    except FileNotFoundError as exc:
        log.error("file not found: %s", exc.filename or exc)
        return 1
    except VideoSemNetError as exc:
        log.error("%s", exc)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.error("unexpected failure: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
