"""Command line: gen-data, train, eval, bench, decode."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import torch

from .codec import RoleStrategy, decode, grid_from_json
from .events import GenConfig, Schema, default_schema, gen_synthetic, load_jsonl, save_jsonl
from .metrics import bench, evaluate, predict_corpus
from .model import GridEE, ModelConfig
from .trainer import LossConfig, TrainConfig, format_k_table, k_sweep, train


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def load_config(path) -> dict:
    """Flat key/value config: a JSON object, or ``key = value`` lines."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        obj = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            obj[key] = _parse_value(value)
    if not isinstance(obj, dict):
        raise ValueError(f"{path}: config must be a flat mapping")
    return obj


def _names(value) -> tuple[str, ...]:
    if isinstance(value, str):
        return tuple(v.strip() for v in value.split(",") if v.strip())
    return tuple(value)


def _split(config: dict, *classes) -> list:
    known = {f.name for cls in classes for f in fields(cls)}
    unknown = set(config) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return [cls(**{f.name: config[f.name] for f in fields(cls) if f.name in config}) for cls in classes]


def cmd_gen_data(args) -> int:
    config = load_config(args.config)
    if "event_types" in config or "role_types" in config:
        schema = Schema(_names(config.pop("event_types", "")), _names(config.pop("role_types", "")))
    else:
        schema = default_schema(int(config.pop("num_event_types", 4)), int(config.pop("num_role_types", 3)))
    (gen_cfg,) = _split(config, GenConfig)
    corpus = gen_synthetic(gen_cfg, schema)
    save_jsonl(corpus, args.out)
    print(f"wrote {len(corpus)} sentences to {args.out}")
    return 0


def _train_configs(config: dict):
    config = dict(config)
    loss_keys = {"delta": config.pop("delta", 0.0), "k": config.pop("k", 6)}
    model_cfg, train_cfg = _split(config, ModelConfig, TrainConfig)
    return model_cfg, LossConfig(**loss_keys), train_cfg


def cmd_train(args) -> int:
    model_cfg, loss_cfg, train_cfg = _train_configs(load_config(args.config) if args.config else {})
    data = Path(args.data)
    train_corpus = load_jsonl(data / "train.jsonl")
    dev_path = data / "dev.jsonl"
    dev_corpus = load_jsonl(dev_path, train_corpus.schema) if dev_path.exists() else None
    out = Path(args.out)
    if args.k_sweep:
        if dev_corpus is None:
            raise SystemExit("k-sweep needs dev.jsonl in the data directory")
        rows = k_sweep(train_corpus, dev_corpus, model_config=model_cfg, train_config=train_cfg,
                       delta=loss_cfg.delta)
        table = format_k_table(rows)
        out.with_suffix(".ksweep.tsv").write_text(table + "\n", encoding="utf-8")
        print(table)
        return 0
    log_path = args.log or out.with_suffix(".log.jsonl")
    result = train(train_corpus, dev_corpus, model_cfg, loss_cfg, train_cfg, log_path=log_path, ckpt_path=out)
    print(json.dumps({"best_epoch": result.best_epoch, "best_dev_tc_f1": result.best_tc_f1,
                      "checkpoint": str(out), "log": str(log_path)}))
    return 0


def cmd_eval(args) -> int:
    model = GridEE.load(args.ckpt)
    corpus = load_jsonl(args.data, model.schema)
    predicted = predict_corpus(model, corpus.sentences, delta=args.delta)
    report = evaluate(predicted, [s.events for s in corpus.sentences])
    Path(args.report).write_text(json.dumps(report.to_json(), indent=2), encoding="utf-8")
    print(report.summary())
    return 0


def cmd_bench(args) -> int:
    model = GridEE.load(args.ckpt)
    corpus = load_jsonl(args.data, model.schema)
    rates = {}
    for size in (int(b) for b in args.batch.split(",")):
        rates[size] = bench(model, corpus.sentences, size)
        print(f"batch {size}: {rates[size]:.1f} sent/s")
    return 0


def cmd_decode(args) -> int:
    grid, schema = grid_from_json(json.loads(Path(args.grid).read_text(encoding="utf-8")))
    events = decode(grid, RoleStrategy.parse(args.strategy), schema)
    out = [
        {"type": e.event_type, "trigger": [e.trigger.start, e.trigger.end],
         "args": [{"role": a.role, "span": [a.span.start, a.span.end]} for a in e.arguments]}
        for e in events
    ]
    print(json.dumps(out))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridee", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic corpus")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a model on <data>/train.jsonl")
    p.add_argument("--config")
    p.add_argument("--data", required=True, help="directory with train.jsonl and optional dev.jsonl")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--log", help="training log (JSONL); default <out>.log.jsonl")
    p.add_argument("--k-sweep", action="store_true", help="train for K = 2..min(8, M+4) and print TC F1 per K")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--delta", type=float, default=0.0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="inference throughput")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--batch", default="1,8")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("decode", help="decode a JSON score grid")
    p.add_argument("--grid", required=True)
    p.add_argument("--strategy", default="tw-aw")
    p.set_defaults(func=cmd_decode)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    torch.set_num_threads(1)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
