"""Command line entry point.

    microarray-classify run --train train.csv --test test.csv --out results/
    microarray-classify synth --out data/
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import classifiers
from .dataset import save_dataset
from .pipeline import (
    EXIT_CONFIG,
    EXIT_OK,
    ConfigError,
    PipelineConfig,
    PipelineError,
    emit_report,
    run_pipeline,
)
from .synthetic import make_planted_dataset

log = logging.getLogger("microarray_classify")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_overrides(items) -> dict:
    """``["mlp.epochs=200", "random-forest.n_trees=50"]`` -> nested dict."""
    params: dict = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        name, dot, param = key.partition(".")
        if not sep or not dot or not name or not param:
            raise ConfigError(f"--set expects <classifier>.<param>=<value>, got {item!r}")
        params.setdefault(name, {})[param] = _parse_value(value)
    return params


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_config(args) -> PipelineConfig:
    base: dict = {}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(base, dict):
            raise ConfigError("config file must hold a JSON object")
    for key in ("train", "test", "alpha", "seed", "out", "jobs"):
        value = getattr(args, key)
        if value is not None:
            base[key] = value
    if args.classifiers is not None:
        names = _csv_list(args.classifiers)
        base["classifiers"] = list(classifiers.CANONICAL_NAMES) if names == ["all"] else names
    if args.scale_factors is not None:
        try:
            base["scale_factors"] = [float(c) for c in _csv_list(args.scale_factors)]
        except ValueError as exc:
            raise ConfigError(f"bad --scale-factors: {exc}") from exc
    overrides = parse_overrides(args.set)
    if overrides:
        params = {k: dict(v) for k, v in base.get("params", {}).items()}
        for name, kv in overrides.items():
            params.setdefault(name, {}).update(kv)
        base["params"] = params
    try:
        return PipelineConfig.from_dict(base).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_run(args) -> int:
    config = build_config(args)
    report = run_pipeline(config)
    paths = emit_report(report, config.out)
    for name, r in report.results.items():
        m = r.test_metrics
        print(f"{name:15s} CCS {m.ccs:3d}  ICS {m.ics:3d}  accuracy {m.accuracy:.4f}")
    print(
        f"genes: {report.selection['n_genes_before']} -> {report.selection['n_genes_after']} "
        f"(alpha={report.selection['alpha']}); wrote {len(paths)} files to {config.out}"
    )
    return EXIT_OK


def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train, planted = make_planted_dataset(
        n_genes=args.genes, n_planted=args.planted, gap=args.gap,
        baseline=args.baseline, scale=args.scale, seed=args.seed,
    )
    test, _ = make_planted_dataset(
        n_genes=args.genes, n_tumor=25, n_normal=9, gap=args.gap, baseline=args.baseline,
        scale=args.scale, seed=args.seed + 1, planted=planted,
    )
    save_dataset(train, out / "train.csv")
    save_dataset(test, out / "test.csv")
    print(f"wrote {out / 'train.csv'} {train.shape} and {out / 'test.csv'} {test.shape}")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="microarray-classify", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="filter genes, train classifiers, write reports")
    run.add_argument("--config", help="JSON file with the same keys as the flags")
    run.add_argument("--train")
    run.add_argument("--test")
    run.add_argument("--alpha", type=float)
    run.add_argument(
        "--classifiers",
        help=f"comma list or 'all' ({','.join(classifiers.CANONICAL_NAMES)})",
    )
    run.add_argument("--seed", type=int)
    run.add_argument("--scale-factors", help="comma list, default 0.5,2,0.1,10,0.05,20")
    run.add_argument("--out")
    run.add_argument("--jobs", type=int)
    run.add_argument("--set", action="append", metavar="CLF.PARAM=VALUE")
    run.set_defaults(func=cmd_run)

    synth = sub.add_parser("synth", help="write a synthetic planted-gene train/test pair")
    synth.add_argument("--out", required=True)
    synth.add_argument("--genes", type=int, default=2000)
    synth.add_argument("--planted", type=int, default=40)
    synth.add_argument("--gap", type=float, default=1.5)
    synth.add_argument("--baseline", type=float, default=1000.0)
    synth.add_argument("--scale", type=float, default=100.0)
    synth.add_argument("--seed", type=int, default=0)
    synth.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
