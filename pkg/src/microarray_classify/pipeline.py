"""End-to-end orchestration: load, filter genes, train, evaluate, report."""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import classifiers
from .core import SeedSpec, TrainingError
from .dataset import DatasetError, ExpressionDataset, load_dataset
from .evaluation import (
    DEFAULT_FACTORS,
    POSITIVE_LABEL,
    FittedPipeline,
    MetricSet,
    RobustnessReport,
    evaluate,
    mean_metrics_csv,
    scale_sweep,
    sensitivity_specificity_csv,
)
from .preprocess import select_genes

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_TRAINING = 4


class PipelineError(RuntimeError):
    """Stage failure; ``exit_code`` follows the CLI convention."""

    def __init__(self, stage: str, message: str, exit_code: int):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.exit_code = exit_code


class ConfigError(PipelineError):
    def __init__(self, message: str):
        super().__init__("config", message, EXIT_CONFIG)


@dataclass
class PipelineConfig:
    train: str | None = None
    test: str | None = None
    alpha: float = 0.001
    classifiers: list[str] = field(default_factory=lambda: list(classifiers.CANONICAL_NAMES))
    seed: int = 0
    scale_factors: list[float] = field(default_factory=lambda: list(DEFAULT_FACTORS))
    out: str = "results"
    params: dict[str, dict] = field(default_factory=dict)
    jobs: int = 1
    positive_label: str = POSITIVE_LABEL

    def validate(self) -> "PipelineConfig":
        if not 0.0 < float(self.alpha) <= 1.0:
            raise ConfigError(f"alpha must lie in (0, 1], got {self.alpha}")
        bad = [c for c in self.classifiers if c not in classifiers.TRAINERS]
        if bad:
            raise ConfigError(
                f"unknown classifiers {bad}; choose from {', '.join(classifiers.CANONICAL_NAMES)}"
            )
        if len(set(self.classifiers)) != len(self.classifiers):
            raise ConfigError("classifier listed twice")
        for name, overrides in self.params.items():
            if name not in classifiers.TRAINERS:
                raise ConfigError(f"parameters given for unknown classifier {name!r}")
            unknown = set(overrides) - set(classifiers.hyperparameters(name))
            if unknown:
                raise ConfigError(f"{name}: unknown hyperparameters {sorted(unknown)}")
        if any(not float(c) > 0 for c in self.scale_factors):
            raise ConfigError("scale factors must be positive")
        if int(self.jobs) < 1:
            raise ConfigError("jobs must be >= 1")
        return self

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        d = dict(d)
        if "scale_factors" in d:
            d["scale_factors"] = [float(c) for c in d["scale_factors"]]
        if "classifiers" in d:
            d["classifiers"] = list(d["classifiers"])
        return cls(**d)


@dataclass
class ClassifierResult:
    name: str
    train_metrics: MetricSet
    test_metrics: MetricSet
    robustness: RobustnessReport | None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "display_name": classifiers.DISPLAY_NAMES[self.name],
            "train": self.train_metrics.to_dict(),
            "test": self.test_metrics.to_dict(),
            "robustness": self.robustness.to_dict() if self.robustness else None,
            "extra": self.extra,
        }


@dataclass
class RunReport:
    config: PipelineConfig
    selection: dict
    results: dict[str, ClassifierResult]
    ga_trace: list[dict] | None
    timings: dict[str, float]

    def to_dict(self, include_timings: bool = True) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "seed": self.config.seed,
            "config": self.config.to_dict(),
            "selection": self.selection,
            "classifiers": {name: r.to_dict() for name, r in self.results.items()},
            "ga_trace": self.ga_trace,
        }
        if include_timings:
            d["timings"] = self.timings
        return json.loads(json.dumps(d))

    def canonical_json(self) -> str:
        """JSON without wall-clock timings: identical across reruns with one seed."""
        return json.dumps(self.to_dict(include_timings=False), sort_keys=True, indent=2)


def _ga_extra(model) -> dict:
    return {"best_fitness": model.best_fitness}


EXTRA = {
    "mlp": lambda m: {"train_rmse": m.train_rmse},
    "ga": _ga_extra,
    "bayes-net": lambda m: {"n_feature_edges": len(m.edges())},
    "decision-table": lambda m: {"features": list(m.features), "loo_accuracy": m.loo_score},
    "logit-boost": lambda m: {"n_stumps": len(m.stumps)},
}


def _train_one(name, config, train_n, test_n, test_raw, selection):
    seed = SeedSpec(int(config.seed))
    t0 = time.perf_counter()
    try:
        model = classifiers.train(name, train_n, config.params.get(name, {}), seed)
    except (TrainingError, ValueError, ArithmeticError) as exc:
        raise PipelineError(f"train:{name}", str(exc), EXIT_TRAINING) from exc
    t1 = time.perf_counter()
    train_m, _ = evaluate(model, train_n, config.positive_label)
    test_m, _ = evaluate(model, test_n, config.positive_label)
    sweep = None
    if config.scale_factors:
        sweep = scale_sweep(
            FittedPipeline(selection, model), test_raw, config.scale_factors, config.positive_label
        )
    t2 = time.perf_counter()
    extra = EXTRA.get(name, lambda m: {})(model)
    log.info("%s: test accuracy %.4f", name, test_m.accuracy)
    return model, ClassifierResult(name, train_m, test_m, sweep, extra), t1 - t0, t2 - t1


def run_pipeline(
    config: PipelineConfig,
    train: ExpressionDataset | None = None,
    test: ExpressionDataset | None = None,
) -> RunReport:
    """Run the whole pipeline; datasets may be passed in instead of paths."""
    config.validate()
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    try:
        if train is None:
            if not config.train:
                raise ConfigError("no training file given")
            train = load_dataset(config.train)
        if test is None and config.test:
            test = load_dataset(config.test)
    except DatasetError as exc:
        raise PipelineError("load", str(exc), EXIT_DATA) from exc
    if test is None:
        raise ConfigError("no test file given")
    if set(train.classes) != set(test.classes):
        raise PipelineError("load", f"label sets differ: {train.classes} vs {test.classes}", EXIT_DATA)
    if config.classifiers and config.positive_label not in train.classes:
        raise ConfigError(f"positive label {config.positive_label!r} not among {train.classes}")
    timings["load"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    try:
        selection = select_genes(train, config.alpha)
        train_n = selection.transform(train)
        test_n = selection.transform(test)
    except DatasetError as exc:
        raise PipelineError("select", str(exc), EXIT_DATA) from exc
    timings["select"] = time.perf_counter() - t0
    summary = {
        "n_genes_before": train.n_genes,
        "n_genes_after": int(selection.keep.size),
        "alpha": selection.alpha,
        "df": selection.ttest.df,
        "kept_gene_ids": list(selection.kept_gene_ids),
        "train_samples": train.n_samples,
        "test_samples": test.n_samples,
    }
    log.info("selected %d of %d genes", selection.keep.size, train.n_genes)

    results: dict[str, ClassifierResult] = {}
    ga_trace = None
    if config.classifiers:
        if selection.keep.size == 0:
            raise PipelineError("select", "no gene passed the significance threshold", EXIT_DATA)
        args = (config, train_n, test_n, test, selection)
        if config.jobs > 1:
            with ThreadPoolExecutor(max_workers=config.jobs) as pool:
                futures = [pool.submit(_train_one, name, *args) for name in config.classifiers]
                outcomes = [f.result() for f in futures]
        else:
            outcomes = [_train_one(name, *args) for name in config.classifiers]
        for name, (model, result, t_train, t_eval) in zip(config.classifiers, outcomes):
            results[name] = result
            timings[f"train:{name}"] = t_train
            timings[f"evaluate:{name}"] = t_eval
            if name == "ga":
                ga_trace = [
                    {"generation": g, "best_mse": b, "avg_mse": a} for g, b, a in model.trace_rows()
                ]
    return RunReport(config, summary, results, ga_trace, timings)


# -- emission ---------------------------------------------------------------


def _csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def performance_table(report: RunReport) -> str:
    pos = report.config.positive_label
    first = next(iter(report.results.values()), None)
    neg = next((k for k in first.test_metrics.tpr if k != pos), "") if first else ""
    rows = [["technique", "CCS", "ICS", "accuracy", "RMSE",
             f"TPR ({pos})", f"TPR ({neg})", f"FPR ({pos})", f"FPR ({neg})"]]
    for name, r in report.results.items():
        m = r.test_metrics
        rows.append([
            name, m.ccs, m.ics, repr(m.accuracy), repr(m.rmse),
            repr(m.tpr[pos]), repr(m.tpr[neg]), repr(m.fpr[pos]), repr(m.fpr[neg]),
        ])
    return _csv(rows)


def emit_report(report: RunReport, out_dir, formats=("json", "csv", "plot-data")) -> list[Path]:
    """Write the report files into ``out_dir`` and return their paths."""
    out = Path(out_dir)
    files: dict[str, str] = {}
    if "json" in formats:
        files["report.json"] = json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"
    sweeps = {n: r.robustness for n, r in report.results.items() if r.robustness is not None}
    if "csv" in formats:
        files["selection.csv"] = _csv(
            [["key", "value"]]
            + [[k, report.selection[k]] for k in ("n_genes_before", "n_genes_after", "alpha", "df")]
        )
        if report.results:
            files["performance.csv"] = performance_table(report)
        if sweeps:
            files["sensitivity_specificity.csv"] = sensitivity_specificity_csv(sweeps)
            files["mean_sensitivity_specificity.csv"] = mean_metrics_csv(sweeps, ("sensitivity", "specificity"))
            files["mean_precision_accuracy.csv"] = mean_metrics_csv(sweeps, ("precision", "accuracy"))
    if "plot-data" in formats and report.results:
        files["plot_ccs_ics.csv"] = _csv(
            [["technique", "ccs", "ics"]]
            + [[n, r.test_metrics.ccs, r.test_metrics.ics] for n, r in report.results.items()]
        )
        files["plot_accuracy.csv"] = _csv(
            [["technique", "accuracy"]]
            + [[n, repr(r.test_metrics.accuracy)] for n, r in report.results.items()]
        )
        if report.ga_trace is not None:
            files["plot_ga_fitness.csv"] = _csv(
                [["generation", "best_mse", "avg_mse"]]
                + [[t["generation"], repr(t["best_mse"]), repr(t["avg_mse"])] for t in report.ga_trace]
            )
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for fname, text in files.items():
            path = out / fname
            path.write_text(text, encoding="utf-8")
            paths.append(path)
    except OSError as exc:
        raise PipelineError("emit", f"cannot write to {out}: {exc}", EXIT_CONFIG) from exc
    return paths
