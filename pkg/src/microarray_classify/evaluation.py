"""Confusion-matrix metrics and the scaled-test-set robustness sweep."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import Classifier, Prediction, rmse_probabilistic
from .dataset import ExpressionDataset, select_gene_ids
from .preprocess import SelectionResult, apply_normalization, fit_normalization

DEFAULT_FACTORS = (0.5, 2.0, 0.1, 10.0, 0.05, 20.0)
POSITIVE_LABEL = "Tumor"


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int
    positive: str = POSITIVE_LABEL
    negative: str = "Normal"

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(predictions: Sequence, truth: Sequence[str], positive_label: str = POSITIVE_LABEL) -> ConfusionMatrix:
    """Count TP/FP/TN/FN; ``predictions`` are labels or :class:`Prediction` objects."""
    if len(predictions) != len(truth):
        raise ValueError(f"length mismatch: {len(predictions)} predictions vs {len(truth)} labels")
    if not truth:
        raise ValueError("no samples to evaluate")
    pred = [p.label if isinstance(p, Prediction) else p for p in predictions]
    labels = set(truth) | set(pred)
    for p in predictions:
        if isinstance(p, Prediction):
            labels |= set(p.classes)
    if positive_label not in labels:
        raise ValueError(f"positive label {positive_label!r} not in label set {sorted(labels)}")
    others = sorted(labels - {positive_label})
    if len(others) > 1:
        raise ValueError(f"more than two labels: {sorted(labels)}")
    tp = sum(p == positive_label and t == positive_label for p, t in zip(pred, truth))
    fp = sum(p == positive_label and t != positive_label for p, t in zip(pred, truth))
    fn = sum(p != positive_label and t == positive_label for p, t in zip(pred, truth))
    tn = len(truth) - tp - fp - fn
    return ConfusionMatrix(tp, fp, tn, fn, positive_label, others[0] if others else "")


@dataclass(frozen=True)
class MetricSet:
    """Rates derived from a confusion matrix.

    Ratios whose denominator is zero are reported as 1.0 and named in
    ``vacuous``.  ``tpr``/``fpr`` are keyed by class label.
    """

    sensitivity: float
    specificity: float
    precision: float
    accuracy: float
    ccs: int
    ics: int
    tpr: dict
    fpr: dict
    tp: int
    fp: int
    tn: int
    fn: int
    rmse: float | None = None
    vacuous: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["vacuous"] = list(self.vacuous)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MetricSet":
        d = dict(d)
        d["vacuous"] = tuple(d.get("vacuous", ()))
        return cls(**d)


def _ratio(num: int, den: int, name: str, vacuous: list) -> Fraction:
    if den == 0:
        vacuous.append(name)
        return Fraction(1)
    return Fraction(num, den)


def metrics(cm: ConfusionMatrix, rmse: float | None = None) -> MetricSet:
    """Sensitivity, specificity, precision and accuracy, computed on exact fractions."""
    if cm.total <= 0:
        raise ValueError("empty confusion matrix")
    vac: list[str] = []
    sens = _ratio(cm.tp, cm.tp + cm.fn, "sensitivity", vac)
    spec = _ratio(cm.tn, cm.tn + cm.fp, "specificity", vac)
    prec = _ratio(cm.tp, cm.tp + cm.fp, "precision", vac)
    acc = Fraction(cm.tp + cm.tn, cm.total)
    # false-positive rate of a class: share of the other class predicted as it
    fpr_pos = 1 - spec
    fpr_neg = 1 - sens
    return MetricSet(
        sensitivity=float(sens),
        specificity=float(spec),
        precision=float(prec),
        accuracy=float(acc),
        ccs=cm.tp + cm.tn,
        ics=cm.fp + cm.fn,
        tpr={cm.positive: float(sens), cm.negative: float(spec)},
        fpr={cm.positive: float(fpr_pos), cm.negative: float(fpr_neg)},
        tp=cm.tp,
        fp=cm.fp,
        tn=cm.tn,
        fn=cm.fn,
        rmse=rmse,
        vacuous=tuple(vac),
    )


def evaluate(model: Classifier, ds: ExpressionDataset, positive_label: str = POSITIVE_LABEL) -> tuple[MetricSet, list[Prediction]]:
    """Predict every sample of an already-normalized dataset and score it."""
    preds = model.predict_dataset(ds)
    cm = confusion(preds, list(ds.labels), positive_label)
    return metrics(cm, rmse_probabilistic(preds, list(ds.labels))), preds


# -- robustness sweep -------------------------------------------------------


def factor_name(c: float) -> str:
    """``0.5 -> 'Div 2'``, ``10 -> 'Mul 10'``, ``1 -> 'x1'``."""
    if c == 1:
        return "x1"
    if c < 1:
        inv = 1.0 / c
        return f"Div {int(round(inv)) if abs(inv - round(inv)) < 1e-9 else inv:g}"
    return f"Mul {int(c) if float(c).is_integer() else c:g}"


MEAN_KEYS = ("sensitivity", "specificity", "precision", "accuracy")


@dataclass(frozen=True)
class RobustnessReport:
    factors: tuple[float, ...]
    per_factor: tuple[MetricSet, ...]
    means: dict
    predictions: tuple[tuple[str, ...], ...] = ()

    def to_dict(self) -> dict:
        return {
            "factors": list(self.factors),
            "factor_names": [factor_name(c) for c in self.factors],
            "per_factor": [m.to_dict() for m in self.per_factor],
            "means": dict(self.means),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RobustnessReport":
        return cls(
            tuple(d["factors"]),
            tuple(MetricSet.from_dict(m) for m in d["per_factor"]),
            dict(d["means"]),
        )

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


@dataclass(frozen=True, eq=False)
class FittedPipeline:
    """A gene selection plus a model trained on the selected, normalized genes."""

    selection: SelectionResult
    model: Classifier

    def prepare(self, raw: ExpressionDataset, refit_normalization: bool = False) -> ExpressionDataset:
        if not refit_normalization:
            return self.selection.transform(raw)
        projected = select_gene_ids(raw, self.selection.kept_gene_ids)
        return apply_normalization(projected, fit_normalization(projected))

    def predict_raw(self, raw: ExpressionDataset, refit_normalization: bool = False) -> list[Prediction]:
        return self.model.predict_dataset(self.prepare(raw, refit_normalization))


def scale_sweep(
    pipeline: FittedPipeline,
    test: ExpressionDataset,
    factors: Sequence[float] = DEFAULT_FACTORS,
    positive_label: str = POSITIVE_LABEL,
    refit_normalization: bool = False,
) -> RobustnessReport:
    """Evaluate ``pipeline`` on the RAW ``test`` matrix multiplied by each factor.

    Scaling happens before projection and normalization, and the training
    normalization parameters are reused unless ``refit_normalization``.
    """
    factors = tuple(float(c) for c in factors)
    if not factors:
        raise ValueError("no scale factors")
    for c in factors:
        if not c > 0:
            raise ValueError(f"scale factors must be positive, got {c}")
    per_factor, preds_all = [], []
    truth = list(test.labels)
    for c in factors:
        scaled = test if c == 1.0 else test.with_values(test.values * c)
        preds = pipeline.predict_raw(scaled, refit_normalization)
        cm = confusion(preds, truth, positive_label)
        per_factor.append(metrics(cm, rmse_probabilistic(preds, truth)))
        preds_all.append(tuple(p.label for p in preds))
    means = {k: float(np.mean([getattr(m, k) for m in per_factor])) for k in MEAN_KEYS}
    return RobustnessReport(factors, tuple(per_factor), means, tuple(preds_all))


def sensitivity_specificity_csv(reports: dict) -> str:
    """Table shaped as technique x {Sn, Sp} rows by one column per factor."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    first = next(iter(reports.values()), None)
    names = [factor_name(c) for c in first.factors] if first else []
    writer.writerow(["technique", "Sn/Sp", *names])
    for tech, rep in reports.items():
        writer.writerow([tech, "Sn", *[repr(m.sensitivity) for m in rep.per_factor]])
        writer.writerow([tech, "Sp", *[repr(m.specificity) for m in rep.per_factor]])
    return buf.getvalue()


def mean_metrics_csv(reports: dict, keys: Sequence[str]) -> str:
    """Rows = metric, columns = technique (the mean-over-factors tables)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["metric", *reports])
    for k in keys:
        writer.writerow([k, *[repr(rep.means[k]) for rep in reports.values()]])
    return buf.getvalue()
