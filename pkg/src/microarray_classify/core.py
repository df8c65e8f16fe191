"""Shared classifier contract, discretizer, seeded RNG streams and RMSE."""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import ExpressionDataset
from .preprocess import row_quantiles


class TrainingError(RuntimeError):
    """A classifier could not be trained on the given data."""


@dataclass(frozen=True)
class Prediction:
    """Predicted label plus a probability vector over the model's classes."""

    label: str
    probs: tuple[float, ...]
    classes: tuple[str, ...]

    def prob(self, label: str) -> float:
        return self.probs[self.classes.index(label)]


def normalize_rows(P: np.ndarray) -> np.ndarray:
    P = np.clip(np.asarray(P, dtype=np.float64), 0.0, None)
    total = P.sum(axis=1, keepdims=True)
    bad = total[:, 0] <= 0
    if np.any(bad):
        P[bad] = 1.0
        total[bad] = P.shape[1]
    return P / total


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row-wise normalized ``exp``; stable for the large log-likelihoods NB/BN produce."""
    L = np.asarray(logits, dtype=np.float64)
    L = L - L.max(axis=1, keepdims=True)
    E = np.exp(L)
    return E / E.sum(axis=1, keepdims=True)


class Classifier:
    """Base for fitted models.

    Subclasses set ``classes`` and implement ``predict_proba`` on a
    samples-by-features matrix.  ``np.argmax`` returns the first maximum,
    which gives the first-class-wins tie-break.
    """

    classes: tuple[str, ...]
    name = "classifier"

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict_labels(self, X) -> list[str]:
        P = self.predict_proba(np.atleast_2d(np.asarray(X, dtype=np.float64)))
        return [self.classes[k] for k in np.argmax(P, axis=1)]

    def predict_many(self, X) -> list[Prediction]:
        P = self.predict_proba(np.atleast_2d(np.asarray(X, dtype=np.float64)))
        return [
            Prediction(self.classes[int(np.argmax(row))], tuple(row.tolist()), self.classes)
            for row in P
        ]

    def predict(self, x) -> Prediction:
        """Predict a single sample (feature vector)."""
        return self.predict_many(np.asarray(x, dtype=np.float64).reshape(1, -1))[0]

    def predict_dataset(self, ds: ExpressionDataset) -> list[Prediction]:
        return self.predict_many(ds.X)


def training_arrays(train: ExpressionDataset) -> tuple[np.ndarray, np.ndarray, tuple[str, str]]:
    """(samples-by-features X, class indices y, class order) from a dataset."""
    return np.ascontiguousarray(train.X), train.label_indices(), train.classes


# -- discretization ---------------------------------------------------------


@dataclass(frozen=True)
class Discretizer:
    """Equal-frequency bins per feature.

    ``cuts[j]`` holds the strictly increasing cut points of feature ``j``;
    a value ``v`` falls in bin ``#(cuts <= v)`` so feature ``j`` has
    ``len(cuts[j]) + 1`` bins.
    """

    cuts: tuple[np.ndarray, ...]
    k: int

    @property
    def n_bins(self) -> np.ndarray:
        return np.array([len(c) + 1 for c in self.cuts], dtype=np.intp)

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out = np.empty(X.shape, dtype=np.intp)
        for j, c in enumerate(self.cuts):
            out[:, j] = np.searchsorted(c, X[:, j], side="right")
        return out


def fit_discretizer(train, k: int = 4) -> Discretizer:
    """Cut points at the ``j/k`` quantiles of each feature, duplicates collapsed.

    ``train`` may be an :class:`ExpressionDataset` or a samples-by-features
    array.
    """
    if k < 2:
        raise ValueError(f"need at least 2 bins, got k={k}")
    X = train.X if isinstance(train, ExpressionDataset) else np.atleast_2d(train)
    X = np.asarray(X, dtype=np.float64)
    qs = np.column_stack([row_quantiles(X.T, j / k) for j in range(1, k)])
    cuts = []
    for j in range(X.shape[1]):
        col = np.sort(X[:, j])
        kept = []
        prev = -np.inf
        # drop duplicate cuts and cuts that would leave a training bin empty
        for c in np.unique(qs[j]):
            if np.any((col >= prev) & (col < c)):
                kept.append(c)
                prev = c
        if kept and col[-1] < kept[-1]:
            kept.pop()
        cuts.append(np.array(kept, dtype=np.float64))
    return Discretizer(tuple(cuts), k)


# -- seeded streams ---------------------------------------------------------


@dataclass(frozen=True)
class SeedSpec:
    """Master seed plus stream id; equal specs give equal random sequences."""

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed & (2**64 - 1), spawn_key=(self.stream,))
        return np.random.default_rng(ss)

    def child(self, name: str) -> "SeedSpec":
        """Stream derived from a stable hash of ``name`` (not Python's salted ``hash``)."""
        return SeedSpec(self.seed, (self.stream * 1_000_003 + zlib.crc32(name.encode())) & 0xFFFFFFFF)


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, SeedSpec):
        return seed.generator()
    return SeedSpec(int(seed)).generator()


# -- probabilistic error ----------------------------------------------------


def rmse_probabilistic(predictions: Sequence[Prediction], truth: Sequence[str]) -> float:
    """Root mean squared error between probability vectors and one-hot truth.

    Averaged over samples and classes.
    """
    if len(predictions) != len(truth):
        raise ValueError(
            f"length mismatch: {len(predictions)} predictions, {len(truth)} labels"
        )
    if not predictions:
        raise ValueError("no predictions")
    total = 0.0
    n_cells = 0
    for pred, true in zip(predictions, truth):
        if true not in pred.classes:
            raise ValueError(f"label {true!r} not among model classes {pred.classes}")
        for cls, p in zip(pred.classes, pred.probs):
            total += (p - (1.0 if cls == true else 0.0)) ** 2
            n_cells += 1
    return float(np.sqrt(total / n_cells))
