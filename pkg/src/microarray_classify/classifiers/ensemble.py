"""Random forest of gain-ratio trees and two-class LogitBoost with stumps."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import Classifier, SeedSpec, TrainingError, training_arrays
from .tree import Node, bernoulli_nll, grow_tree, leaf_assignment


@dataclass(frozen=True, eq=False)
class RandomForestModel(Classifier):
    classes: tuple[str, ...]
    trees: tuple[Node, ...]
    tree_seeds: tuple[int, ...]
    max_features: int
    name = "random-forest"

    def votes(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        V = np.zeros((X.shape[0], len(self.classes)))
        for root in self.trees:
            for leaf, rows in leaf_assignment(root, X):
                V[rows, int(np.argmax(leaf.counts))] += 1
        return V

    def predict_proba(self, X):
        return self.votes(X) / len(self.trees)


def train_random_forest(
    train,
    n_trees: int = 100,
    max_features: int | None = None,
    seed=0,
    bootstrap: bool = True,
    min_leaf: int = 1,
) -> RandomForestModel:
    """Unpruned trees on bootstrap resamples with per-node feature subsampling.

    ``max_features`` defaults to ``ceil(sqrt(d))``.  Each tree draws from
    its own stream spawned from ``seed`` so tree ``t`` does not depend on
    how many trees precede it.
    """
    X, y, classes = training_arrays(train)
    n, d = X.shape
    m = max_features if max_features is not None else max(1, math.ceil(math.sqrt(d)))
    if n_trees < 1:
        raise TrainingError(f"n_trees must be >= 1, got {n_trees}")
    if not 1 <= m <= d:
        raise TrainingError(f"max_features must lie in [1, {d}], got {m}")
    spec = seed if isinstance(seed, SeedSpec) else SeedSpec(int(seed))
    trees, seeds = [], []
    for t in range(n_trees):
        tree_spec = SeedSpec(spec.seed, spec.stream * 100_003 + t + 1)
        rng = tree_spec.generator()
        rows = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        trees.append(
            grow_tree(X, y, len(classes), min_leaf=min_leaf, rows=np.sort(rows), max_features=m, rng=rng)
        )
        seeds.append(tree_spec.stream)
    return RandomForestModel(classes, tuple(trees), tuple(seeds), m)


# -- LogitBoost -------------------------------------------------------------


@dataclass(frozen=True)
class Stump:
    feature: int
    threshold: float
    left: float
    right: float

    def __call__(self, X):
        return np.where(X[:, self.feature] <= self.threshold, self.left, self.right)


def fit_regression_stump(X, z, w) -> Stump:
    """Weighted least-squares depth-1 regressor minimizing ``sum w (z - f(x))^2``."""
    n, d = X.shape
    W = w.sum()
    mean_all = float(w @ z / W) if W > 0 else 0.0
    best = Stump(0, math.inf, mean_all, mean_all)
    if n < 2:
        return best
    order = np.argsort(X, axis=0, kind="stable")
    Xs = np.take_along_axis(X, order, axis=0)
    ws = w[order]
    wz = (w * z)[order]
    cw = np.cumsum(ws, axis=0)[:-1]
    cz = np.cumsum(wz, axis=0)[:-1]
    rw = W - cw
    rz = wz.sum(axis=0)[None, :] - cz
    valid = (Xs[1:] > Xs[:-1]) & (cw > 0) & (rw > 0)
    # SSE = const - (cz^2/cw + rz^2/rw): maximize the explained part
    with np.errstate(divide="ignore", invalid="ignore"):
        explained = np.where(valid, cz * cz / cw + rz * rz / rw, -np.inf)
    if not np.isfinite(explained).any():
        return best
    flat = int(np.argmax(explained))
    i, j = divmod(flat, d)
    threshold = 0.5 * (Xs[i, j] + Xs[i + 1, j])
    if not threshold < Xs[i + 1, j]:
        threshold = Xs[i, j]
    return Stump(j, float(threshold), float(cz[i, j] / cw[i, j]), float(rz[i, j] / rw[i, j]))


@dataclass(frozen=True, eq=False)
class LogitBoostModel(Classifier):
    """Additive score ``F = sum nu * f_m / 2``; ``P(first class) = e^F/(e^F + e^-F)``."""

    classes: tuple[str, ...]
    stumps: tuple[Stump, ...]
    shrinkage: float
    deviance_trace: tuple[float, ...] = ()
    name = "logit-boost"

    def score(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        F = np.zeros(X.shape[0])
        for s in self.stumps:
            F += self.shrinkage * 0.5 * s(X)
        return F

    def predict_proba(self, X):
        p = 0.5 * (1.0 + np.tanh(self.score(X)))
        return np.column_stack([p, 1.0 - p])


def logitboost_working_response(p, ystar, z_max=4.0):
    """Newton working responses and weights for the Bernoulli log-likelihood."""
    w = p * (1.0 - p)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(ystar > 0, 1.0 / p, -1.0 / (1.0 - p))
    return np.clip(z, -z_max, z_max), w


def train_logitboost(train, n_stages: int = 100, shrinkage: float = 1.0, z_max: float = 4.0) -> LogitBoostModel:
    """Two-class LogitBoost (Friedman, Hastie and Tibshirani) with regression stumps.

    The first class of the dataset is the ``y* = 1`` outcome.  A stage whose
    full step would increase the training deviance is halved until it does
    not, so the deviance trace is non-increasing.
    """
    if n_stages < 1:
        raise TrainingError(f"n_stages must be >= 1, got {n_stages}")
    X, y, classes = training_arrays(train)
    ystar = (y == 0).astype(np.float64)
    F = np.zeros(X.shape[0])
    stumps = []
    trace = [bernoulli_nll(F, ystar)]
    for _ in range(n_stages):
        p = 0.5 * (1.0 + np.tanh(F))
        z, w = logitboost_working_response(p, ystar, z_max)
        if w.sum() <= 1e-300:
            break
        stump = fit_regression_stump(X, z, w)
        f = stump(X)
        # halve the stage when the full step would raise the deviance
        scale = 1.0
        dev = bernoulli_nll(F + shrinkage * 0.5 * f, ystar)
        while dev > trace[-1] and scale > 2.0**-30:
            scale *= 0.5
            dev = bernoulli_nll(F + scale * shrinkage * 0.5 * f, ystar)
        if dev > trace[-1]:
            break
        if scale != 1.0:
            stump = Stump(stump.feature, stump.threshold, scale * stump.left, scale * stump.right)
        stumps.append(stump)
        F = F + shrinkage * 0.5 * stump(X)
        trace.append(bernoulli_nll(F, ystar))
    return LogitBoostModel(classes, tuple(stumps), shrinkage, tuple(trace))
