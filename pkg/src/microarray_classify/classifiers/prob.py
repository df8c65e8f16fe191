"""Gaussian naive Bayes and a discrete Bayesian network classifier."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..core import (
    Classifier,
    Discretizer,
    TrainingError,
    fit_discretizer,
    softmax_rows,
    training_arrays,
)

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class NaiveBayesModel(Classifier):
    classes: tuple[str, ...]
    priors: np.ndarray  # (K,)
    means: np.ndarray  # (K, d)
    variances: np.ndarray  # (K, d)
    name = "naive-bayes"

    def log_joint(self, X: np.ndarray) -> np.ndarray:
        """``log p(C) + sum_j log p(F_j | C)`` for each sample and class."""
        X = np.atleast_2d(X)
        out = np.empty((X.shape[0], len(self.classes)))
        for k in range(len(self.classes)):
            diff = X - self.means[k]
            ll = -0.5 * (LOG_2PI + np.log(self.variances[k]) + diff * diff / self.variances[k])
            out[:, k] = math.log(self.priors[k]) + ll.sum(axis=1)
        return out

    def predict_proba(self, X):
        # the evidence term p(F_1..F_n) is the per-row normalizer
        return softmax_rows(self.log_joint(X))


def train_naive_bayes(train, variance_floor: float = 1e-9) -> NaiveBayesModel:
    X, y, classes = training_arrays(train)
    K = len(classes)
    counts = np.bincount(y, minlength=K)
    if counts.min() < 1:
        empty = [c for c, n in zip(classes, counts) if n == 0]
        raise TrainingError(f"naive Bayes: empty class {empty}")
    means = np.empty((K, X.shape[1]))
    variances = np.empty((K, X.shape[1]))
    for k in range(K):
        Xk = X[y == k]
        means[k] = Xk.mean(axis=0)
        variances[k] = Xk.var(axis=0, ddof=1) if len(Xk) > 1 else 0.0
    variances = np.maximum(variances, variance_floor)
    return NaiveBayesModel(classes, counts / counts.sum(), means, variances)


# -- Bayesian network -------------------------------------------------------


def _family_counts(codes: np.ndarray, n_cfg: int, child: np.ndarray, r_child: int) -> np.ndarray:
    return np.bincount(codes * r_child + child, minlength=n_cfg * r_child).reshape(n_cfg, r_child)


def _loglik(N: np.ndarray) -> float:
    """Maximized log-likelihood sum N_ijk log(N_ijk / N_ij) of count tables (..., q, r)."""
    N = N.astype(np.float64)
    Nij = N.sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(N > 0, N * np.log(N), 0.0).sum(axis=(-2, -1))
        b = np.where(Nij > 0, Nij * np.log(Nij), 0.0).sum(axis=-1)
    return a - b


@dataclass(frozen=True, eq=False)
class BayesNetModel(Classifier):
    """Class node plus discretized feature nodes.

    The class is a parent of every feature; ``parents[j]`` lists the extra
    feature parents of feature ``j``.  ``cpts[j]`` has shape
    ``(K * prod(n_bins[parents]), n_bins[j])`` with configuration index
    ``class * prod(...) + mixed-radix(parent bins)``.
    """

    classes: tuple[str, ...]
    discretizer: Discretizer
    parents: tuple[tuple[int, ...], ...]
    class_prior: np.ndarray
    cpts: tuple[np.ndarray, ...]
    score_trace: tuple[float, ...] = field(default=())
    name = "bayes-net"

    @property
    def n_bins(self) -> np.ndarray:
        return self.discretizer.n_bins

    def edges(self) -> list[tuple[int, int]]:
        return [(p, j) for j, ps in enumerate(self.parents) for p in ps]

    def _config(self, B: np.ndarray, j: int, cls: int) -> np.ndarray:
        code = np.full(B.shape[0], cls, dtype=np.intp)
        for p in self.parents[j]:
            code = code * self.n_bins[p] + B[:, p]
        return code

    def log_joint_binned(self, B: np.ndarray) -> np.ndarray:
        """``log P_B(class, x_1..x_n)`` for discretized rows ``B`` and every class."""
        B = np.atleast_2d(B)
        K = len(self.classes)
        out = np.tile(np.log(self.class_prior), (B.shape[0], 1))
        for j, cpt in enumerate(self.cpts):
            logt = np.log(cpt)
            for k in range(K):
                out[:, k] += logt[self._config(B, j, k), B[:, j]]
        return out

    def predict_proba(self, X):
        return softmax_rows(self.log_joint_binned(self.discretizer.transform(X)))


class _StructureSearch:
    """Greedy hill-climbing over feature-to-feature edges, scored by BIC.

    Family scores are decomposable so only the changed child is rescored.
    """

    def __init__(self, B, y, K, r, max_parents):
        self.B, self.y, self.K, self.r = B, y, K, r
        self.n, self.d = B.shape
        self.max_parents = max_parents
        self.log_n = math.log(self.n)
        self.parents: list[list[int]] = [[] for _ in range(self.d)]
        self.family = np.array([self.score_family(j, []) for j in range(self.d)])
        self.add_delta = np.full((self.d, self.d), -np.inf)
        for j in range(self.d):
            self._refresh_add(j)

    def _codes(self, parents):
        code = self.y.astype(np.intp)
        q = self.K
        for p in parents:
            code = code * self.r[p] + self.B[:, p]
            q *= int(self.r[p])
        return code, q

    def score_family(self, j, parents) -> float:
        code, q = self._codes(parents)
        N = _family_counts(code, q, self.B[:, j], int(self.r[j]))
        return float(_loglik(N)) - 0.5 * self.log_n * (self.r[j] - 1) * q

    def _refresh_add(self, j):
        """Score gain of adding each feature as a new parent of ``j``."""
        row = np.full(self.d, -np.inf)
        if len(self.parents[j]) < self.max_parents and self.d > 1:
            code, q0 = self._codes(self.parents[j])
            rmax = int(self.r.max())
            rj = int(self.r[j])
            q = q0 * rmax
            cand = np.arange(self.d)
            idx = (cand[None, :] * q + code[:, None] * rmax + self.B) * rj + self.B[:, [j]]
            N = np.bincount(idx.ravel(), minlength=self.d * q * rj).reshape(self.d, q, rj)
            penalty = 0.5 * self.log_n * (rj - 1) * q0 * self.r
            row = _loglik(N) - penalty - self.family[j]
            row[j] = -np.inf
            row[self.parents[j]] = -np.inf
            # a second edge between the same pair in the other direction is a reversal, not an add
            children = [c for c, ps in enumerate(self.parents) if j in ps]
            row[children] = -np.inf
        self.add_delta[:, j] = row

    def _reaches(self, src, dst) -> bool:
        """True when a directed path src -> ... -> dst exists among feature edges."""
        children = {}
        for c, ps in enumerate(self.parents):
            for p in ps:
                children.setdefault(p, []).append(c)
        stack, seen = [src], {src}
        while stack:
            u = stack.pop()
            if u == dst:
                return True
            for v in children.get(u, ()):
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return False

    def best_move(self):
        best = (0.0, None)
        flat = self.add_delta.ravel()
        order = np.argsort(-flat, kind="stable")
        for pos in order:
            gain = flat[pos]
            if not gain > best[0]:
                break
            a, b = divmod(int(pos), self.d)
            if not self._reaches(b, a):
                best = (float(gain), ("add", a, b))
                break
        for b, ps in enumerate(self.parents):
            for a in ps:
                rest = [p for p in ps if p != a]
                drop = self.score_family(b, rest) - self.family[b]
                if drop > best[0]:
                    best = (drop, ("remove", a, b))
                if len(self.parents[a]) < self.max_parents:
                    self.parents[b] = rest
                    cyclic = self._reaches(a, b)
                    self.parents[b] = ps
                    if not cyclic:
                        gain = drop + self.score_family(a, self.parents[a] + [b]) - self.family[a]
                        if gain > best[0]:
                            best = (gain, ("reverse", a, b))
        return best

    def apply(self, move):
        kind, a, b = move
        if kind == "add":
            self.parents[b] = self.parents[b] + [a]
            touched = [b]
        elif kind == "remove":
            self.parents[b] = [p for p in self.parents[b] if p != a]
            touched = [b]
        else:
            self.parents[b] = [p for p in self.parents[b] if p != a]
            self.parents[a] = self.parents[a] + [b]
            touched = [a, b]
        for j in touched:
            self.parents[j] = sorted(self.parents[j])
            self.family[j] = self.score_family(j, self.parents[j])
        # add-gains of a column depend only on its own parents and on which nodes list it as parent
        for j in {a, b}:
            self._refresh_add(j)

    def run(self, max_moves):
        trace = [float(self.family.sum())]
        for _ in range(max_moves):
            gain, move = self.best_move()
            if move is None or gain <= 1e-9:
                break
            self.apply(move)
            trace.append(float(self.family.sum()))
        return trace


def train_bayes_net(
    train,
    discretizer_k: int = 4,
    max_parents: int = 2,
    ess: float = 1.0,
    max_moves: int = 1000,
) -> BayesNetModel:
    """Fit a Bayes network classifier on discretized features.

    Starts from the naive structure (class -> every feature) and greedily
    adds, removes or reverses feature-to-feature edges while the BIC score
    improves.  ``max_parents`` bounds the feature parents of each node
    (the class parent is not counted), so ``max_parents=0`` keeps the naive
    structure.  CPTs use ``ess`` pseudo-counts per cell.
    """
    if max_parents < 0:
        raise TrainingError(f"max_parents must be >= 0, got {max_parents}")
    X, y, classes = training_arrays(train)
    K = len(classes)
    counts = np.bincount(y, minlength=K)
    if counts.min() < 1:
        raise TrainingError("Bayes net: empty class")
    disc = fit_discretizer(X, discretizer_k)
    B = disc.transform(X)
    r = disc.n_bins

    search = _StructureSearch(B, y, K, r, max_parents)
    trace = search.run(max_moves) if max_parents > 0 else [float(search.family.sum())]
    parents = tuple(tuple(ps) for ps in search.parents)

    cpts = []
    for j, ps in enumerate(parents):
        code, q = search._codes(ps)
        N = _family_counts(code, q, B[:, j], int(r[j])).astype(np.float64)
        cpts.append((N + ess) / (N.sum(axis=1, keepdims=True) + ess * r[j]))
    prior = (counts + ess) / (counts.sum() + ess * K)
    return BayesNetModel(
        classes, disc, parents, prior, tuple(cpts), score_trace=tuple(trace)
    )
