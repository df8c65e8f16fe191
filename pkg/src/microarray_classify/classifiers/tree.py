"""C4.5-style decision trees, a simplified logistic model tree and a decision table."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import special

from ..core import Classifier, Discretizer, fit_discretizer, training_arrays


def entropy(class_counts) -> float:
    """Shannon entropy in bits of a vector of class counts (``0 log 0 = 0``)."""
    c = np.asarray(class_counts, dtype=np.float64)
    if np.any(c < 0):
        raise ValueError("negative class count")
    total = c.sum()
    if total <= 0:
        raise ValueError("entropy of all-zero counts")
    p = c[c > 0] / total
    return float(max(0.0, -(p * np.log2(p)).sum()))


def _entropy_rows(C: np.ndarray) -> np.ndarray:
    """Entropy (bits) along the last axis of a count array; zero-total rows give 0."""
    total = C.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(total > 0, C / total, 0.0)
        h = -np.where(p > 0, p * np.log2(p), 0.0).sum(axis=-1)
    return h


# -- tree structure ---------------------------------------------------------


@dataclass
class Node:
    counts: np.ndarray
    feature: int = -1
    threshold: float = 0.0
    left: Optional["Node"] = None
    right: Optional["Node"] = None
    leaf_model: object = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def leaves(self):
        if self.is_leaf:
            yield self
        else:
            yield from self.left.leaves()
            yield from self.right.leaves()

    def depth(self) -> int:
        return 0 if self.is_leaf else 1 + max(self.left.depth(), self.right.depth())

    def n_nodes(self) -> int:
        return 1 if self.is_leaf else 1 + self.left.n_nodes() + self.right.n_nodes()


def _route(node: Node, X: np.ndarray, rows: np.ndarray, out: list):
    """Append (leaf, row indices) pairs for ``rows`` of ``X`` below ``node``."""
    if node.is_leaf:
        out.append((node, rows))
        return
    go_left = X[rows, node.feature] <= node.threshold
    _route(node.left, X, rows[go_left], out)
    _route(node.right, X, rows[~go_left], out)


def leaf_assignment(root: Node, X: np.ndarray) -> list[tuple[Node, np.ndarray]]:
    out: list = []
    _route(root, np.atleast_2d(X), np.arange(np.atleast_2d(X).shape[0]), out)
    return out


def best_split(X, y, rows, features, K, min_leaf):
    """Best (feature, threshold, gain) for ``rows`` among ``features``, or None.

    Per feature the threshold with the largest information gain is taken
    (midpoint between adjacent distinct values, both sides >= ``min_leaf``).
    Features are then compared by gain ratio, restricted to those whose
    gain is at least the average over features with a valid split.
    """
    n = rows.size
    if n < 2 * min_leaf or features.size == 0:
        return None
    V = X[np.ix_(rows, features)]
    order = np.argsort(V, axis=0, kind="stable")
    Vs = np.take_along_axis(V, order, axis=0)
    Y = np.eye(K)[y[rows]]
    cum = np.cumsum(Y[order], axis=0)  # (n, f, K)
    left = cum[:-1]
    total = cum[-1]
    right = total[None] - left
    nl = np.arange(1, n, dtype=np.float64)[:, None]
    nr = n - nl
    valid = (Vs[1:] > Vs[:-1]) & (nl >= min_leaf) & (nr >= min_leaf)
    if not valid.any():
        return None
    h_parent = _entropy_rows(total[0][None])[0]
    gain = h_parent - (nl * _entropy_rows(left) + nr * _entropy_rows(right)) / n
    gain = np.where(valid, gain, -np.inf)
    pos = np.argmax(gain, axis=0)
    best_gain = gain[pos, np.arange(features.size)]
    ok = best_gain > 1e-12
    if not ok.any():
        return None
    frac = (pos + 1) / n
    split_info = -(frac * np.log2(frac) + (1 - frac) * np.log2(1 - frac))
    ratio = np.where(ok & (split_info > 0), best_gain / np.where(split_info > 0, split_info, 1.0), -np.inf)
    ratio = np.where(best_gain >= best_gain[ok].mean() - 1e-12, ratio, -np.inf)
    f = int(np.argmax(ratio))
    if not np.isfinite(ratio[f]):
        return None
    i = pos[f]
    threshold = 0.5 * (Vs[i, f] + Vs[i + 1, f])
    # midpoint can round up onto the upper value for adjacent floats
    if not threshold < Vs[i + 1, f]:
        threshold = Vs[i, f]
    return int(features[f]), float(threshold), float(best_gain[f])


def grow_tree(X, y, K, min_leaf=2, rows=None, max_features=None, rng=None, min_split=None):
    """Recursively grow a gain-ratio tree.

    ``max_features`` restricts each node to a random feature subset drawn
    from ``rng`` (random-forest style).  ``min_split``: nodes with at most
    that many samples are not split.
    """
    d = X.shape[1]
    rows = np.arange(X.shape[0]) if rows is None else rows

    def build(rows):
        node = Node(counts=np.bincount(y[rows], minlength=K).astype(np.float64))
        if np.count_nonzero(node.counts) <= 1:
            return node
        if min_split is not None and rows.size <= min_split:
            return node
        if max_features is None or max_features >= d:
            features = np.arange(d)
        else:
            features = np.sort(rng.choice(d, size=max_features, replace=False))
        split = best_split(X, y, rows, features, K, min_leaf)
        if split is None:
            return node
        node.feature, node.threshold, _ = split
        go_left = X[rows, node.feature] <= node.threshold
        node.left = build(rows[go_left])
        node.right = build(rows[~go_left])
        return node

    return build(rows)


# -- pessimistic pruning ------------------------------------------------------


def pessimistic_errors(n: float, errors: float, cf: float) -> float:
    """Upper ``cf`` confidence bound on errors for ``errors`` mistakes in ``n`` cases."""
    if n <= 0:
        return 0.0
    if errors >= n:
        return float(n)
    return float(n * special.betaincinv(errors + 1.0, n - errors, 1.0 - cf))


def _leaf_errors(counts: np.ndarray) -> float:
    return float(counts.sum() - counts.max())


def subtree_estimate(node: Node, cf: float) -> float:
    if node.is_leaf:
        return pessimistic_errors(node.counts.sum(), _leaf_errors(node.counts), cf)
    return subtree_estimate(node.left, cf) + subtree_estimate(node.right, cf)


def prune(node: Node, cf: float) -> float:
    """Bottom-up subtree replacement; returns the pruned subtree's estimate."""
    as_leaf = pessimistic_errors(node.counts.sum(), _leaf_errors(node.counts), cf)
    if node.is_leaf:
        return as_leaf
    below = prune(node.left, cf) + prune(node.right, cf)
    if as_leaf <= below:
        node.left = node.right = None
        node.feature = -1
        return as_leaf
    return below


def _leaf_probs(counts: np.ndarray) -> np.ndarray:
    return counts / counts.sum()


@dataclass(frozen=True, eq=False)
class DecisionTree(Classifier):
    classes: tuple[str, ...]
    root: Node
    name = "c45"

    def predict_proba(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        P = np.empty((X.shape[0], len(self.classes)))
        for leaf, rows in leaf_assignment(self.root, X):
            P[rows] = _leaf_probs(leaf.counts)
        return P

    def leaf_ids(self, X) -> np.ndarray:
        """Index of the leaf (in depth-first order) reached by each row."""
        X = np.atleast_2d(X)
        ids = {id(leaf): i for i, leaf in enumerate(self.root.leaves())}
        out = np.empty(X.shape[0], dtype=np.intp)
        for leaf, rows in leaf_assignment(self.root, X):
            out[rows] = ids[id(leaf)]
        return out


def train_c45(train, min_leaf: int = 2, cf: float = 0.25, prune_tree: bool = True) -> DecisionTree:
    """Gain-ratio tree on continuous features with error-based pruning."""
    X, y, classes = training_arrays(train)
    root = grow_tree(X, y, len(classes), min_leaf=min_leaf)
    if prune_tree:
        prune(root, cf)
    return DecisionTree(classes, root)


# -- logistic model tree ----------------------------------------------------


def _sigmoid2(F):
    # e^F / (e^F + e^-F)
    return 0.5 * (1.0 + np.tanh(F))


def bernoulli_nll(F: np.ndarray, ystar: np.ndarray) -> float:
    """Negative log-likelihood of 0/1 targets under ``p = e^F / (e^F + e^-F)``."""
    # log(1 + e^{-2F}) for y=1, log(1 + e^{2F}) for y=0
    s = np.where(ystar > 0, -2.0 * F, 2.0 * F)
    return float(np.logaddexp(0.0, s).sum())


@dataclass(frozen=True, eq=False)
class LeafLogistic:
    """``F(x) = bias + weights . x``; ``P(first class) = e^F / (e^F + e^-F)``."""

    weights: np.ndarray
    bias: float
    nll_trace: tuple[float, ...] = ()

    def prob_first(self, X):
        # keep outputs strictly inside (0, 1) once scores saturate
        return np.clip(_sigmoid2(self.bias + X @ self.weights), 1e-12, 1.0 - 1e-12)


def fit_leaf_logistic(X, ystar, max_iters=50, z_max=4.0, max_halvings=30) -> LeafLogistic:
    """LogitBoost with simple (one-feature) weighted linear regressions.

    Each stage takes the usual half Newton step, halved as needed so the
    training negative log-likelihood never increases.  Stops early when
    no step size helps.
    """
    n, d = X.shape
    F = np.zeros(n)
    weights = np.zeros(d)
    bias = 0.0
    trace = [bernoulli_nll(F, ystar)]
    for _ in range(max_iters):
        p = _sigmoid2(F)
        w = np.maximum(p * (1 - p), 1e-10)
        z = np.clip((ystar - p) / w, -z_max, z_max)
        W = w.sum()
        xm = w @ X / W
        zm = w @ z / W
        Xc = X - xm
        sxx = w @ (Xc * Xc)
        sxz = w @ (Xc * (z - zm)[:, None])
        szz = w @ ((z - zm) ** 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = np.where(sxx > 1e-12, sxz / sxx, 0.0)
        sse = szz - slope * sxz
        j = int(np.argmin(sse))
        intercept = zm - slope[j] * xm[j]
        f = intercept + slope[j] * X[:, j]
        # full Newton steps can overshoot; halve until the loss does not rise
        step = 0.5
        for _ in range(max_halvings):
            nll = bernoulli_nll(F + step * f, ystar)
            if nll <= trace[-1]:
                break
            step *= 0.5
        else:
            break
        F = F + step * f
        bias += step * intercept
        weights[j] += step * slope[j]
        trace.append(nll)
    return LeafLogistic(weights, bias, tuple(trace))


@dataclass(frozen=True, eq=False)
class LogisticModelTree(Classifier):
    classes: tuple[str, ...]
    root: Node
    name = "lmt"

    def predict_proba(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        P = np.empty((X.shape[0], 2))
        for leaf, rows in leaf_assignment(self.root, X):
            p = leaf.leaf_model.prob_first(X[rows])
            P[rows, 0] = p
            P[rows, 1] = 1.0 - p
        return P


def train_lmt(train, max_boost_iters: int = 50, min_split: int = 15) -> LogisticModelTree:
    """Gain-ratio tree (nodes with <= ``min_split`` samples stay leaves) with
    a boosted linear logistic model at every leaf."""
    X, y, classes = training_arrays(train)
    root = grow_tree(X, y, len(classes), min_leaf=2, min_split=min_split)
    for leaf, rows in leaf_assignment(root, X):
        ystar = (y[rows] == 0).astype(np.float64)
        leaf.leaf_model = fit_leaf_logistic(X[rows], ystar, max_boost_iters)
    return LogisticModelTree(classes, root)


# -- decision table ---------------------------------------------------------


def _dense_codes(B: np.ndarray, subset) -> np.ndarray:
    """Dense integer id per row for the tuple of bins in ``subset``."""
    if not subset:
        return np.zeros(B.shape[0], dtype=np.intp)
    _, inv = np.unique(B[:, list(subset)], axis=0, return_inverse=True)
    return inv.ravel().astype(np.intp)


def _loo_accuracy_all(codes, B, y, K, default, candidates):
    """Leave-one-out accuracy of ``codes`` extended by each candidate feature."""
    rmax = int(B.max()) + 1
    cols = np.asarray(candidates, dtype=np.intp)
    keys = codes[:, None] * rmax + B[:, cols]  # (n, c)
    span = (int(codes.max()) + 1) * rmax
    flat = (np.arange(cols.size)[None, :] * span + keys) * K + y[:, None]
    N = np.bincount(flat.ravel(), minlength=cols.size * span * K).reshape(cols.size, span, K)
    own = N[np.arange(cols.size)[None, :], keys]  # (n, c, K)
    own = own - np.eye(K, dtype=N.dtype)[y][:, None, :]
    empty = own.sum(axis=2) == 0
    pred = np.where(empty, default, np.argmax(own, axis=2))
    return (pred == y[:, None]).mean(axis=0)


def loo_accuracy(B, y, K, subset) -> float:
    """Leave-one-out accuracy of the table keyed on ``subset`` (brute force)."""
    n = B.shape[0]
    default = int(np.argmax(np.bincount(y, minlength=K)))
    hits = 0
    keys = [tuple(B[i, list(subset)]) for i in range(n)]
    for i in range(n):
        counts = np.zeros(K)
        for j in range(n):
            if j != i and keys[j] == keys[i]:
                counts[y[j]] += 1
        pred = default if counts.sum() == 0 else int(np.argmax(counts))
        hits += pred == y[i]
    return hits / n


@dataclass(frozen=True, eq=False)
class DecisionTableModel(Classifier):
    classes: tuple[str, ...]
    discretizer: Discretizer
    features: tuple[int, ...]
    table: dict
    default_counts: np.ndarray
    loo_score: float = field(default=float("nan"))
    name = "decision-table"

    @property
    def default_class(self) -> str:
        return self.classes[int(np.argmax(self.default_counts))]

    def predict_proba(self, X):
        B = self.discretizer.transform(X)
        P = np.empty((B.shape[0], len(self.classes)))
        for i, row in enumerate(B):
            counts = self.table.get(tuple(row[list(self.features)].tolist()))
            if counts is None:
                counts = self.default_counts
            P[i] = counts / counts.sum()
        return P


def train_decision_table(
    train, discretizer_k: int = 4, max_subset: int = 10, stale_limit: int = 5
) -> DecisionTableModel:
    """Best-first forward selection of a feature subset by leave-one-out accuracy.

    The search stops after ``stale_limit`` consecutive expansions that do
    not improve the best score.
    """
    X, y, classes = training_arrays(train)
    K = len(classes)
    disc = fit_discretizer(X, discretizer_k)
    B = disc.transform(X)
    d = B.shape[1]
    prior = np.bincount(y, minlength=K).astype(np.float64)
    default = int(np.argmax(prior))

    # empty subset: one cell holding every sample, i.e. the majority-class baseline
    own = prior[None, :] - np.eye(K)[y]
    empty_pred = np.where(own.sum(axis=1) == 0, default, np.argmax(own, axis=1))

    best_subset: tuple[int, ...] = ()
    best_score = float(np.mean(empty_pred == y))
    frontier = [(-best_score, 0, ())]
    seen = {()}
    counter = 1
    stale = 0
    while frontier and stale < stale_limit:
        neg, _, subset = heapq.heappop(frontier)
        improved = False
        if len(subset) < max_subset and d:
            cand = [f for f in range(d) if f not in subset]
            scores = _loo_accuracy_all(_dense_codes(B, subset), B, y, K, default, cand)
            for f, s in zip(cand, scores):
                child = tuple(sorted(subset + (f,)))
                if child in seen:
                    continue
                seen.add(child)
                heapq.heappush(frontier, (-float(s), counter, child))
                counter += 1
                if s > best_score + 1e-12:
                    best_score, best_subset = float(s), child
                    improved = True
        stale = 0 if improved else stale + 1

    table: dict = {}
    for i in range(len(y)):
        key = tuple(B[i, list(best_subset)].tolist())
        table.setdefault(key, np.zeros(K))[y[i]] += 1
    return DecisionTableModel(classes, disc, best_subset, table, prior, best_score)
