"""Linear SVM trained by SMO, a one-hidden-layer perceptron, and a GA-trained linear scorer."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from ..core import Classifier, TrainingError, make_rng, normalize_rows, training_arrays

# -- SMO --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SvmModel(Classifier):
    """``f(x) = w . x + b``; the first class is ``y = +1``.

    ``P(first class) = 1 / (1 + exp(-slope * f(x)))`` with a fixed slope.
    """

    classes: tuple[str, ...]
    alphas: np.ndarray
    y: np.ndarray
    support_vectors: np.ndarray
    w: np.ndarray
    b: float
    C: float
    prob_slope: float = 2.0
    dual_trace: tuple[float, ...] = field(default=())
    name = "smo-svm"

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return X @ self.w + self.b

    def predict_proba(self, X):
        f = self.decision_function(X)
        p = 0.5 * (1.0 + np.tanh(0.5 * self.prob_slope * f))
        return np.column_stack([p, 1.0 - p])


def dual_objective(alphas, y, K) -> float:
    ay = alphas * y
    return float(alphas.sum() - 0.5 * ay @ K @ ay)


def kkt_violations(alphas, y, f, C, tol) -> np.ndarray:
    """Boolean mask of samples whose KKT condition is violated by more than ``tol``."""
    r = y * f - 1.0
    return ((r < -tol) & (alphas < C)) | ((r > tol) & (alphas > 0))


class _Smo:
    """Platt's SMO with the second-choice heuristic and a full error cache.

    Candidate loops start after the current index instead of at a random
    point, which keeps training deterministic.
    """

    def __init__(self, K, y, C, tol, eps=1e-12):
        self.K, self.y, self.C, self.tol, self.eps = K, y, C, tol, eps
        self.n = len(y)
        self.alphas = np.zeros(self.n)
        self.b = 0.0
        self.E = -y.astype(np.float64)  # f = 0 initially
        self.trace = [0.0]

    def take_step(self, i1, i2) -> bool:
        if i1 == i2:
            return False
        K, y, C = self.K, self.y, self.C
        a1_old, a2_old = self.alphas[i1], self.alphas[i2]
        y1, y2 = y[i1], y[i2]
        E1, E2 = self.E[i1], self.E[i2]
        s = y1 * y2
        if y1 != y2:
            L, H = max(0.0, a2_old - a1_old), min(C, C + a2_old - a1_old)
        else:
            L, H = max(0.0, a1_old + a2_old - C), min(C, a1_old + a2_old)
        if L >= H:
            return False
        k11, k12, k22 = K[i1, i1], K[i1, i2], K[i2, i2]
        eta = k11 + k22 - 2.0 * k12
        if eta > 0:
            a2 = min(max(a2_old + y2 * (E1 - E2) / eta, L), H)
        else:
            # objective along the constraint line at both ends
            f1 = y1 * (E1 - self.b) - a1_old * k11 - s * a2_old * k12
            f2 = y2 * (E2 - self.b) - s * a1_old * k12 - a2_old * k22
            L1 = a1_old + s * (a2_old - L)
            H1 = a1_old + s * (a2_old - H)
            obj_L = L1 * f1 + L * f2 + 0.5 * L1 * L1 * k11 + 0.5 * L * L * k22 + s * L * L1 * k12
            obj_H = H1 * f1 + H * f2 + 0.5 * H1 * H1 * k11 + 0.5 * H * H * k22 + s * H * H1 * k12
            if obj_L < obj_H - self.eps:
                a2 = L
            elif obj_L > obj_H + self.eps:
                a2 = H
            else:
                a2 = a2_old
        # snap onto the box so the bound tests below see exact 0 or C
        if a2 < 1e-8 * C:
            a2 = 0.0
        elif a2 > C * (1.0 - 1e-8):
            a2 = C
        if abs(a2 - a2_old) < self.eps * (a2 + a2_old + self.eps):
            return False
        a1 = a1_old + s * (a2_old - a2)
        if a1 < 1e-12 * C:
            a1 = 0.0
        elif a1 > C * (1.0 - 1e-12):
            a1 = C
        d1, d2 = y1 * (a1 - a1_old), y2 * (a2 - a2_old)
        b1 = self.b - E1 - d1 * k11 - d2 * k12
        b2 = self.b - E2 - d1 * k12 - d2 * k22
        if 0 < a1 < C:
            b_new = b1
        elif 0 < a2 < C:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)
        self.E += d1 * K[i1] + d2 * K[i2] + (b_new - self.b)
        self.b = b_new
        self.alphas[i1], self.alphas[i2] = a1, a2
        self.trace.append(dual_objective(self.alphas, self.y, self.K))
        return True

    def examine(self, i2) -> bool:
        y2, a2 = self.y[i2], self.alphas[i2]
        r2 = self.E[i2] * y2
        if not ((r2 < -self.tol and a2 < self.C) or (r2 > self.tol and a2 > 0)):
            return False
        nonbound = np.flatnonzero((self.alphas > 0) & (self.alphas < self.C))
        if nonbound.size > 1:
            i1 = int(nonbound[np.argmax(np.abs(self.E[nonbound] - self.E[i2]))])
            if self.take_step(i1, i2):
                return True
        for i1 in np.roll(nonbound, -int(np.searchsorted(nonbound, i2 + 1))):
            if self.take_step(int(i1), i2):
                return True
        for i1 in np.roll(np.arange(self.n), -(i2 + 1)):
            if self.take_step(int(i1), i2):
                return True
        return False

    def run(self, max_passes):
        examine_all = True
        changed = 0
        passes = 0
        while (changed > 0 or examine_all) and passes < max_passes:
            changed = 0
            if examine_all:
                idx = range(self.n)
            else:
                idx = np.flatnonzero((self.alphas > 0) & (self.alphas < self.C)).tolist()
            for i in idx:
                changed += self.examine(i)
            if examine_all:
                examine_all = False
            elif changed == 0:
                examine_all = True
            passes += 1


def train_smo_svm(train, C: float = 1.0, tol: float = 1e-3, max_passes: int = 10_000) -> SvmModel:
    """Soft-margin linear SVM via SMO on the dual.

    ``max_passes`` caps the number of outer sweeps; training normally
    stops earlier, after a full sweep that changes no multiplier.
    """
    if C <= 0:
        raise TrainingError(f"C must be positive, got {C}")
    X, yi, classes = training_arrays(train)
    if len(classes) != 2:
        raise TrainingError("SMO-SVM needs binary labels")
    y = np.where(yi == 0, 1.0, -1.0)
    n, d = X.shape
    if np.all(y == y[0]):
        # one class present: nothing to separate, predict it everywhere
        return SvmModel(classes, np.zeros(n), y, X[:0], np.zeros(d), float(y[0]), C)
    K = X @ X.T
    smo = _Smo(K, y, C, tol)
    smo.run(max_passes)
    a = smo.alphas
    sv = a > 0
    w = (a * y) @ X
    return SvmModel(
        classes, a.copy(), y, X[sv].copy(), w, float(smo.b), C, dual_trace=tuple(smo.trace)
    )


# -- multilayer perceptron --------------------------------------------------


def _sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


@dataclass
class MlpParams:
    W1: np.ndarray  # (d, H)
    b1: np.ndarray  # (H,)
    W2: np.ndarray  # (H, K)
    b2: np.ndarray  # (K,)

    def copy(self):
        return MlpParams(self.W1.copy(), self.b1.copy(), self.W2.copy(), self.b2.copy())

    def arrays(self):
        return [self.W1, self.b1, self.W2, self.b2]


def mlp_forward(params: MlpParams, X):
    h = _sigmoid(X @ params.W1 + params.b1)
    o = _sigmoid(h @ params.W2 + params.b2)
    return h, o


def mlp_loss(params: MlpParams, X, T) -> float:
    """Half the summed squared error over samples and outputs."""
    _, o = mlp_forward(params, X)
    return 0.5 * float(((o - T) ** 2).sum())


def mlp_gradients(params: MlpParams, X, T) -> MlpParams:
    """Backpropagated gradient of :func:`mlp_loss`."""
    h, o = mlp_forward(params, X)
    delta_o = (o - T) * o * (1.0 - o)
    delta_h = (delta_o @ params.W2.T) * h * (1.0 - h)
    return MlpParams(X.T @ delta_h, delta_h.sum(axis=0), h.T @ delta_o, delta_o.sum(axis=0))


@dataclass(frozen=True, eq=False)
class MlpModel(Classifier):
    classes: tuple[str, ...]
    params: MlpParams
    learning_rate: float
    momentum: float
    epochs: int
    train_rmse: float = float("nan")
    mse_trace: tuple[float, ...] = ()
    name = "mlp"

    def outputs(self, X):
        return mlp_forward(self.params, np.atleast_2d(np.asarray(X, dtype=np.float64)))[1]

    def predict_proba(self, X):
        return normalize_rows(self.outputs(X))


def train_mlp(
    train,
    hidden: int = 16,
    learning_rate: float = 0.3,
    momentum: float = 0.2,
    epochs: int = 500,
    seed=0,
) -> MlpModel:
    """Online backpropagation with momentum on squared error, one-hot targets."""
    if hidden < 1:
        raise TrainingError(f"hidden must be >= 1, got {hidden}")
    if epochs < 1:
        raise TrainingError(f"epochs must be >= 1, got {epochs}")
    X, y, classes = training_arrays(train)
    n, d = X.shape
    K = len(classes)
    T = np.eye(K)[y]
    rng = make_rng(seed)
    params = MlpParams(
        rng.uniform(-1, 1, (d, hidden)) / np.sqrt(max(d, 1)),
        rng.uniform(-1, 1, hidden) / np.sqrt(max(d, 1)),
        rng.uniform(-1, 1, (hidden, K)) / np.sqrt(hidden),
        rng.uniform(-1, 1, K) / np.sqrt(hidden),
    )
    velocity = [np.zeros_like(a) for a in params.arrays()]
    mse_trace = []
    for _ in range(epochs):
        for i in rng.permutation(n):
            g = mlp_gradients(params, X[i : i + 1], T[i : i + 1])
            for p, v, gp in zip(params.arrays(), velocity, g.arrays()):
                v *= momentum
                v -= learning_rate * gp
                p += v
        _, o = mlp_forward(params, X)
        mse_trace.append(float(((o - T) ** 2).mean()))
    model = MlpModel(classes, params, learning_rate, momentum, epochs, mse_trace=tuple(mse_trace))
    P = model.predict_proba(X)
    rmse = float(np.sqrt(((P - T) ** 2).mean()))
    object.__setattr__(model, "train_rmse", rmse)
    return model


# -- genetic algorithm ------------------------------------------------------


def squash(scores):
    """Hard sigmoid ``clip(0.5 + s/2, 0, 1)``: saturates, so zero error is attainable."""
    return np.clip(0.5 + 0.5 * scores, 0.0, 1.0)


def linear_scorer_outputs(chromosome, X, K):
    d = X.shape[1]
    W = chromosome[: d * K].reshape(d, K)
    b = chromosome[d * K :]
    return squash(X @ W + b)


def scorer_mse(chromosome, X, T) -> float:
    """Fitness: mean squared error of squashed scores against one-hot targets."""
    return float(((linear_scorer_outputs(chromosome, X, T.shape[1]) - T) ** 2).mean())


@dataclass(frozen=True, eq=False)
class GaModel(Classifier):
    classes: tuple[str, ...]
    chromosome: np.ndarray
    best_trace: tuple[float, ...]
    avg_trace: tuple[float, ...]
    population_size: int
    generations: int
    name = "ga"

    @property
    def best_fitness(self) -> float:
        return self.best_trace[-1]

    def predict_proba(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return normalize_rows(linear_scorer_outputs(self.chromosome, X, len(self.classes)))

    def trace_rows(self) -> list[tuple[int, float, float]]:
        return [(g + 1, b, a) for g, (b, a) in enumerate(zip(self.best_trace, self.avg_trace))]

    def trace_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["generation", "best_mse", "avg_mse"])
        for g, b, a in self.trace_rows():
            writer.writerow([g, repr(b), repr(a)])
        return buf.getvalue()


def evolve(
    fitness,
    population: np.ndarray,
    generations: int,
    crossover_rate: float,
    mutation_rate: float,
    mutation_scale: float,
    rng: np.random.Generator,
):
    """Generic elitist GA minimizing ``fitness``; returns (best, best_trace, avg_trace)."""
    P, L = population.shape
    scores = np.array([fitness(c) for c in population])
    best_trace, avg_trace = [], []
    for _ in range(generations):
        elite = int(np.argmin(scores))
        children = [population[elite].copy()]
        child_scores = [scores[elite]]
        while len(children) < P:
            a, b = rng.integers(0, P, 2), rng.integers(0, P, 2)
            p1 = population[a[np.argmin(scores[a])]]
            p2 = population[b[np.argmin(scores[b])]]
            child = p1.copy()
            if rng.random() < crossover_rate:
                mask = rng.random(L) < 0.5
                child[mask] = p2[mask]
            if mutation_rate > 0:
                hit = rng.random(L) < mutation_rate
                child[hit] += rng.normal(0.0, mutation_scale, int(hit.sum()))
            children.append(child)
            child_scores.append(fitness(child))
        population = np.array(children)
        scores = np.array(child_scores)
        best_trace.append(float(scores.min()))
        avg_trace.append(float(scores.mean()))
    best = population[int(np.argmin(scores))].copy()
    return best, best_trace, avg_trace


def train_ga(
    train,
    population_size: int = 50,
    generations: int = 10,
    crossover_rate: float = 0.9,
    mutation_rate: float = 0.05,
    seed=0,
    mutation_scale: float = 0.3,
) -> GaModel:
    """Real-coded GA over per-class linear scorer weights.

    Tournament selection of size 2, uniform crossover, Gaussian mutation
    and an elite of one.  The traces hold the best and average fitness of
    each generation's population.
    """
    if population_size < 2:
        raise TrainingError(f"population_size must be >= 2, got {population_size}")
    if generations < 1:
        raise TrainingError(f"generations must be >= 1, got {generations}")
    X, y, classes = training_arrays(train)
    n, d = X.shape
    K = len(classes)
    T = np.eye(K)[y]
    rng = make_rng(seed)
    L = (d + 1) * K
    population = rng.normal(0.0, 1.0 / np.sqrt(d + 1), (population_size, L))
    best, best_trace, avg_trace = evolve(
        lambda c: scorer_mse(c, X, T),
        population,
        generations,
        crossover_rate,
        mutation_rate,
        mutation_scale,
        rng,
    )
    return GaModel(
        classes, best, tuple(best_trace), tuple(avg_trace), population_size, generations
    )
