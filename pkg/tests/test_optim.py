import numpy as np
import pytest

from microarray_classify.core import SeedSpec, TrainingError
from microarray_classify.classifiers.optim import (
    MlpParams,
    evolve,
    kkt_violations,
    mlp_gradients,
    mlp_loss,
    scorer_mse,
    train_ga,
    train_mlp,
    train_smo_svm,
)

from conftest import toy


def separable(seed, n=30, d=3, margin=0.3):
    rng = np.random.default_rng(seed)
    w = rng.normal(size=d)
    w /= np.linalg.norm(w)
    X = rng.normal(size=(4 * n, d))
    s = X @ w
    X = X[np.abs(s) > margin][:n]
    labels = ["A" if v > 0 else "B" for v in X @ w]
    if len(set(labels)) < 2:
        labels[0] = "A" if labels[0] == "B" else "B"
        X[0] = -X[0]
    return toy(X, labels, classes=("A", "B"))


class TestSmo:
    def test_two_points(self):
        ds = toy([[-1.0], [1.0]], ["B", "A"], classes=("A", "B"))
        model = train_smo_svm(ds, C=10.0)
        np.testing.assert_allclose(model.alphas, [0.5, 0.5], atol=1e-6)
        assert model.b == pytest.approx(0.0, abs=1e-6)
        np.testing.assert_allclose(model.w, [1.0], atol=1e-6)
        xs = np.linspace(-3, 3, 13).reshape(-1, 1)
        np.testing.assert_allclose(model.decision_function(xs), xs[:, 0], atol=1e-6)

    @pytest.mark.parametrize("seed", range(50))
    def test_kkt_on_separable_sets(self, seed):
        ds = separable(seed)
        C, tol = 1.0, 1e-3
        model = train_smo_svm(ds, C=C, tol=tol)
        a, y = model.alphas, model.y
        assert np.all((a >= 0) & (a <= C))
        assert abs(float(a @ y)) <= 1e-8
        f = model.decision_function(ds.X)
        assert not kkt_violations(a, y, f, C, tol).any()
        trace = model.dual_trace
        assert all(b >= a_ - 1e-12 for a_, b in zip(trace, trace[1:]))

    def test_duplication_invariance(self):
        ds = separable(3, n=24)
        once = train_smo_svm(ds, C=100.0)
        twice = train_smo_svm(toy(np.r_[ds.X, ds.X], ds.labels * 2, classes=ds.classes), C=100.0)
        probe = np.random.default_rng(0).normal(size=(400, ds.n_genes))
        f1, f2 = once.decision_function(probe), twice.decision_function(probe)
        clear = np.abs(f1) > 0.05
        assert np.array_equal(np.sign(f1[clear]), np.sign(f2[clear]))
        w1, w2 = once.w / np.linalg.norm(once.w), twice.w / np.linalg.norm(twice.w)
        assert w1 @ w2 > 0.999

    def test_one_class(self):
        ds = toy([[1.0, 2.0], [3.0, 1.0]], ["A", "A"], classes=("A", "B"))
        model = train_smo_svm(ds)
        probe = np.random.default_rng(0).normal(scale=5, size=(20, 2))
        assert set(model.predict_labels(probe)) == {"A"}

    def test_bad_c(self):
        with pytest.raises(TrainingError):
            train_smo_svm(separable(0), C=0.0)


class TestMlp:
    def test_gradient_check(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(3, 4))
        T = np.eye(2)[[0, 1, 1]]
        params = MlpParams(
            rng.normal(size=(4, 3)), rng.normal(size=3), rng.normal(size=(3, 2)), rng.normal(size=2)
        )
        grads = mlp_gradients(params, X, T)
        h = 1e-6
        for arr, g in zip(params.arrays(), grads.arrays()):
            for idx in np.ndindex(arr.shape):
                old = arr[idx]
                arr[idx] = old + h
                up = mlp_loss(params, X, T)
                arr[idx] = old - h
                down = mlp_loss(params, X, T)
                arr[idx] = old
                numeric = (up - down) / (2 * h)
                assert abs(g[idx] - numeric) <= 1e-4 * max(abs(numeric), 1e-3)

    def test_xor_with_two_hidden_units(self):
        ds = toy([[0, 0], [0, 1], [1, 0], [1, 1]], ["B", "A", "A", "B"], classes=("A", "B"))
        finals = []
        for seed in range(10):
            model = train_mlp(ds, hidden=2, learning_rate=0.5, momentum=0.9, epochs=2000, seed=SeedSpec(seed))
            finals.append(model.mse_trace[-1])
        assert min(finals) < 0.05

    def test_constant_labels(self):
        ds = toy(np.random.default_rng(0).normal(size=(12, 3)), ["A"] * 12, classes=("A", "B"))
        model = train_mlp(ds, epochs=200)
        P = model.predict_proba(np.random.default_rng(1).normal(size=(20, 3)))
        assert P[:, 0].min() > 0.9

    def test_reports_train_rmse(self, two_blobs):
        model = train_mlp(two_blobs, epochs=30)
        assert 0.0 <= model.train_rmse <= 1.0
        assert len(model.mse_trace) == 30
        assert np.all(np.isfinite(model.params.W1))

    @pytest.mark.parametrize("kwargs", [{"hidden": 0}, {"epochs": 0}])
    def test_errors(self, two_blobs, kwargs):
        with pytest.raises(TrainingError):
            train_mlp(two_blobs, **kwargs)


def ga_toy():
    X = np.array([[1.0], [1.5], [2.0], [-1.0], [-1.5], [-2.0]])
    return toy(X, ["A"] * 3 + ["B"] * 3, classes=("A", "B"))


class TestGa:
    def test_zero_error_chromosome_is_kept(self):
        ds = ga_toy()
        X, T = ds.X, np.eye(2)[ds.label_indices()]
        perfect = np.array([1.0, -1.0, 0.0, 0.0])
        assert scorer_mse(perfect, X, T) == 0.0
        rng = np.random.default_rng(0)
        population = np.r_[perfect[None], rng.normal(size=(9, 4))]
        best, best_trace, _ = evolve(lambda c: scorer_mse(c, X, T), population, 15, 0.9, 0.3, 0.3, rng)
        assert best_trace == [0.0] * 15
        assert scorer_mse(best, X, T) == 0.0

    def test_best_trace_monotone(self):
        for seed in range(100):
            ds = separable(seed, n=20, d=3)
            model = train_ga(ds, population_size=12, generations=10, seed=SeedSpec(seed))
            trace = model.best_trace
            assert len(trace) == 10
            assert all(b <= a for a, b in zip(trace, trace[1:]))

    def test_no_variation_keeps_best(self):
        model = train_ga(separable(1), population_size=10, generations=8,
                         crossover_rate=0.0, mutation_rate=0.0, seed=3)
        assert len(set(model.best_trace)) == 1

    def test_1d_toy(self):
        model = train_ga(ga_toy(), generations=50)
        assert model.best_fitness < 1e-2
        assert model.predict_labels(ga_toy().X) == list(ga_toy().labels)

    def test_trace_csv(self):
        model = train_ga(ga_toy(), generations=10)
        lines = model.trace_csv().strip().splitlines()
        assert lines[0] == "generation,best_mse,avg_mse"
        assert len(lines) == 11
        assert [int(r.split(",")[0]) for r in lines[1:]] == list(range(1, 11))

    def test_errors(self):
        with pytest.raises(TrainingError):
            train_ga(ga_toy(), population_size=1)
