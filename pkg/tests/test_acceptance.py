"""Acceptance criteria, each checked at its stated tolerance and time budget.

Every test appends one PASS/FAIL/SKIP line to the summary printed at the
end of the pytest run.
"""

import itertools
import time

import numpy as np
import pytest

from microarray_classify import classifiers
from microarray_classify.classifiers.ensemble import train_logitboost
from microarray_classify.classifiers.optim import (
    MlpParams,
    kkt_violations,
    mlp_gradients,
    mlp_loss,
    train_ga,
    train_smo_svm,
)
from microarray_classify.classifiers.prob import train_bayes_net, train_naive_bayes
from microarray_classify.classifiers.tree import train_c45
from microarray_classify.core import SeedSpec
from microarray_classify.dataset import load_dataset
from microarray_classify.evaluation import (
    DEFAULT_FACTORS,
    ConfusionMatrix,
    metrics,
    sensitivity_specificity_csv,
)
from microarray_classify.pipeline import PipelineConfig, run_pipeline
from microarray_classify.preprocess import (
    iqr,
    p_value_two_tailed,
    quantile,
    select_genes,
    t_statistic,
)
from microarray_classify.synthetic import make_planted_dataset

from conftest import ACCEPTANCE_LINES, prostate_paths, toy
from oracles import p_two_tailed_quadrature, pooled_t, quantile_sorted


def record(name, ok, detail, elapsed=None):
    timing = f" ({elapsed:.2f}s)" if elapsed is not None else ""
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}{timing}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


class Clock:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


# -- metric reproduction ------------------------------------------------------

# (technique, tp, fn, tn, fp, reported accuracy %)
REPORTED = [
    ("Bayes Net", 23, 2, 9, 0, 94.11),
    ("Naive Bayes", 22, 3, 9, 0, 91.17),
    ("LogitBoost", 21, 4, 9, 0, 88.23),
    ("C4.5", 19, 6, 5, 4, 70.58),
    ("LMT", 20, 5, 9, 0, 85.29),
    ("Random Forest", 19, 6, 9, 0, 82.35),
    ("Decision Table", 19, 6, 8, 1, 79.41),
    ("SMO", 18, 7, 9, 0, 79.41),
    ("Neural Network", 18, 7, 9, 0, 79.41),
]


def test_metric_reproduction():
    with Clock() as clock:
        worst = 0.0
        for _, tp, fn, tn, fp, pct in REPORTED:
            m = metrics(ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn))
            worst = max(worst, abs(100.0 * m.accuracy - pct))
        bn = metrics(ConfusionMatrix(tp=23, fp=0, tn=9, fn=2))
        ok = worst <= 0.01 and bn.sensitivity == 0.92 and bn.specificity == 1.0
    record(
        "metric reproduction",
        ok and clock.elapsed < 1.0,
        f"{len(REPORTED)} rows, max |accuracy% - reported| = {worst:.4f} (<= 0.01)",
        clock.elapsed,
    )


# -- preprocess oracle equivalence -----------------------------------------------


def test_preprocess_oracle_equivalence():
    rng = np.random.default_rng(2024)
    stat_err = p_err = 0.0
    with Clock() as clock:
        for _ in range(1000):
            n1, n2 = rng.integers(2, 9, size=2)
            x1 = rng.normal(rng.uniform(-5, 5), rng.uniform(0.1, 3), n1).tolist()
            x2 = rng.normal(rng.uniform(-5, 5), rng.uniform(0.1, 3), n2).tolist()
            both = x1 + x2
            for q in (0.0, 0.25, 0.5, 0.75, 1.0, float(rng.uniform())):
                stat_err = max(stat_err, abs(quantile(both, q) - quantile_sorted(both, q)) / max(1.0, abs(quantile_sorted(both, q))))
            ref_iqr = quantile_sorted(both, 0.75) - quantile_sorted(both, 0.25)
            stat_err = max(stat_err, abs(iqr(both) - ref_iqr) / max(1.0, ref_iqr))
            t, s = t_statistic(x1, x2)
            t_ref, s_ref = pooled_t(x1, x2)
            stat_err = max(stat_err, abs(t - t_ref) / max(1.0, abs(t_ref)), abs(s - s_ref) / max(1.0, s_ref))
            df = n1 + n2 - 2
            p_err = max(p_err, abs(p_value_two_tailed(t, df) - p_two_tailed_quadrature(t_ref, df)))
    record(
        "preprocess oracle equivalence",
        stat_err <= 1e-9 and p_err <= 1e-6 and clock.elapsed < 10.0,
        f"1000 vectors, max stat err {stat_err:.2e} (<= 1e-9), max p err {p_err:.2e} (<= 1e-6)",
        clock.elapsed,
    )


# -- planted-gene recovery ------------------------------------------------------


def test_planted_gene_recovery():
    recovered, false_pos = [], []
    with Clock() as clock:
        for seed in range(20):
            ds, planted = make_planted_dataset(
                n_genes=5000, n_planted=50, n_tumor=52, n_normal=50, gap=2.0, noise=1.0, seed=seed
            )
            kept = set(select_genes(ds, 0.001).keep.tolist())
            hits = len(kept & set(planted.tolist()))
            recovered.append(hits)
            false_pos.append(len(kept) - hits)
    mean_rec, mean_fp = float(np.mean(recovered)), float(np.mean(false_pos))
    record(
        "planted-gene recovery",
        mean_rec >= 45 and mean_fp <= 15 and clock.elapsed < 30.0,
        f"20 seeds, mean recovered {mean_rec:.2f}/50 (>= 45), mean false positives {mean_fp:.2f} (<= 15)",
        clock.elapsed,
    )


# -- conditional dataset reproduction ---------------------------------------------


def test_conditional_prostate_reproduction():
    paths = prostate_paths()
    if paths is None:
        ACCEPTANCE_LINES.append("[SKIP] conditional prostate reproduction: data files not present")
        pytest.skip("prostate data files not present")
    train, test = load_dataset(paths[0]), load_dataset(paths[1])
    report = run_pipeline(PipelineConfig(scale_factors=[1.0]), train=train, test=test)
    n_sel = report.selection["n_genes_after"]
    acc = {n: r.test_metrics.accuracy for n, r in report.results.items()}
    ranking = sorted(acc, key=lambda n: -acc[n])
    bn_rank = 1 + sum(acc[n] > acc["bayes-net"] for n in acc)
    ok = abs(n_sel - 856) <= 90 and acc["bayes-net"] >= 0.85 and acc["naive-bayes"] >= 0.85 and bn_rank <= 2
    record(
        "conditional prostate reproduction",
        ok,
        f"{n_sel} genes (856 +/- 90), BN {acc['bayes-net']:.4f}, NB {acc['naive-bayes']:.4f} (>= 0.85), "
        f"BN rank {bn_rank} (<= 2), order {ranking}",
    )


# -- classifier property suites ---------------------------------------------------


def test_property_nb_posterior_normalization():
    rng = np.random.default_rng(0)
    X = np.r_[rng.normal(-1, 1, (40, 6)), rng.normal(1, 2, (40, 6))]
    ds = toy(X, ["Tumor"] * 40 + ["Normal"] * 40)
    with Clock() as clock:
        P = train_naive_bayes(ds).predict_proba(rng.normal(scale=25.0, size=(10_000, 6)))
        err = float(np.abs(P.sum(axis=1) - 1.0).max())
    record(
        "property: naive Bayes posterior normalization",
        err < 1e-9 and np.all(P >= 0) and clock.elapsed < 60.0,
        f"10^4 inputs, max |sum p - 1| = {err:.2e} (< 1e-9)",
        clock.elapsed,
    )


def test_property_bn_joint_enumeration():
    worst = 0.0
    with Clock() as clock:
        for seed in range(10):
            rng = np.random.default_rng(seed)
            d = 1 + seed % 3  # class node plus up to 3 features
            X = rng.integers(0, 3, size=(80, d)).astype(float)
            X[:, -1] = (X[:, 0] + (rng.random(80) < 0.2)) % 3
            ds = toy(X, ["A" if v else "B" for v in (X[:, 0] + rng.integers(0, 2, 80)) % 2])
            model = train_bayes_net(ds, discretizer_k=3, max_parents=2)
            grid = np.array(list(itertools.product(*[range(int(b)) for b in model.n_bins])))
            worst = max(worst, abs(float(np.exp(model.log_joint_binned(grid)).sum()) - 1.0))
    record(
        "property: Bayes net joint sums to one",
        worst <= 1e-6 and clock.elapsed < 60.0,
        f"10 nets with <= 4 nodes, max |sum P - 1| = {worst:.2e} (<= 1e-6)",
        clock.elapsed,
    )


def random_separable(seed, n=30, d=3):
    rng = np.random.default_rng(seed)
    w = rng.normal(size=d)
    X = rng.normal(size=(6 * n, d))
    s = X @ w / np.linalg.norm(w)
    X = X[np.abs(s) > 0.3][:n]
    labels = ["A" if v > 0 else "B" for v in X @ w]
    if len(set(labels)) < 2:
        X[0], labels[0] = -X[0], ("A" if labels[0] == "B" else "B")
    return toy(X, labels, classes=("A", "B"))


def test_property_smo():
    with Clock() as clock:
        two = train_smo_svm(toy([[-1.0], [1.0]], ["B", "A"], classes=("A", "B")), C=10.0)
        xs = np.linspace(-2, 2, 9).reshape(-1, 1)
        two_err = max(
            float(np.abs(two.alphas - 0.5).max()),
            abs(two.b),
            float(np.abs(two.decision_function(xs) - xs[:, 0]).max()),
        )
        violations, eq_err = 0, 0.0
        for seed in range(50):
            ds = random_separable(seed)
            m = train_smo_svm(ds, C=1.0, tol=1e-3)
            violations += int(kkt_violations(m.alphas, m.y, m.decision_function(ds.X), 1.0, 1e-3).sum())
            violations += int(np.sum((m.alphas < 0) | (m.alphas > 1.0)))
            eq_err = max(eq_err, abs(float(m.alphas @ m.y)))
    record(
        "property: SMO analytic solution and KKT",
        two_err <= 1e-6 and violations == 0 and eq_err <= 1e-8 and clock.elapsed < 60.0,
        f"two-point err {two_err:.2e} (<= 1e-6); 50 separable sets, {violations} KKT violations, "
        f"max |sum alpha y| {eq_err:.2e}",
        clock.elapsed,
    )


def test_property_mlp_gradient_check():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(3, 4))
    T = np.eye(2)[[0, 1, 0]]
    params = MlpParams(rng.normal(size=(4, 5)), rng.normal(size=5), rng.normal(size=(5, 2)), rng.normal(size=2))
    worst = 0.0
    with Clock() as clock:
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
                worst = max(worst, abs(g[idx] - numeric) / max(abs(numeric), 1e-3))
    record(
        "property: MLP gradient check",
        worst <= 1e-4 and clock.elapsed < 60.0,
        f"3-sample toy network, max relative error {worst:.2e} (<= 1e-4)",
        clock.elapsed,
    )


def test_property_ga_elitism():
    bad = 0
    with Clock() as clock:
        for seed in range(100):
            ds = random_separable(seed, n=24, d=4)
            trace = train_ga(ds, population_size=20, generations=10, seed=SeedSpec(seed)).best_trace
            bad += len(trace) != 10 or any(b > a for a, b in zip(trace, trace[1:]))
    record(
        "property: GA best-fitness trace monotone",
        bad == 0 and clock.elapsed < 60.0,
        f"100 seeded runs, {bad} non-monotone traces",
        clock.elapsed,
    )


def random_increasing(rng):
    kind = rng.integers(0, 5)
    a, b = rng.uniform(0.2, 3.0), rng.uniform(-10, 10)
    return [
        lambda x: a * x + b,
        lambda x: np.exp(a * x / 4),
        lambda x: x**3 + a * x,
        lambda x: np.arcsinh(a * x) + b,
        lambda x: np.tanh(a * x / 8),
    ][kind]


def test_property_c45_partition_invariance():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(90, 6))
    score = X[:, 0] - X[:, 1] * X[:, 2] + 0.5 * rng.normal(size=90)
    ds = toy(X, ["Tumor" if s > 0 else "Normal" for s in score])
    base = train_c45(ds)
    base_leaves = base.leaf_ids(ds.X)
    mismatches = 0
    with Clock() as clock:
        for _ in range(10):
            moved = ds.X.copy()
            for j in range(moved.shape[1]):
                moved[:, j] = random_increasing(rng)(moved[:, j])
            assert all(np.all(np.diff(moved[np.argsort(ds.X[:, j]), j]) > 0) for j in range(6))
            other = train_c45(toy(moved, list(ds.labels), classes=ds.classes))
            mismatches += not np.array_equal(other.leaf_ids(moved), base_leaves)
            mismatches += other.predict_labels(moved) != base.predict_labels(ds.X)
    record(
        "property: C4.5 partition invariance",
        mismatches == 0 and clock.elapsed < 60.0,
        f"10 random strictly increasing transforms, {mismatches} mismatches",
        clock.elapsed,
    )


def test_property_logitboost_monotone():
    bad = 0
    with Clock() as clock:
        for seed in range(20):
            rng = np.random.default_rng(seed)
            X = rng.normal(size=(70, 8))
            score = X[:, 0] + 0.8 * X[:, 1] * X[:, 2] + 0.7 * rng.normal(size=70)
            ds = toy(X, ["Tumor" if s > 0 else "Normal" for s in score])
            trace = train_logitboost(ds, n_stages=100, shrinkage=1.0).deviance_trace
            bad += any(b > a for a, b in zip(trace, trace[1:]))
    record(
        "property: LogitBoost deviance monotone",
        bad == 0 and clock.elapsed < 60.0,
        f"20 seeded runs, {bad} traces with an increase",
        clock.elapsed,
    )


# -- robustness harness and end-to-end determinism --------------------------------


@pytest.fixture(scope="module")
def synthetic_pair():
    train, planted = make_planted_dataset(n_genes=2000, n_planted=40, gap=1.5, baseline=1000.0, scale=100.0, seed=0)
    test, _ = make_planted_dataset(
        n_genes=2000, n_tumor=25, n_normal=9, gap=1.5, baseline=1000.0, scale=100.0, seed=1, planted=planted
    )
    return train, test


def test_robustness_harness(synthetic_pair):
    train, test = synthetic_pair
    names = list(classifiers.CANONICAL_NAMES)
    with Clock() as clock:
        ident = run_pipeline(PipelineConfig(scale_factors=[1.0], seed=3), train=train, test=test)
        identical = all(
            r.robustness.per_factor[0] == r.test_metrics for r in ident.results.values()
        )
        six = run_pipeline(PipelineConfig(scale_factors=list(DEFAULT_FACTORS), seed=3), train=train, test=test)
        sweeps = {n: r.robustness for n, r in six.results.items()}
        lines = sensitivity_specificity_csv(sweeps).strip().splitlines()
        rows = [line.split(",") for line in lines[1:]]
        shape_ok = len(rows) == 2 * len(names) and all(len(r) == 2 + 6 for r in rows)
        shape_ok &= all([r[1] for r in rows[2 * i : 2 * i + 2]] == ["Sn", "Sp"] for i in range(len(names)))
        mean_err = max(
            abs(rep.means[k] - sum(getattr(m, k) for m in rep.per_factor) / 6)
            for rep in sweeps.values()
            for k in rep.means
        )
    record(
        "robustness harness",
        identical and shape_ok and mean_err <= 1e-12,
        f"factor 1 bit-identical: {identical}; Sn/Sp CSV {len(rows)} rows x 6 factors; "
        f"max mean error {mean_err:.1e} (<= 1e-12)",
        clock.elapsed,
    )


def test_end_to_end_determinism(synthetic_pair):
    train, test = synthetic_pair
    runs, times = [], []
    for _ in range(2):
        with Clock() as clock:
            report = run_pipeline(PipelineConfig(seed=11), train=train, test=test)
        runs.append(report.canonical_json().encode())
        times.append(clock.elapsed)
    record(
        "end-to-end determinism",
        runs[0] == runs[1] and len(report.results) == 10 and max(times) < 60.0,
        f"two all-ten runs byte-identical: {runs[0] == runs[1]}; slowest run {max(times):.2f}s (< 60 s)",
    )
