"""Robust IQR normalization and pooled two-sample t-test gene filtering."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .dataset import DatasetError, ExpressionDataset, project_genes


class DegenerateGeneError(ArithmeticError):
    """Both groups are constant with the same spread of zero: no t statistic."""


def quantile(xs, q: float) -> float:
    """Linear-interpolation quantile with ``h = (n - 1) * q`` on the sorted values."""
    xs = np.asarray(xs, dtype=np.float64).ravel()
    if xs.size == 0:
        raise ValueError("quantile of an empty list")
    if not np.all(np.isfinite(xs)):
        raise ValueError("quantile input contains non-finite values")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    return float(row_quantiles(xs[None, :], q)[0])


def row_quantiles(M: np.ndarray, q: float) -> np.ndarray:
    """Quantile ``q`` of every row of ``M``, same convention as :func:`quantile`."""
    s = np.sort(np.asarray(M, dtype=np.float64), axis=1)
    n = s.shape[1]
    h = (n - 1) * q
    lo = int(math.floor(h))
    frac = h - lo
    if lo >= n - 1:
        return s[:, n - 1].copy()
    return s[:, lo] + frac * (s[:, lo + 1] - s[:, lo])


def iqr(xs) -> float:
    return quantile(xs, 0.75) - quantile(xs, 0.25)


@dataclass(frozen=True)
class NormalizationParams:
    """Per-gene median and IQR fitted on a training matrix."""

    median: np.ndarray
    iqr: np.ndarray

    def __len__(self):
        return len(self.median)

    def subset(self, keep) -> "NormalizationParams":
        keep = np.asarray(keep, dtype=np.intp)
        return NormalizationParams(self.median[keep], self.iqr[keep])


def fit_normalization(train: ExpressionDataset) -> NormalizationParams:
    if train.n_samples < 2:
        raise DatasetError("normalization needs at least 2 samples")
    V = train.values
    median = row_quantiles(V, 0.5)
    spread = row_quantiles(V, 0.75) - row_quantiles(V, 0.25)
    # rounding can leave -0.0 or tiny negatives on constant rows
    spread = np.maximum(spread, 0.0)
    return NormalizationParams(median, spread)


def apply_normalization(ds: ExpressionDataset, params: NormalizationParams) -> ExpressionDataset:
    """Robust z-score ``(x - median) / iqr`` per gene, using fixed ``params``."""
    if ds.n_genes != len(params):
        raise DatasetError(
            f"dataset has {ds.n_genes} genes but parameters cover {len(params)}"
        )
    zero = np.flatnonzero(params.iqr <= 0)
    if zero.size:
        raise DatasetError(
            f"{zero.size} zero-IQR genes present (first: {ds.gene_ids[zero[0]]!r}); "
            "project them away before normalizing"
        )
    Z = (ds.values - params.median[:, None]) / params.iqr[:, None]
    return ds.with_values(Z)


@dataclass(frozen=True)
class TTestResult:
    """Per-gene pooled t statistics; ``pooled_sd`` is the S_x1x2 term."""

    t: np.ndarray
    pooled_sd: np.ndarray
    p: np.ndarray
    df: int


def t_statistic(x1, x2) -> tuple[float, float]:
    """Pooled-variance two-sample t statistic and pooled standard deviation.

    Raises :class:`DegenerateGeneError` when the pooled deviation is zero.
    """
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if x1.size < 2 or x2.size < 2:
        raise ValueError("each sample needs at least 2 values")
    t, s = row_t_statistics(x1[None, :], x2[None, :])
    if s[0] == 0:
        raise DegenerateGeneError("pooled standard deviation is zero")
    return float(t[0]), float(s[0])


def row_t_statistics(A: np.ndarray, B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise pooled t between columns of ``A`` and ``B``.

    Degenerate rows (zero pooled deviation) get ``t = nan``.
    """
    n1, n2 = A.shape[1], B.shape[1]
    m1, m2 = A.mean(axis=1), B.mean(axis=1)
    v1 = A.var(axis=1, ddof=1)
    v2 = B.var(axis=1, ddof=1)
    pooled = np.sqrt(((n1 - 1) * v1 + (n2 - 1) * v2) / (n1 + n2 - 2))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (m1 - m2) / (pooled * math.sqrt(1.0 / n1 + 1.0 / n2))
    t[pooled == 0] = np.nan
    return t, pooled


def p_value_two_tailed(t, df: int):
    """Two-sided Student-t tail probability ``2 P(T_df >= |t|)``.

    Uses ``I_{df/(df+t^2)}(df/2, 1/2)``.  Accepts scalars or arrays.
    """
    if df < 1:
        raise ValueError(f"df must be >= 1, got {df}")
    t = np.asarray(t, dtype=np.float64)
    with np.errstate(over="ignore"):
        x = df / (df + t * t)
    p = special.betainc(df / 2.0, 0.5, x)
    p = np.clip(p, 0.0, 1.0)
    return float(p) if p.ndim == 0 else p


def t_test_genes(ds: ExpressionDataset) -> TTestResult:
    """Pooled t-test of every gene between the two label groups.

    The first class in ``ds.classes`` is group 1.
    """
    y = ds.label_indices()
    n1, n2 = int(np.sum(y == 0)), int(np.sum(y == 1))
    if n1 < 2 or n2 < 2:
        raise DatasetError(
            f"each class needs at least 2 samples for a t-test, got {n1} and {n2}"
        )
    t, pooled = row_t_statistics(ds.values[:, y == 0], ds.values[:, y == 1])
    df = n1 + n2 - 2
    p = np.where(np.isnan(t), 1.0, p_value_two_tailed(np.nan_to_num(t), df))
    return TTestResult(t=t, pooled_sd=pooled, p=p, df=df)


@dataclass(frozen=True)
class SelectionResult:
    """Outcome of gene filtering on a training set.

    ``keep`` indexes genes of the original training matrix.  ``norm`` and
    ``ttest`` cover every original gene (zero-IQR genes carry ``p = 1``),
    so a test matrix with the same gene ids can be projected with ``keep``
    and normalized with ``norm.subset(keep)``.
    """

    keep: np.ndarray
    alpha: float
    ttest: TTestResult
    norm: NormalizationParams
    gene_ids: tuple[str, ...]

    @property
    def kept_gene_ids(self) -> tuple[str, ...]:
        return tuple(self.gene_ids[k] for k in self.keep)

    @property
    def kept_norm(self) -> NormalizationParams:
        return self.norm.subset(self.keep)

    def transform(self, ds: ExpressionDataset) -> ExpressionDataset:
        """Project ``ds`` onto the kept genes and normalize with training params."""
        from .dataset import select_gene_ids

        if ds.gene_ids == self.gene_ids:
            projected = project_genes(ds, self.keep)
        else:
            projected = select_gene_ids(ds, self.kept_gene_ids)
        return apply_normalization(projected, self.kept_norm)

    def to_dict(self) -> dict:
        keep = self.keep.tolist()
        return {
            "alpha": self.alpha,
            "df": self.ttest.df,
            "n_genes_before": len(self.gene_ids),
            "n_genes_after": len(keep),
            "kept_gene_ids": list(self.kept_gene_ids),
            "kept_indices": keep,
            "genes": {
                self.gene_ids[g]: {
                    "t": _finite_or_none(self.ttest.t[g]),
                    "p": float(self.ttest.p[g]),
                    "median": float(self.norm.median[g]),
                    "iqr": float(self.norm.iqr[g]),
                }
                for g in range(len(self.gene_ids))
            },
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "SelectionResult":
        ids = tuple(d["genes"])
        rows = [d["genes"][g] for g in ids]
        t = np.array([np.nan if r["t"] is None else r["t"] for r in rows])
        ttest = TTestResult(
            t=t,
            pooled_sd=np.full(len(ids), np.nan),
            p=np.array([r["p"] for r in rows]),
            df=int(d["df"]),
        )
        norm = NormalizationParams(
            np.array([r["median"] for r in rows]), np.array([r["iqr"] for r in rows])
        )
        return cls(
            keep=np.asarray(d["kept_indices"], dtype=np.intp),
            alpha=float(d["alpha"]),
            ttest=ttest,
            norm=norm,
            gene_ids=ids,
        )


def _finite_or_none(x):
    x = float(x)
    return x if math.isfinite(x) else None


def select_genes(train: ExpressionDataset, alpha: float = 0.001) -> SelectionResult:
    """Normalize on the training data, t-test each gene, keep ``p < alpha``.

    Zero-IQR genes are dropped before testing; degenerate genes (zero
    pooled deviation after normalization) are never kept.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    counts = np.bincount(train.label_indices(), minlength=2)
    if counts.min() < 2:
        raise DatasetError(
            f"each class needs at least 2 samples, got {dict(zip(train.classes, counts.tolist()))}"
        )
    norm = fit_normalization(train)
    live = np.flatnonzero(norm.iqr > 0)

    G = train.n_genes
    t_all = np.full(G, np.nan)
    sd_all = np.zeros(G)
    p_all = np.ones(G)
    df = train.n_samples - 2
    if live.size:
        normalized = apply_normalization(project_genes(train, live), norm.subset(live))
        res = t_test_genes(normalized)
        t_all[live], sd_all[live], p_all[live] = res.t, res.pooled_sd, res.p
        df = res.df
    ttest = TTestResult(t=t_all, pooled_sd=sd_all, p=p_all, df=df)

    selectable = (norm.iqr > 0) & np.isfinite(t_all)
    # alpha == 1 is the vacuous threshold: genes with t == 0 (p == 1) stay too
    passed = p_all < alpha if alpha < 1.0 else np.ones(G, dtype=bool)
    keep = np.flatnonzero(selectable & passed)
    return SelectionResult(
        keep=keep, alpha=float(alpha), ttest=ttest, norm=norm, gene_ids=train.gene_ids
    )
