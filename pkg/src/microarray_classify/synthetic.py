"""Synthetic two-class expression data with planted differential genes."""

from __future__ import annotations

import numpy as np

from .dataset import ExpressionDataset


def make_planted_dataset(
    n_genes: int = 5000,
    n_planted: int = 50,
    n_tumor: int = 52,
    n_normal: int = 50,
    gap: float = 2.0,
    noise: float = 1.0,
    baseline: float = 0.0,
    scale: float = 1.0,
    seed: int = 0,
    planted=None,
    labels=("Tumor", "Normal"),
) -> tuple[ExpressionDataset, np.ndarray]:
    """Gaussian noise matrix; planted genes are shifted by ``gap`` in the first class.

    Raw values are ``baseline + scale * (noise * N(0, 1) + gap * [planted & first class])``.
    Returns the dataset and the sorted planted gene indices.  Passing the
    same ``planted`` indices gives an independent sample from the same
    distribution (e.g. a test set).
    """
    rng = np.random.default_rng(seed)
    n = n_tumor + n_normal
    if planted is None:
        planted = np.sort(rng.choice(n_genes, size=n_planted, replace=False))
    planted = np.asarray(planted, dtype=np.intp)
    values = noise * rng.standard_normal((n_genes, n))
    values[np.ix_(planted, np.arange(n_tumor))] += gap
    values = baseline + scale * values
    sample_labels = [labels[0]] * n_tumor + [labels[1]] * n_normal
    order = rng.permutation(n)
    ds = ExpressionDataset(
        tuple(f"gene_{g:05d}" for g in range(n_genes)),
        values[:, order],
        tuple(sample_labels[i] for i in order),
        tuple(f"sample_{i:03d}" for i in range(n)),
        classes=tuple(labels),
    )
    return ds, planted
