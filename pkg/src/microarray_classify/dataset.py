"""Loading, validation and slicing of two-class gene expression matrices.

Datasets are held in genes-as-rows orientation: ``values[g, s]`` is the
intensity of gene ``g`` in sample ``s``.  Two CSV layouts are understood:

samples-as-rows
    header ``id,<gene ids...>,class``; one line per sample.
genes-as-rows
    header ``id,<sample ids...>``; one line per gene and a final line
    ``class,<labels...>``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SAMPLES_AS_ROWS = "samples-as-rows"
GENES_AS_ROWS = "genes-as-rows"
FORMATS = (SAMPLES_AS_ROWS, GENES_AS_ROWS)
LABEL_KEY = "class"


class DatasetError(ValueError):
    """Raised for malformed or inconsistent expression data."""


@dataclass(frozen=True, eq=False)
class ExpressionDataset:
    """Immutable gene-by-sample expression matrix with binary class labels.

    ``classes`` fixes the label order used for tie-breaking and for the
    column order of probability vectors; by default it is the order of
    first appearance in ``labels``.
    """

    gene_ids: tuple[str, ...]
    values: np.ndarray
    labels: tuple[str, ...]
    sample_ids: tuple[str, ...] = ()
    classes: tuple[str, ...] = field(default=())

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2:
            values = values.reshape(len(self.gene_ids), len(self.labels))
        gene_ids = tuple(str(g) for g in self.gene_ids)
        labels = tuple(str(lab) for lab in self.labels)
        sample_ids = tuple(str(s) for s in self.sample_ids) or tuple(
            f"s{i}" for i in range(len(labels))
        )
        if values.shape != (len(gene_ids), len(labels)):
            raise DatasetError(
                f"shape mismatch: values {values.shape}, "
                f"{len(gene_ids)} gene ids, {len(labels)} labels"
            )
        if len(sample_ids) != len(labels):
            raise DatasetError("sample id count does not match label count")
        if len(set(gene_ids)) != len(gene_ids):
            dup = _first_duplicate(gene_ids)
            raise DatasetError(f"duplicate gene id {dup!r}")
        if not np.all(np.isfinite(values)):
            raise DatasetError("non-finite expression value")
        classes = tuple(self.classes) or tuple(dict.fromkeys(labels))
        if len(classes) != 2 or len(set(classes)) != 2:
            raise DatasetError(
                f"label cardinality: expected exactly 2 distinct labels, got {sorted(set(classes))}"
            )
        stray = set(labels) - set(classes)
        if stray:
            raise DatasetError(f"label cardinality: unexpected labels {sorted(stray)}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "gene_ids", gene_ids)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "sample_ids", sample_ids)
        object.__setattr__(self, "classes", classes)

    @classmethod
    def from_samples(cls, X, labels, gene_ids=None, classes=()):
        """Build from a samples-by-features matrix (the orientation models use)."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if gene_ids is None:
            gene_ids = [f"g{j}" for j in range(X.shape[1])]
        return cls(tuple(gene_ids), X.T, tuple(labels), classes=tuple(classes))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def n_genes(self) -> int:
        return self.values.shape[0]

    @property
    def n_samples(self) -> int:
        return self.values.shape[1]

    @property
    def X(self) -> np.ndarray:
        """Samples-by-genes view of ``values``."""
        return self.values.T

    def label_indices(self) -> np.ndarray:
        """Class index of each sample, following ``classes`` order."""
        lookup = {c: i for i, c in enumerate(self.classes)}
        return np.array([lookup[lab] for lab in self.labels], dtype=np.intp)

    def with_values(self, values) -> "ExpressionDataset":
        """Same ids and labels, new genes-as-rows matrix."""
        return ExpressionDataset(
            self.gene_ids, values, self.labels, self.sample_ids, self.classes
        )

    def equals(self, other: "ExpressionDataset") -> bool:
        return (
            self.gene_ids == other.gene_ids
            and self.labels == other.labels
            and self.sample_ids == other.sample_ids
            and self.values.shape == other.values.shape
            and bool(np.array_equal(self.values, other.values))
        )

    def __repr__(self):
        return (
            f"ExpressionDataset(genes={self.n_genes}, samples={self.n_samples}, "
            f"classes={self.classes})"
        )


def _first_duplicate(items: Iterable[str]):
    seen = set()
    for item in items:
        if item in seen:
            return item
        seen.add(item)
    return None


def _parse_float(cell: str, where: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DatasetError(f"non-numeric cell {cell!r} at {where}") from None
    if not math.isfinite(value):
        raise DatasetError(f"non-finite cell {cell!r} at {where}")
    return value


def sniff_format(path) -> str:
    """Guess the layout of a canonical CSV file from its header and last line."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise DatasetError(f"{path}: empty file")
    if rows[0][-1].strip() == LABEL_KEY:
        return SAMPLES_AS_ROWS
    if rows[-1][0].strip() == LABEL_KEY:
        return GENES_AS_ROWS
    raise DatasetError(f"{path}: no '{LABEL_KEY}' column or row found")


def load_dataset(path, format: str = "auto") -> ExpressionDataset:
    """Read a canonical CSV file into a validated :class:`ExpressionDataset`.

    Parameters
    ----------
    path : path-like
        UTF-8, comma-delimited file.
    format : {"auto", "samples-as-rows", "genes-as-rows"}
        Layout of the file; ``"auto"`` inspects the label column/row.

    Raises
    ------
    DatasetError
        On a missing label, duplicate gene id, non-numeric cell or a label
        set that does not contain exactly two distinct values.
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"{path}: no such file")
    if format == "auto":
        format = sniff_format(path)
    if format not in FORMATS:
        raise DatasetError(f"unknown format {format!r}; expected one of {FORMATS}")

    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if len(rows) < 2:
        raise DatasetError(f"{path}: need a header and at least one data line")
    header = [cell.strip() for cell in rows[0]]

    if format == SAMPLES_AS_ROWS:
        if header[-1] != LABEL_KEY:
            raise DatasetError(f"{path}: last header column must be '{LABEL_KEY}'")
        gene_ids = header[1:-1]
        sample_ids, labels, cols = [], [], []
        for lineno, row in enumerate(rows[1:], start=2):
            if len(row) != len(header):
                raise DatasetError(
                    f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}"
                )
            label = row[-1].strip()
            if not label:
                raise DatasetError(f"{path}:{lineno}: missing label")
            sample_ids.append(row[0].strip())
            labels.append(label)
            cols.append(
                [_parse_float(c, f"{path}:{lineno}") for c in row[1:-1]]
            )
        values = np.array(cols, dtype=np.float64).reshape(len(cols), len(gene_ids)).T
    else:
        sample_ids = header[1:]
        label_row = rows[-1]
        if label_row[0].strip() != LABEL_KEY:
            raise DatasetError(f"{path}: final line must start with '{LABEL_KEY}'")
        if len(label_row) != len(header):
            raise DatasetError(f"{path}: label line length does not match header")
        labels = [cell.strip() for cell in label_row[1:]]
        if any(not lab for lab in labels):
            raise DatasetError(f"{path}: missing label")
        gene_ids, data = [], []
        for lineno, row in enumerate(rows[1:-1], start=2):
            if len(row) != len(header):
                raise DatasetError(
                    f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}"
                )
            gene_ids.append(row[0].strip())
            data.append([_parse_float(c, f"{path}:{lineno}") for c in row[1:]])
        values = np.array(data, dtype=np.float64).reshape(len(gene_ids), len(labels))

    return ExpressionDataset(tuple(gene_ids), values, tuple(labels), tuple(sample_ids))


def save_dataset(ds: ExpressionDataset, path, format: str = GENES_AS_ROWS) -> None:
    """Write ``ds`` as canonical CSV; floats use ``repr`` so reloading is exact."""
    if format not in FORMATS:
        raise DatasetError(f"unknown format {format!r}")
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if format == SAMPLES_AS_ROWS:
            writer.writerow(["id", *ds.gene_ids, LABEL_KEY])
            for j, sid in enumerate(ds.sample_ids):
                writer.writerow([sid, *map(repr, ds.values[:, j].tolist()), ds.labels[j]])
        else:
            writer.writerow(["id", *ds.sample_ids])
            for g, gid in enumerate(ds.gene_ids):
                writer.writerow([gid, *map(repr, ds.values[g].tolist())])
            writer.writerow([LABEL_KEY, *ds.labels])


def class_counts(ds: ExpressionDataset) -> dict[str, int]:
    """Number of samples per label, in ``ds.classes`` order."""
    counts = {c: 0 for c in ds.classes}
    for lab in ds.labels:
        counts[lab] += 1
    return counts


def project_genes(ds: ExpressionDataset, keep: Sequence[int]) -> ExpressionDataset:
    """Restrict ``ds`` to the gene rows in ``keep`` (order preserved)."""
    keep = [int(k) for k in keep]
    if len(set(keep)) != len(keep):
        raise DatasetError(f"duplicate gene index {_first_duplicate(map(str, keep))}")
    for k in keep:
        if not 0 <= k < ds.n_genes:
            raise DatasetError(f"gene index {k} out of range [0, {ds.n_genes})")
    idx = np.asarray(keep, dtype=np.intp)
    return ExpressionDataset(
        tuple(ds.gene_ids[k] for k in keep),
        ds.values[idx].reshape(len(keep), ds.n_samples),
        ds.labels,
        ds.sample_ids,
        ds.classes,
    )


def select_gene_ids(ds: ExpressionDataset, gene_ids: Sequence[str]) -> ExpressionDataset:
    """Project ``ds`` onto named genes, e.g. a test set onto the training selection."""
    lookup = {g: i for i, g in enumerate(ds.gene_ids)}
    missing = [g for g in gene_ids if g not in lookup]
    if missing:
        raise DatasetError(f"{len(missing)} selected genes absent, e.g. {missing[0]!r}")
    return project_genes(ds, [lookup[g] for g in gene_ids])
