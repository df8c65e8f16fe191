import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from microarray_classify.dataset import ExpressionDataset  # noqa: E402

DATA_DIR = Path(os.environ.get("PROSTATE_DATA_DIR", Path(__file__).parent.parent / "data"))

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def toy(X, labels, classes=()):
    return ExpressionDataset.from_samples(np.asarray(X, dtype=float), labels, classes=classes)


@pytest.fixture
def two_blobs():
    rng = np.random.default_rng(7)
    X = np.r_[rng.normal(-1.0, 1.0, (30, 4)), rng.normal(1.0, 1.0, (30, 4))]
    return toy(X, ["Tumor"] * 30 + ["Normal"] * 30)


@pytest.fixture
def xor_dataset():
    f1 = np.repeat([0, 0, 1, 1], 25)
    f2 = np.repeat([0, 1, 0, 1], 25)
    labels = ["A" if a ^ b else "B" for a, b in zip(f1, f2)]
    return toy(np.c_[f1, f2], labels, classes=("A", "B"))


def prostate_paths():
    train = DATA_DIR / "prostate_train.csv"
    test = DATA_DIR / "prostate_test.csv"
    return (train, test) if train.exists() and test.exists() else None
