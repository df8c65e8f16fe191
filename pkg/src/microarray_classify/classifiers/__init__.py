"""The ten classifiers, addressable by their canonical names."""

from __future__ import annotations

import inspect

from ..core import SeedSpec
from .ensemble import train_logitboost, train_random_forest
from .optim import train_ga, train_mlp, train_smo_svm
from .prob import train_bayes_net, train_naive_bayes
from .tree import train_c45, train_decision_table, train_lmt

TRAINERS = {
    "bayes-net": train_bayes_net,
    "naive-bayes": train_naive_bayes,
    "logit-boost": train_logitboost,
    "c45": train_c45,
    "lmt": train_lmt,
    "random-forest": train_random_forest,
    "decision-table": train_decision_table,
    "smo-svm": train_smo_svm,
    "mlp": train_mlp,
    "ga": train_ga,
}
CANONICAL_NAMES = tuple(TRAINERS)

DISPLAY_NAMES = {
    "bayes-net": "Bayes Net",
    "naive-bayes": "Naive Bayes",
    "logit-boost": "Logit Boost",
    "c45": "C4.5",
    "lmt": "Logistic Model Tree",
    "random-forest": "Random Forest",
    "decision-table": "Decision Table",
    "smo-svm": "SMO-SVM",
    "mlp": "Neural Network",
    "ga": "Genetic Algorithm",
}


def hyperparameters(name: str) -> dict:
    """Default keyword arguments of a trainer (``seed`` excluded)."""
    sig = inspect.signature(TRAINERS[name])
    return {
        k: p.default
        for k, p in list(sig.parameters.items())[1:]
        if k != "seed" and p.default is not inspect.Parameter.empty
    }


def train(name: str, train_ds, params: dict | None = None, seed: SeedSpec | int = 0):
    """Train classifier ``name``; stochastic trainers get a stream derived from ``name``."""
    if name not in TRAINERS:
        raise KeyError(f"unknown classifier {name!r}; expected one of {CANONICAL_NAMES}")
    fn = TRAINERS[name]
    params = dict(params or {})
    unknown = set(params) - set(hyperparameters(name))
    if unknown:
        raise KeyError(f"{name}: unknown hyperparameters {sorted(unknown)}")
    if "seed" in inspect.signature(fn).parameters:
        spec = seed if isinstance(seed, SeedSpec) else SeedSpec(int(seed))
        params["seed"] = spec.child(name)
    return fn(train_ds, **params)
