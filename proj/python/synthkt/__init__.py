"""Synthetic learning-path generation and knowledge-tracing evaluation."""

import json

from ._core import (
    BktModel,
    Dataset,
    DktModel,
    DomainError,
    EmError,
    EmptyDatasetError,
    FitError,
    IoError,
    SchemaError,
    TrainingError,
    __version__,
    fit_bkt,
    generate,
    load_dataset,
    make_fixture,
    metrics,
    parse_dataset,
    split,
    train_dkt,
)
from . import _core


def stats(grades):
    """Descriptive statistics of a grade list as a dict."""
    return json.loads(_core.stats_json(list(grades)))


def fit(grades, families=(), bins=50):
    """Fit candidate families and return the ranked fit document."""
    return json.loads(_core.fit_json(list(grades), list(families), bins))


def generate_gen1(real, fit_entry, n_paths, seed=0, clamp=True):
    """gen1 paths drawn from one entry of a fit document's ``ranked`` list."""
    return generate(real, "gen1", n_paths, clamp=clamp, seed=seed, fit_json=json.dumps(fit_entry))


def run_grid(real, config=None, out_dir=""):
    """Run the evaluation grid; ``config`` uses the grid JSON keys."""
    return _core.run_grid(real, json.dumps(config or {}), str(out_dir))


__all__ = [
    "BktModel", "Dataset", "DktModel", "DomainError", "EmError", "EmptyDatasetError",
    "FitError", "IoError", "SchemaError", "TrainingError", "__version__", "fit",
    "fit_bkt", "generate", "generate_gen1", "load_dataset", "make_fixture", "metrics",
    "parse_dataset", "run_grid", "split", "stats", "train_dkt",
]
