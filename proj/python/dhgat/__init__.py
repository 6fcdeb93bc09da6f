"""Dynamic heterogeneous graph attention for ordinal fake-news classification."""

import json

from ._dhgat import (
    ConfigError,
    ParseError,
    ShapeError,
    TrainingError,
    ValidationError,
    gumbel_from_uniform,
    gumbel_select,
    hash_embed,
    lattice,
    normalize_attribute,
    planted_graph,
    remap_label,
)
from . import _dhgat

__all__ = [
    "ConfigError",
    "ParseError",
    "ShapeError",
    "TrainingError",
    "ValidationError",
    "evaluate",
    "gradcheck",
    "gumbel_from_uniform",
    "gumbel_select",
    "hash_embed",
    "lattice",
    "normalize_attribute",
    "planted_graph",
    "remap_label",
    "resolved_config",
    "train",
]


def train(config, overrides=None, model=None):
    """Train from an INI config and return the run record as a dict."""
    return json.loads(_dhgat._train_json(str(config), dict(overrides or {}), model))


def evaluate(probs, labels, ids):
    """Accuracy, macro-F1, per-class recall and confusion matrix for the listed nodes."""
    return json.loads(_dhgat._metrics_json(probs, list(labels), list(ids)))


def gradcheck(tolerance=1e-4, seed=7):
    """Finite-difference checks of every layer and the end-to-end losses."""
    return json.loads(_dhgat._gradcheck_json(tolerance, seed))


def resolved_config(config, overrides=None):
    """The fully resolved config as INI text."""
    return _dhgat._config_ini(str(config), dict(overrides or {}))
