"""Fairness and explainability audits for tabular classifiers."""

import json

from ._core import (
    Background,
    Dataset,
    FairauditError,
    MixtureModel,
    Predictor,
    ShapMatrix,
    TrainedModel,
    __version__,
    compare_rankings,
    cost_sensitive_relabel,
    dp_difference,
    eod_difference,
    eod_moments,
    exact_shap,
    explain_testset,
    global_importance,
    kernel_shap,
    load_dataset,
    pp_difference,
    rank_features,
    replay_trace,
    spearman_pvalue,
    spearman_rho,
    split,
    synth_biased,
    tree_shap,
)
from ._core import exponentiated_gradient as _exponentiated_gradient
from ._core import predictive_metrics as _predictive_metrics
from ._core import run_audit as _run_audit
from ._core import train as _train


def train(kind, data, hyperparameters=None, weights=None):
    return _train(kind, data, json.dumps(hyperparameters or {}), weights)


def exponentiated_gradient(kind, train_data, hyperparameters=None, **config):
    return _exponentiated_gradient(kind, train_data, json.dumps(hyperparameters or {}), **config)


def predictive_metrics(probas, labels):
    return json.loads(_predictive_metrics(list(probas), list(labels)))


def run_audit(config, base_dir=".", out_dir=None):
    """Runs an audit from a config dict and returns the report as a dict."""
    return json.loads(_run_audit(json.dumps(config), str(base_dir), None if out_dir is None else str(out_dir)))


__all__ = [
    "Background",
    "Dataset",
    "FairauditError",
    "MixtureModel",
    "Predictor",
    "ShapMatrix",
    "TrainedModel",
    "__version__",
    "compare_rankings",
    "cost_sensitive_relabel",
    "dp_difference",
    "eod_difference",
    "eod_moments",
    "exact_shap",
    "explain_testset",
    "exponentiated_gradient",
    "global_importance",
    "kernel_shap",
    "load_dataset",
    "pp_difference",
    "predictive_metrics",
    "rank_features",
    "replay_trace",
    "run_audit",
    "spearman_pvalue",
    "spearman_rho",
    "split",
    "synth_biased",
    "train",
    "tree_shap",
]
