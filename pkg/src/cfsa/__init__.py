"""Counterfactual bias detection and mitigation for binary tabular classifiers."""

from .cblist import CBList, build_cblist
from .classifier import TrainConfig, TrainedModel, fit, predict, predict_proba
from .dataset import Dataset, Schema, load_csv, split
from .debias import compute_removals, debias
from .ensemble import EnsembleSpec, combine
from .errors import CFSAError
from .fairea import build_baseline, classify
from .synth import SynthConfig, synthesize

__version__ = "0.1.0"

__all__ = [
    "CBList", "CFSAError", "Dataset", "EnsembleSpec", "Schema", "SynthConfig", "TrainConfig",
    "TrainedModel", "build_baseline", "build_cblist", "classify", "combine", "compute_removals",
    "debias", "fit", "load_csv", "predict", "predict_proba", "split", "synthesize",
]
