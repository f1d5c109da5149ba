"""Performance-model selection and weighted probability averaging.

Members are ordered fairness models first (one per sensitive attribute),
then the performance model; weights follow the same order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .classifier import (TrainConfig, TrainedModel, fit_arrays, labels_from_proba, load_model,
                         predict_proba, save_model)
from .dataset import Dataset
from .errors import CFSAError, ConfigError, SelectionError, ShapeError

DEFAULT_WEIGHTS = (0.6, 0.4)
MANIFEST_VERSION = 1


def normalize_weights(weights) -> tuple[float, ...]:
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or len(w) == 0 or (w < 0).any() or not np.isfinite(w).all():
        raise ConfigError(f"weights must be a non-empty vector of non-negative reals, got {weights}")
    total = w.sum()
    if total <= 0:
        raise ConfigError("weights sum to zero")
    return tuple(float(v) for v in w / total)


def uniform_weights(k: int) -> tuple[float, ...]:
    return tuple([1.0 / k] * k)


@dataclass(frozen=True)
class EnsembleSpec:
    fair_models: tuple[TrainedModel, ...]
    perf_model: TrainedModel
    weights: tuple[float, ...]
    attributes: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "fair_models", tuple(self.fair_models))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.weights) != len(self.fair_models) + 1:
            raise ShapeError(f"{len(self.weights)} weights for {len(self.fair_models) + 1} members")
        if any(w < 0 for w in self.weights) or abs(sum(self.weights) - 1.0) > 1e-9:
            raise ConfigError(f"weights must be non-negative and sum to 1, got {self.weights}")
        widths = {m.feature_count for m in self.members}
        if len(widths) != 1:
            raise ShapeError(f"member models disagree on feature width: {sorted(widths)}")

    @property
    def members(self) -> tuple[TrainedModel, ...]:
        return self.fair_models + (self.perf_model,)

    def with_weights(self, weights) -> "EnsembleSpec":
        return EnsembleSpec(self.fair_models, self.perf_model, weights, self.attributes)


def combine(prob_vectors: Sequence, weights: Sequence[float]):
    """Weighted sum of probability pairs (or (n, 2) batches). Returns (combined, labels)."""
    if len(prob_vectors) != len(weights):
        raise ShapeError(f"{len(prob_vectors)} probability vectors for {len(weights)} weights")
    arrays = [np.asarray(p, dtype=float) for p in prob_vectors]
    shape = arrays[0].shape
    if shape[-1] != 2 or any(a.shape != shape for a in arrays):
        raise ShapeError("probability vectors must be pairs of one common shape")
    out = np.zeros(shape)
    for w, p in zip(weights, arrays):
        out = out + w * p
    return out, labels_from_proba(out)


def predict(spec: EnsembleSpec, x):
    """Combined probability pair(s) and label(s) for one row or a batch."""
    return combine([predict_proba(m, x) for m in spec.members], spec.weights)


# ---------------------------------------------------------------------------
# performance-model selection


def stratified_folds(labels, k: int, seed: int) -> np.ndarray:
    """Fold index per row; each class is shuffled and dealt round-robin."""
    y = np.asarray(labels)
    rng = np.random.default_rng([seed, k])
    fold = np.empty(len(y), dtype=np.int64)
    offset = 0
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(len(idx))]
        fold[idx] = (np.arange(len(idx)) + offset) % k
        offset += len(idx)
    return fold


def cv_accuracy(train: Dataset, kind: str, cfg: TrainConfig, seed: int, k: int = 5) -> float:
    """Pooled out-of-fold accuracy under stratified k-fold cross-validation."""
    X, y = train.features, train.labels
    fold = stratified_folds(y, k, seed)
    correct = 0
    for f in range(k):
        test = fold == f
        if not test.any():
            continue
        model = fit_arrays(kind, X[~test], y[~test], cfg)
        correct += int(np.sum(labels_from_proba(predict_proba(model, X[test])) == y[test]))
    return correct / len(y)


def rank_candidates(train: Dataset, candidates, seed: int, k: int = 5) -> list[float | None]:
    scores: list[float | None] = []
    for kind, cfg in candidates:
        try:
            scores.append(cv_accuracy(train, kind, cfg, seed, k))
        except CFSAError:
            scores.append(None)
    return scores


def select_performance_model(train: Dataset, candidates, seed: int = 0, k: int = 5) -> TrainedModel:
    """Refit the candidate with the best cross-validated accuracy on all of `train`.

    Ties go to the earlier candidate.
    """
    candidates = list(candidates)
    if not candidates:
        raise SelectionError("no candidate models given")
    scores = rank_candidates(train, candidates, seed, k)
    best = None
    for i, score in enumerate(scores):
        if score is not None and (best is None or score > scores[best]):
            best = i
    if best is None:
        raise SelectionError("every candidate model failed to train")
    kind, cfg = candidates[best]
    return fit_arrays(kind, train.features, train.labels, cfg)


# ---------------------------------------------------------------------------
# manifest


def save_ensemble(spec: EnsembleSpec, directory: str | Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    members = []
    for i, model in enumerate(spec.fair_models):
        name = f"fair_{i}.json"
        save_model(model, directory / name)
        attr = spec.attributes[i] if i < len(spec.attributes) else None
        members.append({"role": "fair", "attribute": attr, "path": name})
    save_model(spec.perf_model, directory / "performance.json")
    members.append({"role": "performance", "path": "performance.json"})
    manifest = {"format_version": MANIFEST_VERSION, "weights": list(spec.weights), "members": members}
    path = directory / "ensemble.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path


def load_ensemble(path: str | Path) -> EnsembleSpec:
    path = Path(path)
    doc = json.loads(path.read_text())
    if doc.get("format_version") != MANIFEST_VERSION:
        raise ConfigError(f"unsupported ensemble manifest version {doc.get('format_version')!r}")
    fair, attrs, perf = [], [], None
    for member in doc["members"]:
        model = load_model(path.parent / member["path"])
        if member["role"] == "fair":
            fair.append(model)
            attrs.append(member.get("attribute"))
        else:
            perf = model
    if perf is None:
        raise ConfigError("ensemble manifest lacks a performance model")
    return EnsembleSpec(tuple(fair), perf, tuple(doc["weights"]), tuple(a for a in attrs if a))
