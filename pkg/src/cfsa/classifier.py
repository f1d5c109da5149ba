"""Probabilistic binary classifiers trained by full-batch gradient descent.

Logistic regression is the default model everywhere in the pipeline. A linear
SVM with Platt-scaled probabilities is available as an alternative kind.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .dataset import Dataset
from .errors import ConfigError, DegenerateTrainingError, ShapeError

FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 2000
    l2_penalty: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ConfigError(f"epochs must be a positive integer, got {self.epochs}")
        if self.l2_penalty < 0:
            raise ConfigError(f"l2_penalty must be non-negative, got {self.l2_penalty}")


@dataclass(frozen=True, eq=False)
class TrainedModel:
    kind: str
    weights: np.ndarray
    bias: float
    feature_count: int
    # Platt scaling (a, c) for margin-based kinds: p = sigmoid(a * score + c)
    calibration: tuple[float, float] | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    def decision(self, X: np.ndarray) -> np.ndarray:
        return X @ self.weights + self.bias


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    return np.exp(-np.logaddexp(0.0, -z))


def _as_matrix(model: TrainedModel, x) -> tuple[np.ndarray, bool]:
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.feature_count:
        raise ShapeError(f"expected {model.feature_count} features, got shape {np.shape(x)}")
    return X, single


def predict_proba(model: TrainedModel, x) -> np.ndarray:
    """(P(Y=0), P(Y=1)) per row; a 1-d input yields a single pair."""
    X, single = _as_matrix(model, x)
    score = model.decision(X)
    if model.calibration is not None:
        a, c = model.calibration
        score = a * score + c
    p1 = sigmoid(score)
    out = np.column_stack([1.0 - p1, p1])
    return out[0] if single else out


def labels_from_proba(proba: np.ndarray) -> np.ndarray:
    """Argmax over the pair; an exact tie goes to label 0."""
    proba = np.asarray(proba)
    return (proba[..., 1] > proba[..., 0]).astype(np.int64)


def predict(model: TrainedModel, x) -> np.ndarray:
    return labels_from_proba(predict_proba(model, x))


# ---------------------------------------------------------------------------
# logistic regression


def logistic_loss(w, b, X, y, l2=0.0) -> float:
    z = X @ w + b
    # log(1 + e^z) - y z, stable for large |z|
    return float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * np.dot(w, w))


def logistic_gradient(w, b, X, y, l2=0.0) -> tuple[np.ndarray, float]:
    err = sigmoid(X @ w + b) - y
    return X.T @ err / len(y) + l2 * w, float(np.mean(err))


def _check_trainable(X: np.ndarray, y: np.ndarray) -> None:
    if len(y) < 2:
        raise DegenerateTrainingError("need at least two training rows")
    if len(np.unique(y)) < 2:
        raise DegenerateTrainingError(f"training labels are all {int(y[0])}; both classes are required")


def fit_logistic_arrays(X, y, cfg: TrainConfig, history: list | None = None) -> TrainedModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_trainable(X, y)
    w = np.zeros(X.shape[1])
    b = 0.0
    for _ in range(int(cfg.epochs)):
        if history is not None:
            history.append(logistic_loss(w, b, X, y, cfg.l2_penalty))
        gw, gb = logistic_gradient(w, b, X, y, cfg.l2_penalty)
        w = w - cfg.learning_rate * gw
        b = b - cfg.learning_rate * gb
    if history is not None:
        history.append(logistic_loss(w, b, X, y, cfg.l2_penalty))
    return TrainedModel("logistic", w, float(b), X.shape[1])


def fit_logistic(train: Dataset, cfg: TrainConfig = TrainConfig()) -> TrainedModel:
    return fit_logistic_arrays(train.features, train.labels, cfg)


# ---------------------------------------------------------------------------
# linear SVM (optional kind)


def _platt(scores: np.ndarray, y: np.ndarray, iters: int = 200) -> tuple[float, float]:
    # Newton's method on the 1-d logistic fit with Platt's smoothed targets
    n_pos = y.sum()
    n_neg = len(y) - n_pos
    t = np.where(y == 1, (n_pos + 1) / (n_pos + 2), 1 / (n_neg + 2))
    a, c = 0.0, float(np.log((n_neg + 1) / (n_pos + 1)) * -1)
    for _ in range(iters):
        p = sigmoid(a * scores + c)
        g = np.array([np.dot(p - t, scores), np.sum(p - t)])
        wgt = p * (1 - p)
        H = np.array([[np.dot(wgt, scores * scores), np.dot(wgt, scores)],
                      [np.dot(wgt, scores), wgt.sum()]]) + 1e-12 * np.eye(2)
        step = np.linalg.solve(H, g)
        a, c = a - step[0], c - step[1]
        if np.abs(step).max() < 1e-10:
            break
    return float(a), float(c)


def fit_linear_svm_arrays(X, y, cfg: TrainConfig) -> TrainedModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_trainable(X, y)
    sign = 2 * y - 1
    lam = max(cfg.l2_penalty, 1e-6)
    w = np.zeros(X.shape[1])
    b = 0.0
    for _ in range(int(cfg.epochs)):
        margin = sign * (X @ w + b)
        active = margin < 1
        gw = lam * w - (sign[active, None] * X[active]).sum(axis=0) / len(y)
        gb = -sign[active].sum() / len(y)
        w = w - cfg.learning_rate * gw
        b = b - cfg.learning_rate * gb
    scores = X @ w + b
    return TrainedModel("linear_svm", w, float(b), X.shape[1], calibration=_platt(scores, y))


FITTERS: dict[str, Callable[..., TrainedModel]] = {
    "logistic": fit_logistic_arrays,
    "linear_svm": fit_linear_svm_arrays,
}


def fit_arrays(kind: str, X, y, cfg: TrainConfig) -> TrainedModel:
    try:
        fitter = FITTERS[kind]
    except KeyError:
        raise ConfigError(f"unknown model kind {kind!r}; choose from {sorted(FITTERS)}") from None
    return fitter(X, y, cfg)


def fit(kind: str, train: Dataset, cfg: TrainConfig = TrainConfig()) -> TrainedModel:
    return fit_arrays(kind, train.features, train.labels, cfg)


# ---------------------------------------------------------------------------
# persistence


def model_to_dict(model: TrainedModel) -> dict:
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "weights": [float(v) for v in model.weights],
        "bias": float(model.bias),
        "feature_count": int(model.feature_count),
    }
    if model.calibration is not None:
        doc["calibration"] = list(model.calibration)
    return doc


def model_from_dict(doc: dict) -> TrainedModel:
    if doc.get("format_version") != FORMAT_VERSION:
        raise ConfigError(f"unsupported model format version {doc.get('format_version')!r}")
    cal = doc.get("calibration")
    return TrainedModel(
        kind=doc["kind"],
        weights=np.asarray(doc["weights"], dtype=float),
        bias=float(doc["bias"]),
        feature_count=int(doc["feature_count"]),
        calibration=tuple(cal) if cal is not None else None,
    )


def save_model(model: TrainedModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2))


def load_model(path: str | Path) -> TrainedModel:
    return model_from_dict(json.loads(Path(path).read_text()))
