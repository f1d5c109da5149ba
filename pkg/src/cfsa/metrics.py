"""Group-fairness and classification-performance metrics.

Fairness metrics are absolute differences between the favored (S=1) and the
deprived (S=0) group, so 0 is perfectly fair. Rates with a zero denominator
raise :class:`UndefinedMetricError` instead of defaulting to 0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, UndefinedMetricError

log = logging.getLogger(__name__)

FAIRNESS_METRICS = ("spd", "aod", "eod")
PERFORMANCE_METRICS = ("accuracy", "recall", "precision", "f1", "mcc")


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @classmethod
    def of(cls, preds, labels) -> "Confusion":
        p = np.asarray(preds).astype(bool)
        y = np.asarray(labels).astype(bool)
        return cls(int(np.sum(p & y)), int(np.sum(p & ~y)), int(np.sum(~p & ~y)), int(np.sum(~p & y)))


@dataclass(frozen=True)
class Undefined:
    reason: str

    def to_json(self) -> dict:
        return {"undefined": self.reason}


@dataclass(frozen=True)
class GroupRates:
    """Rates for one group; None marks a rate whose denominator is zero."""

    positive_rate: float | None
    tpr: float | None
    fpr: float | None
    confusion: Confusion


def _arrays(preds, labels, sensitive=None):
    p = np.asarray(preds).astype(np.int64).ravel()
    y = np.asarray(labels).astype(np.int64).ravel()
    if p.shape != y.shape:
        raise ShapeError(f"{len(p)} predictions for {len(y)} labels")
    if sensitive is None:
        return p, y
    s = np.asarray(sensitive).astype(np.int64).ravel()
    if s.shape != y.shape:
        raise ShapeError(f"{len(s)} sensitive values for {len(y)} labels")
    return p, y, s


def _ratio(num, den):
    return num / den if den else None


def group_rates(preds, labels, sensitive, group: int) -> GroupRates:
    p, y, s = _arrays(preds, labels, sensitive)
    m = s == group
    c = Confusion.of(p[m], y[m])
    return GroupRates(
        positive_rate=_ratio(c.tp + c.fp, c.total),
        tpr=_ratio(c.tp, c.tp + c.fn),
        fpr=_ratio(c.fp, c.fp + c.tn),
        confusion=c,
    )


def _both(metric, preds, labels, sensitive):
    fav = group_rates(preds, labels, sensitive, 1)
    dep = group_rates(preds, labels, sensitive, 0)
    for name, g in (("favored", fav), ("deprived", dep)):
        if g.confusion.total == 0:
            raise UndefinedMetricError(metric, f"{name} group is empty")
    return fav, dep


def _need(metric, value, cell):
    if value is None:
        raise UndefinedMetricError(metric, f"no instances in cell {cell}")
    return value


def spd(preds, labels, sensitive) -> float:
    fav, dep = _both("spd", preds, labels, sensitive)
    return abs(fav.positive_rate - dep.positive_rate)


def aod(preds, labels, sensitive) -> float:
    fav, dep = _both("aod", preds, labels, sensitive)
    d_fpr = _need("aod", dep.fpr, "deprived, Y=0") - _need("aod", fav.fpr, "favored, Y=0")
    d_tpr = _need("aod", dep.tpr, "deprived, Y=1") - _need("aod", fav.tpr, "favored, Y=1")
    return 0.5 * (abs(d_fpr) + abs(d_tpr))


def eod(preds, labels, sensitive) -> float:
    fav, dep = _both("eod", preds, labels, sensitive)
    return abs(_need("eod", dep.tpr, "deprived, Y=1") - _need("eod", fav.tpr, "favored, Y=1"))


def accuracy(preds, labels) -> float:
    c = Confusion.of(*_arrays(preds, labels))
    if c.total == 0:
        raise UndefinedMetricError("accuracy", "no instances")
    return (c.tp + c.tn) / c.total


def recall(preds, labels) -> float:
    c = Confusion.of(*_arrays(preds, labels))
    if c.tp + c.fn == 0:
        raise UndefinedMetricError("recall", "no positive labels (TP + FN = 0)")
    return c.tp / (c.tp + c.fn)


def precision(preds, labels) -> float:
    c = Confusion.of(*_arrays(preds, labels))
    if c.tp + c.fp == 0:
        raise UndefinedMetricError("precision", "no positive predictions (TP + FP = 0)")
    return c.tp / (c.tp + c.fp)


def f1(preds, labels) -> float:
    # 2PR/(P+R) rewritten as 2TP/(2TP+FP+FN); equal wherever both are defined
    c = Confusion.of(*_arrays(preds, labels))
    den = 2 * c.tp + c.fp + c.fn
    if den == 0:
        raise UndefinedMetricError("f1", "no positive labels or predictions")
    return 2 * c.tp / den


def mcc(preds, labels) -> float:
    c = Confusion.of(*_arrays(preds, labels))
    if c.total == 0:
        raise UndefinedMetricError("mcc", "no instances")
    den = (c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn)
    if den == 0:
        log.debug("MCC denominator is zero for %s; reporting 0", c)
        return 0.0
    return (c.tp * c.tn - c.fp * c.fn) / math.sqrt(den)


FAIRNESS = {"spd": spd, "aod": aod, "eod": eod}
PERFORMANCE = {"accuracy": accuracy, "recall": recall, "precision": precision, "f1": f1, "mcc": mcc}


def fairness_metric(name: str, preds, labels, sensitive) -> float:
    return FAIRNESS[name.lower()](preds, labels, sensitive)


def performance_metric(name: str, preds, labels) -> float:
    return PERFORMANCE[name.lower()](preds, labels)


def performance(preds, labels) -> dict[str, float | Undefined]:
    """All five performance metrics; undefined ones carry a reason."""
    _arrays(preds, labels)
    if len(np.asarray(labels)) == 0:
        raise UndefinedMetricError("performance", "no instances")
    out: dict[str, float | Undefined] = {}
    for name, fn in PERFORMANCE.items():
        try:
            out[name] = fn(preds, labels)
        except UndefinedMetricError as exc:
            out[name] = Undefined(exc.reason)
    return out


def fairness(preds, labels, sensitive) -> dict[str, float | Undefined]:
    out: dict[str, float | Undefined] = {}
    for name, fn in FAIRNESS.items():
        try:
            out[name] = fn(preds, labels, sensitive)
        except UndefinedMetricError as exc:
            out[name] = Undefined(exc.reason)
    return out


def to_json(bundle: dict) -> dict:
    """Flat JSON object keyed by metric name."""
    return {k: (v.to_json() if isinstance(v, Undefined) else float(v)) for k, v in bundle.items()}
