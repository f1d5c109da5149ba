"""Mutation-based fairness/performance trade-off baseline.

An original model's test predictions are progressively overwritten with the
majority class. Each mutation degree yields a "pseudo-model" that is fairer
(all predictions converge) and less accurate; the polyline through these
points is the trade-off any worthwhile mitigation method should beat.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .classifier import TrainedModel, predict
from .dataset import Dataset
from .errors import ClassificationError, UndefinedMetricError, ValidationError
from .metrics import FAIRNESS, PERFORMANCE

log = logging.getLogger(__name__)

DEFAULT_DEGREES = tuple(round(0.1 * i, 1) for i in range(1, 11))
DEFAULT_REPEATS = 50

WIN_WIN = "win_win"
GOOD = "good"
INVERTED = "inverted"
POOR = "poor"
LOSE_LOSE = "lose_lose"
REGIONS = (WIN_WIN, GOOD, INVERTED, POOR, LOSE_LOSE)
BEATING = frozenset({WIN_WIN, GOOD})


def majority_label(labels) -> int:
    """Most frequent label; a tie goes to 0."""
    y = np.asarray(labels)
    return int(np.sum(y == 1) > np.sum(y == 0))


def mutation_count(n: int, degree: float) -> int:
    return math.floor(round(n * degree, 9))


def mutate_predictions(preds, degree: float, majority: int, seed) -> np.ndarray:
    """Overwrite floor(degree * n) uniformly chosen positions with `majority`."""
    if not 0.0 <= degree <= 1.0:
        raise ValidationError(f"mutation degree must lie in [0, 1], got {degree}")
    out = np.array(preds, dtype=np.int64, copy=True)
    k = mutation_count(len(out), degree)
    if k:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        out[rng.choice(len(out), size=k, replace=False)] = majority
    return out


@dataclass(frozen=True)
class TradeoffBaseline:
    points: tuple[tuple[float, float], ...]
    degrees: tuple[float, ...]
    fairness_metric: str
    performance_metric: str
    repeats: int
    seed: int
    # degree -> number of repeats dropped for undefined metrics
    excluded: dict = field(default_factory=dict)

    @property
    def original(self) -> tuple[float, float]:
        return self.points[0]

    def to_dict(self) -> dict:
        return {
            "fairness_metric": self.fairness_metric,
            "performance_metric": self.performance_metric,
            "repeats": self.repeats,
            "seed": self.seed,
            "points": [{"degree": d, "bias": b, "performance": p}
                       for d, (b, p) in zip(self.degrees, self.points)],
            "excluded": {str(k): v for k, v in self.excluded.items()},
        }


@dataclass(frozen=True)
class MitigationOutcome:
    point: tuple[float, float]
    region: str
    baseline: TradeoffBaseline

    @property
    def beats_baseline(self) -> bool:
        return self.region in BEATING

    def to_dict(self) -> dict:
        return {"bias": self.point[0], "performance": self.point[1], "region": self.region,
                "beats_baseline": self.beats_baseline}


def _evaluate(preds, labels, sensitive, fairness_metrics, performance_metrics):
    values = {}
    for name in list(fairness_metrics):
        try:
            values[name] = FAIRNESS[name](preds, labels, sensitive)
        except UndefinedMetricError:
            values[name] = None
    for name in list(performance_metrics):
        try:
            values[name] = PERFORMANCE[name](preds, labels)
        except UndefinedMetricError:
            values[name] = None
    return values


def mutation_samples(preds, labels, sensitive, degrees: Sequence[float], repeats: int, seed: int,
                     fairness_metrics=tuple(FAIRNESS), performance_metrics=tuple(PERFORMANCE)):
    """Raw metric values per (degree, repeat); degree 0 is the unmutated model.

    Returns a list of dicts with keys ``degree``, ``repeat`` and one per metric
    (None where the metric is undefined).
    """
    if repeats < 1:
        raise ValidationError(f"repeats must be >= 1, got {repeats}")
    degrees = [float(d) for d in degrees]
    if degrees != sorted(degrees):
        raise ValidationError("mutation degrees must be sorted ascending")
    preds = np.asarray(preds, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    majority = majority_label(labels)
    rows = [{"degree": 0.0, "repeat": 0,
             **_evaluate(preds, labels, sensitive, fairness_metrics, performance_metrics)}]
    for di, degree in enumerate(degrees):
        for rep in range(repeats):
            mutated = mutate_predictions(preds, degree, majority, np.random.default_rng([seed, di, rep]))
            rows.append({"degree": degree, "repeat": rep,
                         **_evaluate(mutated, labels, sensitive, fairness_metrics, performance_metrics)})
    return rows


def _mean(values: np.ndarray) -> float:
    # summation rounding would otherwise nudge a constant column off its value
    if (values == values[0]).all():
        return float(values[0])
    return float(values.mean())


def baseline_from_samples(samples, fairness_metric: str, performance_metric: str,
                          repeats: int, seed: int) -> TradeoffBaseline:
    origin = samples[0]
    if origin[fairness_metric] is None or origin[performance_metric] is None:
        raise UndefinedMetricError(
            f"{fairness_metric}/{performance_metric}", "undefined for the unmutated model")
    points = [(float(origin[fairness_metric]), float(origin[performance_metric]))]
    degrees = [0.0]
    excluded = {}
    by_degree: dict[float, list] = {}
    for row in samples[1:]:
        by_degree.setdefault(row["degree"], []).append(row)
    for degree, rows in by_degree.items():
        ok = [(r[fairness_metric], r[performance_metric]) for r in rows
              if r[fairness_metric] is not None and r[performance_metric] is not None]
        if len(ok) < len(rows):
            excluded[degree] = len(rows) - len(ok)
            log.warning("%s/%s at degree %.2f: %d of %d repeats undefined and excluded",
                        fairness_metric, performance_metric, degree, len(rows) - len(ok), len(rows))
        if not ok:
            continue
        arr = np.asarray(ok, dtype=float)
        points.append((_mean(arr[:, 0]), _mean(arr[:, 1])))
        degrees.append(degree)
    return TradeoffBaseline(tuple(points), tuple(degrees), fairness_metric, performance_metric,
                            repeats, seed, excluded)


def baselines_from_predictions(preds, labels, sensitive, fairness_metrics, performance_metrics,
                               degrees=DEFAULT_DEGREES, repeats=DEFAULT_REPEATS, seed=0):
    """One baseline per (fairness, performance) pair from a single mutation pass."""
    samples = mutation_samples(preds, labels, sensitive, degrees, repeats, seed,
                               fairness_metrics, performance_metrics)
    out = {}
    for f in fairness_metrics:
        for p in performance_metrics:
            out[(f, p)] = baseline_from_samples(samples, f, p, repeats, seed)
    return out, samples


def build_baseline(model: TrainedModel, test: Dataset, s: str | None, fairness_metric: str,
                   performance_metric: str, degrees=DEFAULT_DEGREES, repeats: int = DEFAULT_REPEATS,
                   seed: int = 0) -> TradeoffBaseline:
    preds = predict(model, test.features)
    found, _ = baselines_from_predictions(preds, test.labels, test.sensitive(s), (fairness_metric,),
                                          (performance_metric,), degrees, repeats, seed)
    return found[(fairness_metric, performance_metric)]


def baseline_performance_at(baseline: TradeoffBaseline, bias: float) -> float:
    """Performance on the baseline polyline at `bias`, clamped outside its span."""
    pts = np.asarray(baseline.points, dtype=float)
    xs, inv = np.unique(pts[:, 0], return_inverse=True)
    # coincident bias values collapse to their mean performance
    ys = np.bincount(inv, weights=pts[:, 1]) / np.bincount(inv)
    return float(np.interp(bias, xs, ys))


def classify(point, baseline: TradeoffBaseline) -> MitigationOutcome:
    """Place a method's (bias, performance) point in one of five regions.

    Lower bias and higher performance are better; ties fall into the less
    favorable region.
    """
    if len(baseline.points) < 2:
        raise ClassificationError("baseline needs at least two points")
    if len(set(baseline.points)) == 1:
        raise ClassificationError("baseline is degenerate: all points coincide")
    f1, p1 = float(point[0]), float(point[1])
    if not (math.isfinite(f1) and math.isfinite(p1)):
        raise ClassificationError(f"non-finite point {point}")
    f0, p0 = baseline.original
    if p1 > p0:
        region = WIN_WIN if f1 < f0 else INVERTED
    elif f1 > f0:
        region = LOSE_LOSE
    else:
        region = GOOD if p1 > baseline_performance_at(baseline, f1) else POOR
    return MitigationOutcome((f1, p1), region, baseline)
