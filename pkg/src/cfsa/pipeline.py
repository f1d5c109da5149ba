"""End-to-end orchestration behind the `run`, `sweep-weights` and `audit` commands."""

from __future__ import annotations

import contextlib
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import metrics as M
from .cblist import CBList, build_cblist
from .classifier import TrainedModel, fit_arrays, predict, predict_proba
from .config import RunConfig
from .dataset import Dataset, load_csv, split, summary_stats
from .debias import DebiasReport, debias
from .ensemble import EnsembleSpec, combine, predict as ensemble_predict, select_performance_model
from .errors import CFSAError, UndefinedMetricError
from .fairea import (REGIONS, TradeoffBaseline, baseline_from_samples, classify, mutation_samples)

log = logging.getLogger(__name__)


@contextlib.contextmanager
def stage(name: str, timings: dict | None = None):
    """Tag any error raised inside with the pipeline stage that produced it."""
    start = time.perf_counter()
    try:
        yield
    except Exception as exc:
        if not hasattr(exc, "stage"):
            exc.stage = name
        raise
    finally:
        if timings is not None:
            timings[name] = timings.get(name, 0.0) + time.perf_counter() - start


@dataclass
class Fitted:
    """Everything `run` trains, kept so sweeps can re-weight without refitting."""

    config: RunConfig
    train: Dataset
    test: Dataset
    cblists: dict[str, CBList]
    debias_reports: dict[str, DebiasReport]
    fair_models: dict[str, TrainedModel]
    perf_model: TrainedModel
    baselines: dict[str, dict[tuple[str, str], TradeoffBaseline]]
    samples: dict[str, list]
    timings: dict = field(default_factory=dict)

    def ensemble(self, weights=None) -> EnsembleSpec:
        attrs = self.config.sensitive
        return EnsembleSpec(tuple(self.fair_models[a] for a in attrs), self.perf_model,
                            self.config.weights if weights is None else weights, attrs)


def fit_all(cfg: RunConfig, threads: int | None = None) -> Fitted:
    timings: dict = {}
    with stage("load", timings):
        data = load_csv(cfg.data_path, cfg.schema)
    with stage("split", timings):
        train, test = split(data, cfg.train_fraction, cfg.seed)

    cblists, reports, fair_models = {}, {}, {}
    for attr in cfg.sensitive:
        with stage("cblist", timings):
            cblists[attr] = build_cblist(train, attr, cfg.folds, cfg.train_config(cfg.probe),
                                         cfg.probe.kind, threads)
        with stage("debias", timings):
            debiased, reports[attr] = debias(train, cblists[attr], attr, cfg.synth_config())
        with stage("fair_model", timings):
            fair_models[attr] = fit_arrays(cfg.fair_model.kind, debiased.features, debiased.labels,
                                           cfg.train_config(cfg.fair_model))

    with stage("performance_model", timings):
        perf = select_performance_model(
            train, [(c.kind, cfg.train_config(c)) for c in cfg.candidates], cfg.seed)

    baselines, samples = {}, {}
    with stage("fairea", timings):
        originals = [perf] + _extra_original_models(cfg, train, perf)
        for attr in cfg.sensitive:
            sens = test.sensitive(attr)
            rows = []
            for r, model in enumerate(originals):
                found = mutation_samples(predict(model, test.features), test.labels, sens, cfg.degrees,
                                         cfg.repeats, cfg.seed + r, cfg.fairness_metrics,
                                         cfg.performance_metrics)
                for row in found:
                    row["model_repeat"] = r
                rows.extend(found)
            samples[attr] = rows
            baselines[attr] = {}
            for f in cfg.fairness_metrics:
                for p in cfg.performance_metrics:
                    baselines[attr][(f, p)] = _average_baseline(rows, f, p, cfg)
    return Fitted(cfg, train, test, cblists, reports, fair_models, perf, baselines, samples, timings)


def _extra_original_models(cfg: RunConfig, train: Dataset, perf: TrainedModel) -> list[TrainedModel]:
    # deterministic trainers reproduce the same model; repeats only matter for seeded kinds
    out = []
    for r in range(1, cfg.model_repeats):
        tc = cfg.train_config(cfg.candidates[0])
        out.append(fit_arrays(perf.kind, train.features, train.labels,
                              type(tc)(tc.learning_rate, tc.epochs, tc.l2_penalty, cfg.seed + r)))
    return out


def _average_baseline(rows, f, p, cfg: RunConfig) -> TradeoffBaseline:
    # degree-0 rows of every model repeat are averaged into the original point
    origin = [r for r in rows if r["degree"] == 0.0]
    merged = dict(origin[0])
    for key in (f, p):
        vals = [r[key] for r in origin]
        merged[key] = None if any(v is None for v in vals) else float(np.mean(vals))
    rest = [r for r in rows if r["degree"] != 0.0]
    return baseline_from_samples([merged] + rest, f, p, cfg.repeats * cfg.model_repeats, cfg.seed)


def _value(fn, *args):
    try:
        return fn(*args)
    except UndefinedMetricError as exc:
        return M.Undefined(exc.reason)


def evaluate_cells(fitted: Fitted, preds: np.ndarray) -> list[dict]:
    """One cell per (attribute, fairness metric, performance metric)."""
    cfg, test = fitted.config, fitted.test
    cells = []
    for attr in cfg.sensitive:
        sens = test.sensitive(attr)
        for f in cfg.fairness_metrics:
            bias = _value(M.FAIRNESS[f], preds, test.labels, sens)
            for p in cfg.performance_metrics:
                perf = _value(M.PERFORMANCE[p], preds, test.labels)
                base = fitted.baselines[attr][(f, p)]
                cell = {"attribute": attr, "fairness_metric": f, "performance_metric": p,
                        "original_bias": base.original[0], "original_performance": base.original[1]}
                if isinstance(bias, M.Undefined) or isinstance(perf, M.Undefined):
                    reason = bias.reason if isinstance(bias, M.Undefined) else perf.reason
                    cell.update(bias=None, performance=None, region=None, beats_baseline=None,
                                undefined=reason)
                else:
                    outcome = classify((bias, perf), base)
                    cell.update(outcome.to_dict())
                cells.append(cell)
    return cells


def model_metrics(fitted: Fitted, name: str, preds: np.ndarray) -> dict:
    test = fitted.test
    out = {"model": name, **M.to_json(M.performance(preds, test.labels))}
    for attr in fitted.config.sensitive:
        for k, v in M.to_json(M.fairness(preds, test.labels, test.sensitive(attr))).items():
            out[f"{k}[{attr}]"] = v
    return out


def run(cfg: RunConfig, threads: int | None = None) -> tuple[dict, Fitted]:
    fitted = fit_all(cfg, threads)
    timings = fitted.timings
    with stage("evaluate", timings):
        X = fitted.test.features
        spec = fitted.ensemble()
        _, ens_preds = ensemble_predict(spec, X)
        per_model = [model_metrics(fitted, "performance", predict(fitted.perf_model, X))]
        for attr in cfg.sensitive:
            per_model.append(model_metrics(fitted, f"fair[{attr}]", predict(fitted.fair_models[attr], X)))
        per_model.append(model_metrics(fitted, "cfsa", ens_preds))
        cells = evaluate_cells(fitted, ens_preds)

    defined = [c for c in cells if c["region"] is not None]
    report = {
        "config": cfg.to_dict(),
        "data": {"train_rows": fitted.train.n, "test_rows": fitted.test.n,
                 "summary_stats": {a: summary_stats(fitted.train, a) for a in cfg.sensitive}},
        "debias": {a: r.to_dict() for a, r in fitted.debias_reports.items()},
        "models": per_model,
        "cells": cells,
        "summary": {
            "cells": len(cells),
            "undefined_cells": len(cells) - len(defined),
            "beats_baseline": sum(bool(c["beats_baseline"]) for c in defined),
            "beat_proportion": (sum(bool(c["beats_baseline"]) for c in defined) / len(defined)) if defined else None,
            "regions": {r: sum(c["region"] == r for c in defined) for r in REGIONS},
        },
        "baselines": {a: [b.to_dict() for b in fitted.baselines[a].values()] for a in cfg.sensitive},
        "timings": dict(timings),
    }
    return report, fitted


def weight_grid(step: float) -> list[float]:
    k = int(round(1.0 / step))
    if abs(k * step - 1.0) > 1e-9:
        raise CFSAError(f"sweep step {step} does not divide [0, 1] evenly")
    return [round(i / k, 10) for i in range(k + 1)]


def sweep_weights(fitted: Fitted, step: float | None = None) -> list[dict]:
    """Beat-baseline proportion per fairness weight; fair models share it equally."""
    cfg = fitted.config
    X = fitted.test.features
    probs = [predict_proba(m, X) for m in fitted.ensemble().members]
    n_fair = len(cfg.sensitive)
    rows = []
    for w in weight_grid(step or cfg.sweep_step):
        weights = [w / n_fair] * n_fair + [1.0 - w]
        _, preds = combine(probs, weights)
        cells = evaluate_cells(fitted, preds)
        defined = [c for c in cells if c["region"] is not None]
        beats = sum(bool(c["beats_baseline"]) for c in defined)
        row = {"fairness_weight": w, "performance_weight": round(1.0 - w, 10),
               "cells": len(cells), "defined": len(defined), "beats": beats,
               "beat_proportion": beats / len(defined) if defined else None}
        for r in REGIONS:
            row[r] = sum(c["region"] == r for c in defined)
        rows.append(row)
    return rows


def audit(cfg: RunConfig, threads: int | None = None) -> dict:
    """Bias list and subgroup distribution for every sensitive attribute of the full dataset."""
    timings: dict = {}
    with stage("load", timings):
        data = load_csv(cfg.data_path, cfg.schema)
    out = {"config": cfg.to_dict(), "rows": data.n, "attributes": {}, "cblists": {}}
    for attr in cfg.sensitive:
        with stage("cblist", timings):
            cb = build_cblist(data, attr, cfg.folds, cfg.train_config(cfg.probe), cfg.probe.kind, threads)
        scores = np.array([e.cbtest for e in cb.entries])
        out["attributes"][attr] = {
            "summary_stats": summary_stats(data, attr),
            "flipping_rows": int(sum(e.cftest for e in cb.entries)),
            "cbtest_p95": float(np.percentile(scores, 95)),
            "cbtest_mean": float(scores.mean()),
        }
        out["cblists"][attr] = cb
    out["timings"] = timings
    return out
