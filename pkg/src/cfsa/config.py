"""Run configuration: TOML (or JSON) file -> validated RunConfig with defaults resolved."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .classifier import FITTERS, TrainConfig
from .dataset import Schema
from .ensemble import DEFAULT_WEIGHTS, normalize_weights, uniform_weights
from .errors import CFSAError, ConfigError
from .fairea import DEFAULT_DEGREES, DEFAULT_REPEATS
from .metrics import FAIRNESS_METRICS, PERFORMANCE_METRICS
from .synth import SynthConfig


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "logistic"
    train: TrainConfig = TrainConfig()

    def to_dict(self) -> dict:
        return {"kind": self.kind, "learning_rate": self.train.learning_rate,
                "epochs": self.train.epochs, "l2_penalty": self.train.l2_penalty}


@dataclass(frozen=True)
class RunConfig:
    data_path: Path
    schema: Schema
    seed: int
    sensitive: tuple[str, ...]
    train_fraction: float = 0.7
    folds: int = 5
    probe: ModelSpec = ModelSpec()
    fair_model: ModelSpec = ModelSpec()
    candidates: tuple[ModelSpec, ...] = (ModelSpec(),)
    weights: tuple[float, ...] = DEFAULT_WEIGHTS
    synth_k: int | None = None
    synth_filter: float = 0.2
    degrees: tuple[float, ...] = DEFAULT_DEGREES
    repeats: int = DEFAULT_REPEATS
    model_repeats: int = 1
    fairness_metrics: tuple[str, ...] = FAIRNESS_METRICS
    performance_metrics: tuple[str, ...] = PERFORMANCE_METRICS
    sweep_step: float = 0.1
    out_dir: Path = Path("cfsa-out")
    source: dict = field(default_factory=dict)

    def train_config(self, spec: ModelSpec) -> TrainConfig:
        t = spec.train
        return TrainConfig(t.learning_rate, t.epochs, t.l2_penalty, self.seed)

    def synth_config(self) -> SynthConfig:
        return SynthConfig(self.synth_k, self.synth_filter, self.seed)

    def to_dict(self) -> dict:
        """Fully resolved configuration, defaults included."""
        return {
            "seed": self.seed,
            "data": {"path": str(self.data_path), **self.schema.to_dict()},
            "sensitive": list(self.sensitive),
            "split": {"train_fraction": self.train_fraction},
            "cblist": {"folds": self.folds, "probe": self.probe.to_dict()},
            "fair_model": self.fair_model.to_dict(),
            "performance": {"candidates": [c.to_dict() for c in self.candidates]},
            "ensemble": {"weights": list(self.weights)},
            "synth": {"k_clusters": self.synth_k, "filter_fraction": self.synth_filter},
            "fairea": {"degrees": list(self.degrees), "repeats": self.repeats,
                       "model_repeats": self.model_repeats},
            "metrics": {"fairness": list(self.fairness_metrics),
                        "performance": list(self.performance_metrics)},
            "sweep": {"step": self.sweep_step},
            "output": {"dir": str(self.out_dir)},
        }


def read_config_file(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".json":
            return json.loads(text)
        return tomllib.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _model_spec(raw: dict | None, where: str) -> ModelSpec:
    raw = dict(raw or {})
    kind = raw.pop("kind", "logistic")
    if kind not in FITTERS:
        raise ConfigError(f"{where}: unknown model kind {kind!r}")
    allowed = {"learning_rate", "epochs", "l2_penalty"}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
    return ModelSpec(kind, TrainConfig(**raw))


def _metric_list(names, allowed, where) -> tuple[str, ...]:
    names = tuple(str(n).lower() for n in names)
    bad = [n for n in names if n not in allowed]
    if bad or not names:
        raise ConfigError(f"{where}: unknown or empty metric list {list(names)}; choose from {list(allowed)}")
    return names


def parse_config(raw: dict, base_dir: str | Path = ".", seed: int | None = None,
                 out_dir: str | Path | None = None) -> RunConfig:
    """Validate a config mapping; `seed`/`out_dir` override the file's values."""
    try:
        return _parse(raw, Path(base_dir), seed, out_dir)
    except ConfigError:
        raise
    except CFSAError as exc:
        raise ConfigError(str(exc)) from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc!r}") from exc


def _parse(raw, base_dir, seed, out_dir) -> RunConfig:
    data = raw.get("data")
    if not isinstance(data, dict) or "path" not in data:
        raise ConfigError("config needs a [data] section with a path")
    schema = Schema.from_dict({
        "columns": data.get("columns", []),
        "sensitive_attrs": data.get("sensitive", data.get("sensitive_attrs", [])),
        "label_column": data.get("label_column"),
        "favorable_label": data.get("favorable_label"),
    })
    if schema.label_column is None or schema.favorable_label is None:
        raise ConfigError("[data] needs label_column and favorable_label")
    data_path = Path(data["path"])
    if not data_path.is_absolute():
        data_path = base_dir / data_path

    if seed is None:
        seed = raw.get("seed")
    if seed is None:
        raise ConfigError("a seed is required (config `seed` or --seed)")
    seed = int(seed)

    names = schema.feature_names
    sensitive = tuple(raw.get("sensitive", schema.sensitive_names))
    for s in sensitive:
        if s not in names:
            raise ConfigError(f"unknown sensitive column {s!r}")
        if s not in schema.sensitive_names:
            raise ConfigError(f"column {s!r} is not declared as a sensitive attribute")

    split = raw.get("split", {})
    frac = float(split.get("train_fraction", 0.7))
    if not 0.0 < frac < 1.0:
        raise ConfigError(f"train_fraction must lie in (0, 1), got {frac}")

    cb = raw.get("cblist", {})
    folds = int(cb.get("folds", 5))
    if folds < 2:
        raise ConfigError(f"cblist folds must be >= 2, got {folds}")
    probe = _model_spec(cb.get("probe"), "[cblist.probe]")
    fair = _model_spec(raw.get("fair_model"), "[fair_model]")
    cands = raw.get("performance", {}).get("candidates", [{}])
    candidates = tuple(_model_spec(c, "[performance.candidates]") for c in cands)
    if not candidates:
        raise ConfigError("at least one performance-model candidate is required")

    members = len(sensitive) + 1
    w = raw.get("ensemble", {}).get("weights")
    if w is None:
        weights = DEFAULT_WEIGHTS if members == 2 else uniform_weights(members)
    else:
        if len(w) != members:
            raise ConfigError(f"ensemble weights need {members} entries (fair models, then performance), got {len(w)}")
        weights = normalize_weights(w)

    syn = raw.get("synth", {})
    synth_k = syn.get("k_clusters")
    synth_filter = float(syn.get("filter_fraction", 0.2))
    SynthConfig(synth_k, synth_filter, seed)

    fa = raw.get("fairea", {})
    degrees = tuple(float(d) for d in fa.get("degrees", DEFAULT_DEGREES))
    if list(degrees) != sorted(degrees) or any(not 0 < d <= 1 for d in degrees):
        raise ConfigError(f"fairea degrees must be ascending values in (0, 1], got {list(degrees)}")
    repeats = int(fa.get("repeats", DEFAULT_REPEATS))
    model_repeats = int(fa.get("model_repeats", 1))
    if repeats < 1 or model_repeats < 1:
        raise ConfigError("fairea repeats and model_repeats must be >= 1")

    met = raw.get("metrics", {})
    fm = _metric_list(met.get("fairness", FAIRNESS_METRICS), FAIRNESS_METRICS, "[metrics] fairness")
    pm = _metric_list(met.get("performance", PERFORMANCE_METRICS), PERFORMANCE_METRICS, "[metrics] performance")

    step = float(raw.get("sweep", {}).get("step", 0.1))
    if not 0 < step <= 1:
        raise ConfigError(f"sweep step must lie in (0, 1], got {step}")

    if out_dir is None:
        out_dir = raw.get("output", {}).get("dir", "cfsa-out")
        out_dir = Path(out_dir) if Path(out_dir).is_absolute() else base_dir / out_dir

    return RunConfig(
        data_path=data_path, schema=schema, seed=seed, sensitive=sensitive,
        train_fraction=frac, folds=folds, probe=probe, fair_model=fair, candidates=candidates,
        weights=weights, synth_k=synth_k, synth_filter=synth_filter, degrees=degrees,
        repeats=repeats, model_repeats=model_repeats, fairness_metrics=fm, performance_metrics=pm,
        sweep_step=step, out_dir=Path(out_dir), source=raw,
    )


def load_config(path: str | Path, seed: int | None = None, out_dir: str | Path | None = None) -> RunConfig:
    path = Path(path)
    return parse_config(read_config_file(path), path.parent, seed, out_dir)
