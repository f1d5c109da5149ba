"""Tabular binary-classification data: schema, ingestion, splitting, subgroups.

Encoding conventions used everywhere downstream:

* every feature value lies in [0, 1];
* a sensitive column holds 1 for the favored group and 0 for the deprived one;
* the label holds 1 for the favorable ("granted") outcome.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import pandas as pd

from .errors import DataError, EmptyDatasetError, SchemaError, ValidationError

NUMERIC = "numeric"
CATEGORICAL = "categorical"

MISSING_MARKERS = ["?", ""]


@dataclass(frozen=True)
class Column:
    name: str
    kind: str = NUMERIC
    # explicit cut-points turn a numeric column into ordered categories
    bins: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.bins is not None:
            object.__setattr__(self, "bins", tuple(float(b) for b in self.bins))
            if list(self.bins) != sorted(self.bins):
                raise SchemaError(f"column {self.name!r}: bins must be ascending")


@dataclass(frozen=True)
class SensitiveAttr:
    name: str
    favored: Any
    # None: every non-favored value counts as deprived
    deprived: tuple | None = None


@dataclass(frozen=True)
class Schema:
    columns: tuple[Column, ...]
    sensitive_attrs: tuple[SensitiveAttr, ...]
    label_column: str
    favorable_label: Any

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "sensitive_attrs", tuple(self.sensitive_attrs))
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names in schema")
        if self.label_column in names:
            raise SchemaError(f"label column {self.label_column!r} listed among features")
        if not self.sensitive_attrs:
            raise SchemaError("schema declares no sensitive attribute")
        for attr in self.sensitive_attrs:
            if attr.name not in names:
                raise SchemaError(f"sensitive attribute {attr.name!r} is not a schema column")
        if len(names) < 2:
            raise SchemaError("need at least one non-sensitive feature besides the sensitive one")

    @property
    def feature_names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def sensitive_names(self) -> list[str]:
        return [a.name for a in self.sensitive_attrs]

    def index_of(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise ValidationError(f"unknown column {name!r}") from None

    def encoded(self) -> "Schema":
        """Schema describing this data after preprocessing (0/1 encodings)."""
        return Schema(
            columns=tuple(Column(c.name, c.kind) for c in self.columns),
            sensitive_attrs=tuple(SensitiveAttr(a.name, 1, (0,)) for a in self.sensitive_attrs),
            label_column=self.label_column,
            favorable_label=1,
        )

    def to_dict(self) -> dict:
        cols = []
        for c in self.columns:
            entry = {"name": c.name, "kind": c.kind}
            if c.bins is not None:
                entry["bins"] = list(c.bins)
            cols.append(entry)
        attrs = []
        for a in self.sensitive_attrs:
            entry = {"name": a.name, "favored": a.favored}
            if a.deprived is not None:
                entry["deprived"] = list(a.deprived)
            attrs.append(entry)
        return {
            "columns": cols,
            "sensitive_attrs": attrs,
            "label_column": self.label_column,
            "favorable_label": self.favorable_label,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "Schema":
        try:
            columns = []
            for c in raw["columns"]:
                if isinstance(c, str):
                    columns.append(Column(c))
                else:
                    bins = c.get("bins")
                    columns.append(Column(c["name"], c.get("kind", NUMERIC), tuple(bins) if bins else None))
            attrs = []
            for a in raw["sensitive_attrs"]:
                dep = a.get("deprived")
                attrs.append(SensitiveAttr(a["name"], a["favored"], tuple(dep) if dep is not None else None))
            return cls(tuple(columns), tuple(attrs), raw["label_column"], raw["favorable_label"])
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema: {exc}") from exc


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    schema: Schema
    row_ids: np.ndarray
    synthetic: np.ndarray | None = field(default=None)

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        if X.ndim != 2:
            raise ValidationError("features must be a 2-d matrix")
        n, m = X.shape
        y = np.asarray(self.labels).astype(np.int64)
        ids = np.asarray(self.row_ids).astype(np.int64)
        syn = np.zeros(n, dtype=bool) if self.synthetic is None else np.asarray(self.synthetic, dtype=bool)
        if y.shape != (n,) or ids.shape != (n,) or syn.shape != (n,):
            raise ValidationError("labels, row_ids and features disagree on row count")
        if m != len(self.schema.columns):
            raise ValidationError(f"feature width {m} does not match schema ({len(self.schema.columns)} columns)")
        if n and (np.nanmin(X) < 0.0 or np.nanmax(X) > 1.0 or np.isnan(X).any()):
            raise ValidationError("feature values must lie in [0, 1]")
        if n and not np.isin(y, (0, 1)).all():
            raise ValidationError("labels must be 0/1")
        if len(np.unique(ids)) != n:
            raise ValidationError("row_ids must be unique")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "labels", _frozen(y))
        object.__setattr__(self, "row_ids", _frozen(ids))
        object.__setattr__(self, "synthetic", _frozen(syn))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def m(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.n

    def column(self, name: str) -> np.ndarray:
        return self.features[:, self.schema.index_of(name)]

    def sensitive(self, s: str | None = None) -> np.ndarray:
        """0/1 vector of the sensitive column (first declared one by default)."""
        name = self._sensitive_name(s)
        values = self.column(name)
        if not np.isin(values, (0.0, 1.0)).all():
            raise ValidationError(f"sensitive column {name!r} is not binary")
        return values.astype(np.int64)

    def _sensitive_name(self, s: str | None) -> str:
        if s is None:
            return self.schema.sensitive_names[0]
        self.schema.index_of(s)
        return s

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.features[idx], self.labels[idx], self.schema, self.row_ids[idx], self.synthetic[idx])

    def drop_ids(self, ids) -> "Dataset":
        keep = ~np.isin(self.row_ids, np.asarray(list(ids), dtype=np.int64))
        return self.take(np.flatnonzero(keep))

    def with_labels(self, labels) -> "Dataset":
        return Dataset(self.features, labels, self.schema, self.row_ids, self.synthetic)

    def concat(self, *others: "Dataset") -> "Dataset":
        parts = (self,) + others
        return Dataset(
            np.vstack([p.features for p in parts]) if any(p.n for p in parts) else self.features,
            np.concatenate([p.labels for p in parts]),
            self.schema,
            np.concatenate([p.row_ids for p in parts]),
            np.concatenate([p.synthetic for p in parts]),
        )

    def next_row_id(self) -> int:
        return int(self.row_ids.max()) + 1 if self.n else 0

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.features, columns=self.schema.feature_names)
        frame[self.schema.label_column] = self.labels
        frame.insert(0, "row_id", self.row_ids)
        frame["synthetic"] = self.synthetic.astype(int)
        return frame


def empty_like(d: Dataset) -> Dataset:
    return Dataset(np.empty((0, d.m)), np.empty(0, dtype=np.int64), d.schema, np.empty(0, dtype=np.int64))


# ---------------------------------------------------------------------------
# ingestion


def _equals(series: pd.Series, value) -> pd.Series:
    if pd.api.types.is_numeric_dtype(series):
        try:
            return series.astype(float) == float(value)
        except (TypeError, ValueError):
            return pd.Series(False, index=series.index)
    return series.astype(str).str.strip() == str(value).strip()


def _minmax(values: np.ndarray) -> np.ndarray:
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.zeros_like(values, dtype=float)
    return (values - lo) / (hi - lo)


def _encode_column(series: pd.Series, col: Column) -> np.ndarray:
    if col.bins is not None:
        codes = np.digitize(series.astype(float).to_numpy(), col.bins)
        k = len(col.bins)
        return codes / k if k else np.zeros(len(codes))
    if col.kind == NUMERIC:
        try:
            values = series.astype(float).to_numpy()
        except ValueError as exc:
            raise ValidationError(f"numeric column {col.name!r} holds non-numeric values") from exc
        return _minmax(values)
    # categorical: sorted distinct values, integer codes scaled to [0, 1]
    if pd.api.types.is_numeric_dtype(series):
        levels = np.unique(series.to_numpy())
        codes = np.searchsorted(levels, series.to_numpy())
    else:
        as_text = series.astype(str).str.strip()
        levels = np.unique(as_text.to_numpy())
        codes = np.searchsorted(levels, as_text.to_numpy())
    return codes / (len(levels) - 1) if len(levels) > 1 else np.zeros(len(codes))


def _encode_sensitive(series: pd.Series, attr: SensitiveAttr) -> np.ndarray:
    favored = _equals(series, attr.favored)
    if attr.deprived is not None:
        deprived = np.zeros(len(series), dtype=bool)
        for v in attr.deprived:
            deprived |= _equals(series, v).to_numpy()
        stray = ~(favored.to_numpy() | deprived)
        if stray.any():
            bad = series[stray].iloc[0]
            raise ValidationError(
                f"sensitive column {attr.name!r} is not binary after encoding (value {bad!r})")
    return favored.to_numpy().astype(float)


def _encode_label(series: pd.Series, schema: Schema) -> np.ndarray:
    distinct = pd.unique(series)
    if len(distinct) > 2:
        raise ValidationError(
            f"label column {schema.label_column!r} is not binary ({len(distinct)} distinct values)")
    favorable = _equals(series, schema.favorable_label).to_numpy()
    if len(distinct) == 2 and not favorable.any():
        raise ValidationError(
            f"favorable label {schema.favorable_label!r} not found in column {schema.label_column!r}")
    return favorable.astype(np.int64)


def preprocess(frame: pd.DataFrame, schema: Schema, row_ids=None) -> Dataset:
    """Encode a raw table per `schema`: drop incomplete rows, encode, normalize."""
    wanted = schema.feature_names + [schema.label_column]
    missing = [c for c in wanted if c not in frame.columns]
    if missing:
        raise SchemaError(f"missing column(s): {', '.join(missing)}")
    if row_ids is None:
        row_ids = np.arange(len(frame))
    frame = frame[wanted].copy()
    frame.index = np.asarray(row_ids)
    frame = frame.replace(r"^\s*\?\s*$", np.nan, regex=True).dropna(how="any")
    if frame.empty:
        raise EmptyDatasetError("no complete rows to load")

    sensitive = {a.name: a for a in schema.sensitive_attrs}
    cols = []
    for col in schema.columns:
        series = frame[col.name]
        if col.name in sensitive:
            cols.append(_encode_sensitive(series, sensitive[col.name]))
        else:
            cols.append(_encode_column(series, col))
    X = np.column_stack(cols)
    y = _encode_label(frame[schema.label_column], schema)
    return Dataset(X, y, schema, frame.index.to_numpy())


def load_csv(path: str | Path, schema: Schema) -> Dataset:
    path = Path(path)
    try:
        frame = pd.read_csv(path, na_values=MISSING_MARKERS, skipinitialspace=True, encoding="utf-8",
                            float_precision="round_trip")
    except pd.errors.EmptyDataError:
        raise EmptyDatasetError(f"{path}: empty file") from None
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from exc
    frame.columns = [str(c).strip() for c in frame.columns]
    return preprocess(frame, schema)


def write_csv(d: Dataset, path: str | Path) -> None:
    d.to_frame().to_csv(path, index=False, float_format="%.17g")


# ---------------------------------------------------------------------------
# statistics, splitting, subgroups


def summary_stats(d: Dataset, s: str | None = None) -> dict[str, float]:
    """Joint P(S, Y) in percent over the four favored/deprived x granted/rejected cells."""
    if d.n == 0:
        raise EmptyDatasetError("summary of an empty dataset")
    sens = d.sensitive(s)
    y = d.labels
    counts = {
        "favored_granted": int(np.sum((sens == 1) & (y == 1))),
        "deprived_granted": int(np.sum((sens == 0) & (y == 1))),
        "favored_rejected": int(np.sum((sens == 1) & (y == 0))),
        "deprived_rejected": int(np.sum((sens == 0) & (y == 0))),
    }
    return {k: 100.0 * v / d.n for k, v in counts.items()}


def split(d: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    if not 0.0 < train_fraction < 1.0:
        raise ValidationError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    if d.n < 2:
        raise ValidationError("need at least two rows to split")
    # round away float noise such as 0.29 * 100 = 28.999999999999996
    n_train = math.floor(round(d.n * train_fraction, 9))
    if n_train == 0 or n_train == d.n:
        raise ValidationError(f"split of {d.n} rows at {train_fraction} leaves an empty side")
    order = np.random.default_rng(seed).permutation(d.n)
    return d.take(order[:n_train]), d.take(order[n_train:])


@dataclass(frozen=True)
class SubgroupPartition:
    dr: np.ndarray
    dg: np.ndarray
    fr: np.ndarray
    fg: np.ndarray

    @property
    def counts(self) -> tuple[int, int, int, int]:
        return len(self.dr), len(self.dg), len(self.fr), len(self.fg)

    def label_of(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=object)
        for name in ("dr", "dg", "fr", "fg"):
            out[getattr(self, name)] = name.upper()
        return out


def partition(d: Dataset, s: str | None = None) -> SubgroupPartition:
    sens = d.sensitive(s)
    y = d.labels
    return SubgroupPartition(
        dr=np.flatnonzero((sens == 0) & (y == 0)),
        dg=np.flatnonzero((sens == 0) & (y == 1)),
        fr=np.flatnonzero((sens == 1) & (y == 0)),
        fg=np.flatnonzero((sens == 1) & (y == 1)),
    )


def counterfactual_of(d: Dataset, s: str | None = None) -> Dataset:
    """Twin dataset with the sensitive value flipped in every row."""
    name = d._sensitive_name(s)
    d.sensitive(name)
    j = d.schema.index_of(name)
    X = d.features.copy()
    X[:, j] = 1.0 - X[:, j]
    return Dataset(X, d.labels, d.schema, d.row_ids, d.synthetic)


def grant_rates(d: Dataset, s: str | None = None) -> tuple[float, float]:
    """(P(Y=1 | favored), P(Y=1 | deprived)); NaN for an empty group."""
    sens = d.sensitive(s)
    fav, dep = sens == 1, sens == 0
    f = d.labels[fav].mean() if fav.any() else float("nan")
    g = d.labels[dep].mean() if dep.any() else float("nan")
    return float(f), float(g)


def make_dataset(features: Sequence, labels: Sequence, feature_names: Sequence[str],
                 sensitive: Sequence[str] | str, label_column: str = "label") -> Dataset:
    """Wrap already-encoded arrays into a Dataset with a matching schema."""
    if isinstance(sensitive, str):
        sensitive = [sensitive]
    schema = Schema(
        columns=tuple(Column(n) for n in feature_names),
        sensitive_attrs=tuple(SensitiveAttr(n, 1, (0,)) for n in sensitive),
        label_column=label_column,
        favorable_label=1,
    )
    X = np.asarray(features, dtype=float)
    return Dataset(X, labels, schema, np.arange(X.shape[0]))
