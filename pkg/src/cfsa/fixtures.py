"""Synthetic biased datasets with ground truth, and brute-force oracles.

The generator plants the two bias mechanisms the pipeline targets: groups
with different base grant rates, and deprived rows whose favorable label was
overwritten with a rejection. The overwritten rows are recorded so detection
quality can be measured directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .dataset import Column, Dataset, Schema, SensitiveAttr
from .errors import ValidationError

SENSITIVE_NAMES = ("sex", "race")


@dataclass(frozen=True)
class FixtureSpec:
    n: int = 2000
    m: int = 3  # non-sensitive features
    grant_rate_favored: float = 0.75
    grant_rate_deprived: float = 0.2
    favored_fraction: float = 0.6
    beta: float = 0.3  # share of deprived granted rows relabelled as rejected
    n_sensitive: int = 1
    # distance between the latent class centres
    separation: float = 0.2
    # measurement noise on observed features; large values make features weak
    noise: float = 0.25
    seed: int = 7

    def validate(self) -> None:
        for name in ("grant_rate_favored", "grant_rate_deprived", "favored_fraction", "beta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {v}")
        if self.n < 4:
            raise ValidationError(f"fixture needs n >= 4, got {self.n}")
        if self.m < 1:
            raise ValidationError("fixture needs at least one non-sensitive feature")
        if not 1 <= self.n_sensitive <= len(SENSITIVE_NAMES):
            raise ValidationError(f"n_sensitive must be 1 or 2, got {self.n_sensitive}")
        if self.favored_fraction in (0.0, 1.0):
            raise ValidationError("favored_fraction of 0 or 1 leaves a group empty")


@dataclass(frozen=True)
class FixtureTruth:
    row_ids: np.ndarray
    true_labels: np.ndarray  # labels before bias injection
    injected: np.ndarray  # bool: label overwritten to 0
    injected_by: dict  # sensitive attribute -> row ids it caused to flip

    def injected_ids(self, attr: str | None = None) -> np.ndarray:
        if attr is None:
            return self.row_ids[self.injected]
        return np.asarray(self.injected_by[attr], dtype=np.int64)


def fixture_schema(spec: FixtureSpec) -> Schema:
    sens = SENSITIVE_NAMES[:spec.n_sensitive]
    cols = tuple(Column(f"x{j}") for j in range(spec.m)) + tuple(Column(s, "categorical") for s in sens)
    return Schema(cols, tuple(SensitiveAttr(s, 1, (0,)) for s in sens), "label", 1)


def gen_biased(spec: FixtureSpec = FixtureSpec()) -> tuple[Dataset, FixtureTruth]:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n, m = spec.n, spec.m
    S = (rng.random((n, spec.n_sensitive)) < spec.favored_fraction).astype(float)
    if (S.sum(axis=0) == 0).any() or (S.sum(axis=0) == n).any():
        raise ValidationError("generated sample leaves a sensitive group empty; raise n")

    # base grant rate interpolates between the groups by favored-attribute share
    share = S.mean(axis=1)
    rate = spec.grant_rate_deprived + share * (spec.grant_rate_favored - spec.grant_rate_deprived)
    cls = (rng.random(n) < rate).astype(int)
    # latent attributes come from per-class blobs; labels follow a linear rule
    # on them, while the model only sees noisy measurements
    centre = 0.5 + spec.separation * (cls[:, None] - 0.5)
    Z = centre + rng.normal(0.0, spec.separation / 4, (n, m))
    y_true = (Z.mean(axis=1) > 0.5).astype(np.int64)
    X = np.clip(Z + rng.normal(0.0, spec.noise, (n, m)), 0.0, 1.0)

    y = y_true.copy()
    injected = np.zeros(n, dtype=bool)
    injected_by = {}
    for k, name in enumerate(SENSITIVE_NAMES[:spec.n_sensitive]):
        pool = np.flatnonzero((S[:, k] == 0) & (y == 1))
        count = int(round(spec.beta * len(pool)))
        chosen = np.sort(rng.choice(pool, size=count, replace=False)) if count else np.empty(0, dtype=np.int64)
        y[chosen] = 0
        injected[chosen] = True
        injected_by[name] = chosen.astype(np.int64)

    schema = fixture_schema(spec)
    ids = np.arange(n)
    data = Dataset(np.hstack([X, S]), y, schema, ids)
    return data, FixtureTruth(ids, y_true, injected, injected_by)


def write_fixture(spec: FixtureSpec, path: str | Path, truth_path: str | Path | None = None):
    """Write the fixture CSV and its ground-truth sidecar (`<stem>.truth.csv` by default)."""
    path = Path(path)
    data, truth = gen_biased(spec)
    frame = pd.DataFrame(data.features, columns=data.schema.feature_names)
    for s in data.schema.sensitive_names:
        frame[s] = frame[s].astype(int)
    frame["label"] = data.labels
    frame.to_csv(path, index=False, float_format="%.17g")
    truth_path = Path(truth_path) if truth_path else path.with_suffix(".truth.csv")
    pd.DataFrame({
        "row_id": truth.row_ids,
        "true_label": truth.true_labels,
        "bias_injected": truth.injected.astype(int),
    }).to_csv(truth_path, index=False)
    return path, truth_path


# ---------------------------------------------------------------------------
# oracles


def oracle_removals(fg: int, fr: int, dg: int, dr: int) -> tuple[int, int]:
    """Exhaustive search for the (FG, DR) removal pair.

    Candidates: every DR count b, paired with each FG count a within half a
    row of ratio * b (favored size / deprived size). Objective, in order:
    smallest grant-rate gap, smallest ratio residual |a*(DG+DR) - b*(FG+FR)|,
    fewest removals.
    """
    from fractions import Fraction

    nf, nd = fg + fr, dg + dr
    if Fraction(fg, nf) <= Fraction(dg, nd):
        return 0, 0
    b = np.arange(0, min(dr, nd - 1) + 1, dtype=np.int64)
    cand_a, cand_b = [], []
    for a_try in (np.floor((2 * b * nf - nd) / (2 * nd)), np.floor((2 * b * nf + nd) / (2 * nd))):
        for shift in (0, 1):
            a = a_try.astype(np.int64) + shift
            ok = (np.abs(2 * a * nd - 2 * b * nf) <= nd) & (a >= 0) & (a <= fg) & (a < nf)
            cand_a.append(a[ok])
            cand_b.append(b[ok])
    a = np.concatenate(cand_a)
    bb = np.concatenate(cand_b)
    gap = np.abs((fg - a) / (nf - a) - dg / (nd - bb))
    near = np.flatnonzero(gap <= gap.min() + 1e-9)
    best = min(
        ((abs(Fraction(int(fg - a[i]), int(nf - a[i])) - Fraction(dg, int(nd - bb[i]))),
          abs(int(a[i]) * nd - int(bb[i]) * nf), int(a[i] + bb[i]), int(a[i])), int(a[i]), int(bb[i]))
        for i in near
    )
    return best[1], best[2]
