"""Counterfactual bias scores and the ranked bias list.

Each training row is scored by a model that never saw it: the row and its
counterfactual twin (sensitive value flipped) are both passed through the
out-of-fold model and compared.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classifier import TrainConfig, fit_arrays, predict_proba
from .dataset import Dataset, counterfactual_of, partition
from .errors import DegenerateFoldError, ValidationError

THRESHOLD = 0.5
# leave-one-out is exact but costs one fit per row
MAX_LOO_ROWS = 2000


def cftest(p: float, p_cf: float) -> int:
    """1 when the predicted label flips between a row and its twin."""
    return int((p > THRESHOLD) != (p_cf > THRESHOLD))


def cdtest(p: float, p_cf: float) -> float:
    return abs(p - p_cf)


def cbtest(p: float, p_cf: float) -> float:
    flip = cftest(p, p_cf)
    dev = cdtest(p, p_cf)
    if flip != 0:
        return flip + dev
    return dev


@dataclass(frozen=True)
class BiasScore:
    row_id: int
    cftest: int
    cdtest: float
    cbtest: float
    subgroup: str


@dataclass(frozen=True)
class CBList:
    entries: tuple[BiasScore, ...]
    fold_count: int
    seed: int

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def by_id(self) -> dict[int, BiasScore]:
        return {e.row_id: e for e in self.entries}

    def to_rows(self) -> list[dict]:
        return [
            {"row_id": e.row_id, "subgroup": e.subgroup, "cftest": e.cftest,
             "cdtest": e.cdtest, "cbtest": e.cbtest}
            for e in self.entries
        ]


def score_arrays(p: np.ndarray, p_cf: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized CFTest, CDTest and CBTest."""
    flip = ((p > THRESHOLD) != (p_cf > THRESHOLD)).astype(np.int64)
    dev = np.abs(p - p_cf)
    return flip, dev, np.where(flip != 0, flip + dev, dev)


def fold_assignment(n: int, folds: int, seed: int) -> np.ndarray:
    """Fold index per row from a seeded shuffle; fold sizes differ by at most one."""
    order = np.random.default_rng([seed, n, folds]).permutation(n)
    assign = np.empty(n, dtype=np.int64)
    for k, chunk in enumerate(np.array_split(order, folds)):
        assign[chunk] = k
    return assign


def build_cblist(train: Dataset, s: str | None = None, folds: int = 5,
                 cfg: TrainConfig = TrainConfig(), kind: str = "logistic",
                 threads: int | None = 1) -> CBList:
    """Score every row out-of-fold and return the list sorted by CBTest, highest first.

    ``folds == train.n`` gives exact leave-one-out.
    """
    n = train.n
    if folds < 2 or folds > n:
        raise ValidationError(f"folds must lie in [2, {n}], got {folds}")
    if folds > MAX_LOO_ROWS:
        raise ValidationError(f"{folds} folds exceeds the leave-one-out limit of {MAX_LOO_ROWS}")
    sens_name = s if s is not None else train.schema.sensitive_names[0]
    twin = counterfactual_of(train, sens_name)
    assign = fold_assignment(n, folds, cfg.seed)

    X, y = train.features, train.labels
    for k in range(folds):
        rest = y[assign != k]
        if len(np.unique(rest)) < 2:
            raise DegenerateFoldError(
                f"fold {k}: training complement holds a single class; use fewer folds")

    def score_fold(k: int):
        held = np.flatnonzero(assign == k)
        model = fit_arrays(kind, X[assign != k], y[assign != k], cfg)
        return held, predict_proba(model, X[held])[:, 1], predict_proba(model, twin.features[held])[:, 1]

    p = np.empty(n)
    p_cf = np.empty(n)
    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(score_fold, range(folds)))
    else:
        results = [score_fold(k) for k in range(folds)]
    for held, a, b in results:
        p[held] = a
        p_cf[held] = b

    flip, dev, score = score_arrays(p, p_cf)
    groups = partition(train, sens_name).label_of(n)
    order = np.lexsort((train.row_ids, -score))
    entries = tuple(
        BiasScore(int(train.row_ids[i]), int(flip[i]), float(dev[i]), float(score[i]), str(groups[i]))
        for i in order
    )
    return CBList(entries, folds, cfg.seed)


def write_cblist_csv(cb: CBList, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["row_id", "subgroup", "cftest", "cdtest", "cbtest"])
        writer.writeheader()
        for row in cb.to_rows():
            writer.writerow({**row, "cdtest": repr(row["cdtest"]), "cbtest": repr(row["cbtest"])})


def read_cblist_csv(path: str | Path, fold_count: int = 0, seed: int = 0) -> CBList:
    with open(path, newline="") as fh:
        entries = tuple(
            BiasScore(int(r["row_id"]), int(r["cftest"]), float(r["cdtest"]), float(r["cbtest"]), r["subgroup"])
            for r in csv.DictReader(fh)
        )
    return CBList(entries, fold_count, seed)
