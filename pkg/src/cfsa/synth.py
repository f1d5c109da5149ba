"""Cluster-filter-interpolate oversampling for one (sensitive, label) subgroup.

The subgroup is clustered with seeded k-means, the outermost rows of each
cluster are discarded, and new rows are interpolated between a retained row
and one of its nearest retained neighbours in the same cluster. New rows are
spread over clusters in proportion to their retained sizes, so synthesis does
not shift the subgroup's internal mix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import ConfigError, SynthesisError

N_NEIGHBORS = 5


@dataclass(frozen=True)
class SynthConfig:
    k_clusters: int | None = None  # None: ceil(sqrt(size / 2))
    filter_fraction: float = 0.20
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.filter_fraction < 1.0:
            raise ConfigError(f"filter_fraction must lie in [0, 1), got {self.filter_fraction}")
        if self.k_clusters is not None and self.k_clusters < 1:
            raise ConfigError(f"k_clusters must be >= 1, got {self.k_clusters}")

    def clusters_for(self, size: int) -> int:
        k = self.k_clusters if self.k_clusters is not None else math.ceil(math.sqrt(size / 2))
        return max(1, min(k, size))


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    for _ in range(1, k):
        d2 = _sq_dists(X, np.asarray(centers)).min(axis=1)
        total = d2.sum()
        if total == 0:
            # every point coincides with a centre already
            centers.append(X[rng.integers(n)])
        else:
            centers.append(X[rng.choice(n, p=d2 / total)])
    return np.asarray(centers, dtype=float)


def kmeans(X, k: int, seed: int = 0, max_iter: int = 100, tol: float = 1e-6):
    """Lloyd's algorithm from a k-means++ start. Returns (centroids, assignment)."""
    X = np.asarray(X, dtype=float)
    rng = np.random.default_rng(seed)
    centers = kmeans_pp_init(X, k, rng)
    assign = np.zeros(X.shape[0], dtype=np.int64)
    for _ in range(max_iter):
        d2 = _sq_dists(X, centers)
        assign = d2.argmin(axis=1)
        new = centers.copy()
        for j in range(k):
            members = assign == j
            if members.any():
                new[j] = X[members].mean(axis=0)
            else:
                # re-seed from the point worst served by its current centre
                far = d2[np.arange(len(X)), assign].argmax()
                new[j] = X[far]
                assign[far] = j
        shift = np.sqrt(((new - centers) ** 2).sum(axis=1)).max()
        centers = new
        if shift < tol:
            break
    assign = _sq_dists(X, centers).argmin(axis=1)
    return centers, assign


def largest_remainder(total: int, weights) -> np.ndarray:
    """Integer allocation of `total` proportional to `weights` (Hamilton's method)."""
    w = np.asarray(weights, dtype=float)
    if total == 0 or w.sum() == 0:
        return np.zeros(len(w), dtype=np.int64)
    exact = total * w / w.sum()
    base = np.floor(exact).astype(np.int64)
    short = total - int(base.sum())
    # stable sort: equal remainders favour the earlier cluster
    order = np.argsort(-(exact - base), kind="stable")
    base[order[:short]] += 1
    return base


def _filter_cluster(Z: np.ndarray, members: np.ndarray, fraction: float) -> np.ndarray:
    center = Z[members].mean(axis=0)
    dist = np.sqrt(((Z[members] - center) ** 2).sum(axis=1))
    drop = math.ceil(fraction * len(members))
    keep = max(1, len(members) - drop)
    order = np.argsort(dist, kind="stable")
    return np.sort(members[order[:keep]])


@dataclass(frozen=True)
class SynthTrace:
    """Where each synthetic row came from; used for auditing and tests."""

    assignment: np.ndarray  # cluster per input row
    retained: tuple  # input-row indices kept per cluster after filtering
    allocation: np.ndarray  # rows generated per cluster
    cluster_of: np.ndarray  # cluster per generated row
    parents: np.ndarray  # (a, b) input-row indices per generated row


def synthesize(rows: Dataset, n_new: int, cfg: SynthConfig = SynthConfig(),
               start_id: int | None = None, s: str | None = None) -> Dataset:
    """Generate `n_new` synthetic rows resembling `rows`, which must share (S, Y)."""
    return synthesize_traced(rows, n_new, cfg, start_id, s)[0]


def synthesize_traced(rows: Dataset, n_new: int, cfg: SynthConfig = SynthConfig(),
                      start_id: int | None = None, s: str | None = None):
    if n_new < 0:
        raise SynthesisError(f"cannot synthesize a negative number of rows ({n_new})")
    if start_id is None:
        start_id = rows.next_row_id()
    if n_new == 0:
        empty = np.empty(0, dtype=np.int64)
        return rows.take(empty), SynthTrace(empty, (), empty, empty, np.empty((0, 2), dtype=np.int64))
    if rows.n < 2:
        raise SynthesisError(f"subgroup has {rows.n} row(s); at least 2 are needed to synthesize")
    sens_name = s if s is not None else rows.schema.sensitive_names[0]
    sens = rows.sensitive(sens_name)
    if len(np.unique(sens)) != 1 or len(np.unique(rows.labels)) != 1:
        raise SynthesisError("rows passed to synthesize span more than one (sensitive, label) subgroup")

    sens_cols = [rows.schema.index_of(a) for a in rows.schema.sensitive_names]
    free_cols = [j for j in range(rows.m) if j not in sens_cols]
    X = rows.features
    Z = X[:, free_cols]

    k = cfg.clusters_for(rows.n)
    _, assign = kmeans(Z, k, seed=cfg.seed)
    retained = [_filter_cluster(Z, np.flatnonzero(assign == j), cfg.filter_fraction)
                if (assign == j).any() else np.empty(0, dtype=np.int64)
                for j in range(k)]
    alloc = largest_remainder(n_new, [len(r) for r in retained])

    rng = np.random.default_rng([cfg.seed, 1])
    out = np.empty((n_new, rows.m))
    cluster_of = np.empty(n_new, dtype=np.int64)
    parents = np.empty((n_new, 2), dtype=np.int64)
    pos = 0
    for j, (pool, count) in enumerate(zip(retained, alloc)):
        if count == 0:
            continue
        Zp = Z[pool]
        d2 = _sq_dists(Zp, Zp)
        np.fill_diagonal(d2, np.inf)
        n_nb = min(N_NEIGHBORS, len(pool) - 1)
        nbrs = np.argsort(d2, axis=1, kind="stable")[:, :n_nb] if n_nb else None
        for _ in range(int(count)):
            a = int(rng.integers(len(pool)))
            b = int(nbrs[a, rng.integers(n_nb)]) if n_nb else a
            u = rng.uniform(0.0, 1.0)
            xa, xb = X[pool[a]], X[pool[b]]
            row = xa + u * (xb - xa)
            row[sens_cols] = xa[sens_cols]
            out[pos] = np.clip(row, 0.0, 1.0)
            cluster_of[pos] = j
            parents[pos] = pool[a], pool[b]
            pos += 1

    ids = np.arange(start_id, start_id + n_new)
    labels = np.full(n_new, rows.labels[0])
    result = Dataset(out, labels, rows.schema, ids, np.ones(n_new, dtype=bool))
    return result, SynthTrace(assign, tuple(retained), alloc, cluster_of, parents)
