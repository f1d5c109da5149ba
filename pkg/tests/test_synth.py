import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial import Delaunay

from cfsa.dataset import make_dataset
from cfsa.errors import SynthesisError
from cfsa.synth import SynthConfig, kmeans, largest_remainder, synthesize, synthesize_traced

from conftest import toy_dataset


def blobs(n_each=50, seed=0, s=0.0, y=1):
    rng = np.random.default_rng(seed)
    a = rng.normal([0.2, 0.2], 0.04, (n_each, 2))
    b = rng.normal([0.8, 0.7], 0.04, (n_each, 2))
    X = np.clip(np.vstack([a, b]), 0, 1)
    n = len(X)
    return toy_dataset(np.column_stack([X, np.full(n, s)]), np.full(n, y)), X[:n_each], X[n_each:]


class TestSynthesize:
    def test_zero(self):
        d, _, _ = blobs()
        assert synthesize(d, 0).n == 0

    def test_identical_rows(self):
        d = toy_dataset([[0.3, 0.6, 1.0], [0.3, 0.6, 1.0]], [0, 0])
        out = synthesize(d, 5)
        np.testing.assert_array_equal(out.features, np.tile([0.3, 0.6, 1.0], (5, 1)))
        assert (out.labels == 0).all()

    def test_two_blobs_hull_and_allocation(self):
        d, a, b = blobs()
        out = synthesize(d, 10, SynthConfig(seed=4))
        hull_a, hull_b = Delaunay(a), Delaunay(b)
        in_a = hull_a.find_simplex(out.features[:, :2]) >= 0
        in_b = hull_b.find_simplex(out.features[:, :2]) >= 0
        assert (in_a ^ in_b).all()
        assert abs(in_a.sum() - 5) <= 1 and abs(in_b.sum() - 5) <= 1

    def test_subgroup_preserved_and_flagged(self):
        d, _, _ = blobs(s=1.0, y=0)
        out = synthesize(d, 17, SynthConfig(seed=1), start_id=500)
        assert (out.sensitive() == 1).all() and (out.labels == 0).all()
        assert out.synthetic.all()
        np.testing.assert_array_equal(out.row_ids, np.arange(500, 517))

    def test_rows_interpolate_retained_cluster_mates(self):
        d, _, _ = blobs(seed=3)
        out, trace = synthesize_traced(d, 40, SynthConfig(seed=2))
        for row, (ia, ib), c in zip(out.features, trace.parents, trace.cluster_of):
            assert ia in trace.retained[c] and ib in trace.retained[c]
            xa, xb = d.features[ia], d.features[ib]
            seg = xb - xa
            if np.allclose(seg, 0):
                np.testing.assert_allclose(row, xa)
                continue
            u = np.dot(row - xa, seg) / np.dot(seg, seg)
            assert -1e-12 <= u <= 1 + 1e-12
            np.testing.assert_allclose(row, xa + u * seg, atol=1e-12)

    def test_filter_drops_farthest(self):
        d, _, _ = blobs(seed=5)
        _, trace = synthesize_traced(d, 5, SynthConfig(k_clusters=2, filter_fraction=0.2, seed=0))
        Z = d.features[:, :2]
        for j in range(2):
            members = np.flatnonzero(trace.assignment == j)
            kept = trace.retained[j]
            assert len(kept) == len(members) - int(np.ceil(0.2 * len(members)))
            centre = Z[members].mean(axis=0)
            dist = np.linalg.norm(Z - centre, axis=1)
            dropped = np.setdiff1d(members, kept)
            assert dist[kept].max() <= dist[dropped].min()

    def test_proportional_to_retained_sizes(self):
        d, _, _ = blobs(n_each=70, seed=6)
        _, trace = synthesize_traced(d, 33, SynthConfig(seed=9))
        sizes = np.array([len(r) for r in trace.retained])
        exact = 33 * sizes / sizes.sum()
        assert np.all(np.abs(trace.allocation - exact) < 1)
        assert trace.allocation.sum() == 33
        np.testing.assert_array_equal(np.bincount(trace.cluster_of, minlength=len(sizes)), trace.allocation)

    def test_deterministic(self):
        d, _, _ = blobs(seed=7)
        a = synthesize(d, 25, SynthConfig(seed=11))
        b = synthesize(d, 25, SynthConfig(seed=11))
        assert a.features.tobytes() == b.features.tobytes()

    def test_too_few_rows(self):
        d = toy_dataset([[0.3, 0.6, 1.0]], [0])
        with pytest.raises(SynthesisError):
            synthesize(d, 1)

    def test_mixed_subgroups_rejected(self):
        d = toy_dataset([[0.3, 0.6, 1.0], [0.2, 0.1, 0.0]], [0, 0])
        with pytest.raises(SynthesisError):
            synthesize(d, 1)

    def test_other_sensitive_columns_copied(self):
        rng = np.random.default_rng(1)
        X = np.column_stack([rng.random((30, 2)), np.ones(30), (np.arange(30) % 2).astype(float)])
        d = make_dataset(X, np.ones(30, dtype=int), ["x0", "x1", "sex", "race"], ["sex", "race"])
        out = synthesize(d, 20, SynthConfig(seed=2), s="sex")
        assert set(np.unique(out.column("race"))) <= {0.0, 1.0}


class TestLargestRemainder:
    @settings(max_examples=200)
    @given(total=st.integers(0, 500), weights=st.lists(st.integers(0, 100), min_size=1, max_size=12))
    def test_properties(self, total, weights):
        alloc = largest_remainder(total, weights)
        w = np.asarray(weights, dtype=float)
        if w.sum() == 0:
            assert alloc.sum() == 0
            return
        assert alloc.sum() == total
        assert np.all(np.abs(alloc - total * w / w.sum()) < 1)

    def test_hand_case(self):
        # 10 * [0.5, 0.3, 0.2] is already integral; 7 * [1/3]*3 leaves remainder 1 for the first
        np.testing.assert_array_equal(largest_remainder(10, [5, 3, 2]), [5, 3, 2])
        np.testing.assert_array_equal(largest_remainder(7, [1, 1, 1]), [3, 2, 2])


class TestKMeans:
    def test_recovers_blobs(self):
        _, a, b = blobs()
        centers, assign = kmeans(np.vstack([a, b]), 2, seed=0)
        assert len(set(assign[:50])) == 1 and len(set(assign[50:])) == 1
        assert assign[0] != assign[-1]

    def test_deterministic(self):
        X = np.random.default_rng(0).random((80, 3))
        c1, a1 = kmeans(X, 4, seed=5)
        c2, a2 = kmeans(X, 4, seed=5)
        np.testing.assert_array_equal(c1, c2)
        np.testing.assert_array_equal(a1, a2)

    def test_duplicates_do_not_crash(self):
        X = np.zeros((6, 2))
        _, assign = kmeans(X, 3, seed=0)
        assert assign.shape == (6,)
