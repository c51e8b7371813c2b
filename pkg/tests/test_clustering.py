import json

import numpy as np
import pytest

from clustering import assign_to_centers, cluster_purity, lbg_cluster, save_codebook
from conftest import noisy_cluster, random_point
from grassmann_core import DimensionMismatch, TooManyCenters, chordal_distance
from prototypes import Init, SolverConfig, Termination, flag_mean, flag_median
from synth import SubspaceDataset, class_mixture_dataset, class_ring_centers


def _two_clusters(rng, per=12):
    a, b = random_point(rng, 10, 2), random_point(rng, 10, 2)
    points = noisy_cluster(rng, a, per, 0.01) + noisy_cluster(rng, b, per, 0.01)
    return SubspaceDataset(points, ['a'] * per + ['b'] * per)


class TestPurity:
    def test_perfect(self):
        assert cluster_purity([0, 1, 2, 1], [0, 1, 2, 1]) == 1.0

    def test_single_cluster_split(self):
        assert cluster_purity([0, 0, 0, 0], ['x', 'x', 'x', 'y']) == 0.75

    def test_relabeling_invariance(self):
        labels = ['a', 'a', 'b', 'b', 'c']
        assert cluster_purity([0, 0, 1, 2, 2], labels) == cluster_purity([5, 5, 3, 9, 9], labels)

    def test_random_assignment_lower_bound(self, rng):
        labels = np.repeat(np.arange(4), 25)
        assignments = rng.integers(0, 6, size=100)
        assert cluster_purity(assignments, labels) >= 0.25

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatch):
            cluster_purity([0, 1], [0])


class TestLbg:
    def test_single_center_is_flag_mean(self, rng):
        data = class_mixture_dataset(0, n_classes=2, per_class=6)
        codebook = lbg_cluster(data, 1, method='flag_mean', r=3, seed=0)
        assert codebook.centers[0] == flag_mean(data, 3).subspace
        assert set(codebook.assignments) == {0}

    @pytest.mark.parametrize('method', ['flag_median', 'flag_mean', 'l2_median'])
    def test_separated_clusters(self, rng, method):
        data = _two_clusters(rng)
        codebook = lbg_cluster(data, 2, method=method, r=2, init_indices=[0, 12])
        assert cluster_purity(codebook.assignments, data.labels) == 1.0

    def test_assignment_is_nearest(self, rng):
        data = _two_clusters(rng)
        codebook = lbg_cluster(data, 3, method='flag_median', r=2, seed=4)
        for X, j in zip(data, codebook.assignments):
            d = [chordal_distance(X, C) for C in codebook.centers]
            assert d[j] == min(d)
        recomputed = sum(chordal_distance(X, codebook.centers[j]) for X, j in zip(data, codebook.assignments))
        assert codebook.distortion == pytest.approx(recomputed, abs=1e-9)

    def test_ties_go_to_lowest_index(self, rng):
        X = random_point(rng, 5, 1)
        assignments, _ = assign_to_centers([X], [X, X])
        assert assignments[0] == 0

    def test_empty_cluster_is_reseeded(self, rng):
        X = random_point(rng, 6, 1)
        data = [X, X, X, random_point(rng, 6, 1)]
        codebook = lbg_cluster(data, 3, method='flag_mean', r=1, init_indices=[0, 1, 2])
        assert codebook.size == 3
        assert all(C.sub_dim == 1 for C in codebook.centers)
        assert codebook.distortion == pytest.approx(0.0, abs=1e-9)

    def test_deterministic(self, rng):
        data = _two_clusters(rng)
        a = lbg_cluster(data, 3, method='flag_median', r=2, seed=9)
        b = lbg_cluster(data, 3, method='flag_median', r=2, seed=9)
        np.testing.assert_array_equal(a.assignments, b.assignments)
        assert a.distortion_trace == b.distortion_trace

    def test_too_many_centers(self, rng):
        with pytest.raises(TooManyCenters):
            lbg_cluster([random_point(rng, 4, 1)] * 2, 3, r=1)

    def test_centers_need_r_dimensions(self, rng):
        data = [random_point(rng, 6, 1), random_point(rng, 6, 2)]
        with pytest.raises(DimensionMismatch):
            lbg_cluster(data, 1, method='flag_median', r=2)

    def test_save_codebook(self, rng, tmp_path):
        data = _two_clusters(rng, per=4)
        codebook = lbg_cluster(data, 2, method='flag_mean', r=2, init_indices=[0, 4])
        payload = save_codebook(codebook, tmp_path, labels=data.labels, seed=0, r=2)
        stored = json.loads((tmp_path / 'codebook.json').read_text())
        assert stored == payload
        assert stored['purity'] == 1.0
        assert (tmp_path / 'center_01.csv').exists()

    def test_reassignment_never_raises_distortion(self, rng):
        data = _two_clusters(rng)
        init = [0, 1, 12]
        stale, _ = assign_to_centers(data, [data[i] for i in init])
        codebook = lbg_cluster(data, 3, method='flag_median', r=2, init_indices=init, max_rounds=1)
        kept = sum(chordal_distance(X, codebook.centers[j]) for X, j in zip(data, stale))
        assert codebook.distortion <= kept + 1e-12
        assert len(codebook.distortion_trace) == 2

    def test_flag_median_distortion_trace(self, rng):
        data = _two_clusters(rng)
        codebook = lbg_cluster(data, 3, method='flag_median', r=2, seed=4)
        trace = codebook.distortion_trace
        assert len(trace) == codebook.rounds + 1
        assert trace[-1] == codebook.distortion
        assert all(b <= a + 1e-9 for a, b in zip(trace, trace[1:]))


class TestRingMixture:
    @pytest.mark.parametrize('method', ['flag_median', 'flag_mean', 'l2_median'])
    def test_one_seed_per_class(self, method):
        data = class_mixture_dataset(0)
        codebook = lbg_cluster(data, 5, method=method, r=3, init_indices=[0, 20, 40, 60, 80])
        assert cluster_purity(codebook.assignments, data.labels) == 1.0

    def test_median_center_ignores_boundary_outliers(self):
        data, centers = class_mixture_dataset(0), class_ring_centers(0)
        # class 0's inliers plus its two outliers leaning toward class 1
        members = [data[i] for i in list(range(16)) + [16, 18]]
        median = lbg_cluster(members, 1, method='flag_median', r=3, init_indices=[0])
        mean = lbg_cluster(members, 1, method='flag_mean', r=3, init_indices=[0])
        d_median = chordal_distance(median.centers[0], centers[0])
        d_mean = chordal_distance(mean.centers[0], centers[0])
        assert d_median < 0.5 * d_mean

    def test_warm_start_on_an_outlier_converges(self):
        data, centers = class_mixture_dataset(0), class_ring_centers(0)
        members = [data[i] for i in range(20)]
        result = flag_median(members, SolverConfig(r=3, init=Init.explicit(members[16])))
        assert result.termination != Termination.ITERATION_CAP
        assert chordal_distance(result.subspace, centers[0]) < 0.02
