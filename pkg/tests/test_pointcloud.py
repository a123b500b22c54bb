import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from helpers import brute_force_knn
from nudge3d.errors import InvalidInput
from nudge3d.pointcloud import (
    SYNTH_CLASS_NAMES,
    PointCloud,
    knn_indices,
    normalize_unit_sphere,
    perturbation_norms,
    sample_fixed_size,
    sample_primitive_surface,
    synth_dataset,
    synth_shape,
)

coords = st.floats(-50.0, 50.0, allow_nan=False, allow_infinity=False)


def cloud_arrays(min_points=2, max_points=48):
    return hnp.arrays(np.float64, st.tuples(st.integers(min_points, max_points), st.just(3)),
                      elements=coords)


class TestNormalize:
    def test_two_point_symmetry(self):
        out = normalize_unit_sphere(PointCloud([(2, 0, 0), (4, 0, 0)]))
        assert np.array_equal(out.points, [(-1, 0, 0), (1, 0, 0)])

    def test_all_points_equal_collapse_to_origin(self):
        out = normalize_unit_sphere(PointCloud([(5.0, 5.0, 5.0)] * 4))
        assert np.array_equal(out.points, np.zeros((4, 3)))

    def test_random_cloud_centered_and_unit_radius(self):
        pts = np.random.default_rng(3).uniform(-4, 9, size=(32, 3))
        out = normalize_unit_sphere(PointCloud(pts))
        radii = np.linalg.norm(out.points, axis=1)
        assert np.abs(out.points.mean(axis=0)).max() < 1e-5
        assert abs(radii.max() - 1.0) < 1e-5

    def test_nonfinite_coordinates_rejected(self):
        with pytest.raises(InvalidInput):
            PointCloud([(0.0, np.nan, 0.0)])
        with pytest.raises(InvalidInput):
            PointCloud([(np.inf, 0.0, 0.0)])

    def test_preserves_label_and_order(self):
        cloud = PointCloud([(0, 0, 0), (1, 0, 0), (0, 2, 0)], label=3)
        out = normalize_unit_sphere(cloud)
        assert out.label == 3
        assert out.points[2][1] > out.points[1][0]  # order kept

    @settings(max_examples=60, deadline=None)
    @given(cloud_arrays())
    def test_idempotent(self, pts):
        once = normalize_unit_sphere(PointCloud(pts))
        twice = normalize_unit_sphere(once)
        assert np.abs(twice.points - once.points).max() < 1e-6


class TestSampleFixedSize:
    def test_full_size_returns_same_points(self):
        cloud = PointCloud(np.arange(12, dtype=float).reshape(4, 3))
        out = sample_fixed_size(cloud, 4, seed=0)
        assert sorted(map(tuple, out.points)) == sorted(map(tuple, cloud.points))

    def test_deterministic(self):
        pts = np.random.default_rng(0).normal(size=(2048, 3))
        a = sample_fixed_size(PointCloud(pts), 1024, seed=9)
        b = sample_fixed_size(PointCloud(pts), 1024, seed=9)
        assert np.array_equal(a.points, b.points)

    def test_upsampling_only_reuses_input_points(self):
        pts = np.random.default_rng(1).normal(size=(10, 3))
        out = sample_fixed_size(PointCloud(pts), 1024, seed=4)
        assert out.n_points == 1024
        source = {tuple(p) for p in pts}
        assert all(tuple(p) in source for p in out.points)

    def test_zero_target_rejected(self):
        with pytest.raises(InvalidInput):
            sample_fixed_size(PointCloud([(0, 0, 0)]), 0, seed=0)


class TestKnn:
    def test_collinear(self):
        idx = knn_indices(PointCloud([(0, 0, 0), (1, 0, 0), (3, 0, 0)]), 1)
        assert idx.tolist() == [[1], [0], [1]]

    def test_unit_square_edge_neighbors(self):
        square = PointCloud([(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)])
        idx = knn_indices(square, 2)
        assert sorted(idx[0]) == [1, 3]
        assert sorted(idx[1]) == [0, 2]
        assert sorted(idx[2]) == [1, 3]
        assert sorted(idx[3]) == [0, 2]

    def test_matches_brute_force_on_random_cloud(self):
        pts = np.random.default_rng(8).normal(size=(64, 3))
        assert np.array_equal(knn_indices(pts, 8), brute_force_knn(pts, 8))

    def test_duplicate_points_tie_to_lower_index(self):
        pts = np.random.default_rng(2).normal(size=(40, 3))
        pts[17] = pts[3]  # exact duplicate
        pts[29] = pts[3]
        assert np.array_equal(knn_indices(pts, 6), brute_force_knn(pts, 6))

    def test_k_out_of_range(self):
        cloud = PointCloud(np.random.default_rng(0).normal(size=(5, 3)))
        for bad in (0, 5, 9):
            with pytest.raises(InvalidInput):
                knn_indices(cloud, bad)

    @settings(max_examples=40, deadline=None)
    @given(cloud_arrays(min_points=3, max_points=128), st.data())
    def test_agrees_with_oracle(self, pts, data):
        k = data.draw(st.integers(1, min(10, len(pts) - 1)))
        assert np.array_equal(knn_indices(pts, k), brute_force_knn(pts, k))


class TestSynthShapes:
    def test_sphere_radii_after_normalization(self):
        cloud = synth_shape(0, 256, seed=3, jitter=0.0)
        radii = np.linalg.norm(cloud.points, axis=1)
        assert np.abs(radii - 1.0).max() < 1e-5

    def test_cube_faces_pre_normalization(self):
        pts = sample_primitive_surface(1, 500, np.random.default_rng(4))
        extent = np.abs(pts).max()
        on_face = (np.abs(np.abs(pts) - extent) < 1e-5).any(axis=1)
        assert on_face.all()

    def test_deterministic(self):
        for class_id in range(5):
            a = synth_shape(class_id, 128, seed=11, jitter=0.05)
            b = synth_shape(class_id, 128, seed=11, jitter=0.05)
            assert np.array_equal(a.points, b.points)
            assert a.label == class_id

    def test_unknown_class_rejected(self):
        with pytest.raises(InvalidInput):
            synth_shape(5, 16, seed=0)

    def test_all_primitives_normalized(self):
        for class_id in range(5):
            cloud = synth_shape(class_id, 200, seed=6, jitter=0.01)
            assert np.abs(cloud.points.mean(axis=0)).max() < 1e-5
            assert abs(np.linalg.norm(cloud.points, axis=1).max() - 1.0) < 1e-5

    def test_dataset_builder_balanced_and_labeled(self):
        ds = synth_dataset(4, 32, seed=1, jitter=0.0, split="train")
        assert len(ds) == 20
        assert [c.label for c in ds.clouds] == [i // 4 for i in range(20)]
        assert list(ds.class_names) == list(SYNTH_CLASS_NAMES)


class TestPerturbationNorms:
    def test_identity(self):
        pts = np.random.default_rng(0).normal(size=(16, 3))
        assert perturbation_norms(pts, pts) == (0.0, 0.0, 0)

    def test_three_four_five(self):
        pts = np.zeros((4, 3))
        adv = pts.copy()
        adv[2] = (0.3, 0.0, -0.4)
        l2, linf, edited = perturbation_norms(pts, adv)
        assert l2 == pytest.approx(0.5)
        assert linf == pytest.approx(0.4)
        assert edited == 1

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInput):
            perturbation_norms(np.zeros((4, 3)), np.zeros((5, 3)))

    def test_tiny_move_counts_as_edited(self):
        pts = np.zeros((3, 3))
        adv = pts.copy()
        adv[1, 2] = 1e-300
        assert perturbation_norms(pts, adv).edited == 1

    @settings(max_examples=60, deadline=None)
    @given(cloud_arrays(), st.data())
    def test_norm_inequalities(self, pts, data):
        delta = data.draw(hnp.arrays(np.float64, pts.shape,
                                     elements=st.floats(-2, 2, allow_nan=False)))
        l2, linf, edited = perturbation_norms(pts, pts + delta)
        assert linf <= l2 + 1e-12
        assert l2 <= linf * np.sqrt(3.0 * max(edited, 1)) + 1e-9
