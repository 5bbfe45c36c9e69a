import numpy as np
import pytest

from resnets.errors import (
    AsymmetryError,
    DimensionMismatchError,
    InvalidInputError,
    ManifestError,
    NegativeWeightError,
    ValidationError,
)
from resnets.networks import (
    ConnectivityMatrix,
    FeatureVector,
    Population,
    SubjectTrajectory,
    absolute_error_map,
    build_mbn,
    mad,
    mean_network,
    mse,
    normalize_minmax,
    unvectorize_upper,
    vectorize_upper,
)


def edges3(a, b, c):
    return ConnectivityMatrix(np.array([[0, a, b], [a, 0, c], [b, c, 0]], dtype=float))


class TestConnectivityMatrix:
    def test_rejects_asymmetric(self):
        with pytest.raises(AsymmetryError):
            ConnectivityMatrix(np.array([[0.0, 1.0], [2.0, 0.0]]))

    def test_rejects_negative(self):
        with pytest.raises(NegativeWeightError):
            ConnectivityMatrix(np.array([[0.0, -1.0], [-1.0, 0.0]]))

    def test_rejects_nonzero_diagonal(self):
        with pytest.raises(ValidationError):
            ConnectivityMatrix(np.array([[1.0, 1.0], [1.0, 0.0]]))

    def test_rejects_non_finite(self):
        with pytest.raises(InvalidInputError):
            ConnectivityMatrix(np.array([[0.0, np.nan], [np.nan, 0.0]]))

    def test_weights_are_read_only_copies(self):
        source = np.array([[0.0, 1.0], [1.0, 0.0]])
        matrix = ConnectivityMatrix(source)
        source[0, 1] = 5.0
        assert matrix.weights[0, 1] == 1.0
        with pytest.raises(ValueError):
            matrix.weights[0, 1] = 2.0

    def test_from_array_symmetrizes_within_tolerance(self):
        matrix = ConnectivityMatrix.from_array(np.array([[0.0, 1.0], [1.0 + 1e-12, 0.0]]))
        assert matrix.weights[0, 1] == matrix.weights[1, 0]

    def test_from_array_rejects_beyond_tolerance(self):
        with pytest.raises(AsymmetryError):
            ConnectivityMatrix.from_array(np.array([[0.0, 1.0], [1.001, 0.0]]))


class TestBuildMbn:
    def test_two_rois(self):
        np.testing.assert_array_equal(build_mbn([2.5, 3.0]).weights, [[0, 0.5], [0.5, 0]])

    def test_identical_thickness_gives_zero_matrix(self):
        np.testing.assert_array_equal(build_mbn([1.7, 1.7, 1.7]).weights, np.zeros((3, 3)))

    def test_three_rois(self):
        weights = build_mbn([1.0, 2.0, 4.0]).weights
        assert weights[0, 1] == 1.0
        assert weights[0, 2] == 3.0
        assert weights[1, 2] == 2.0

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidInputError):
            build_mbn([1.0, np.inf, 2.0])

    def test_random_inputs_satisfy_invariants(self, rng):
        for _ in range(20):
            weights = build_mbn(rng.normal(size=7) * 10).weights
            assert np.array_equal(weights, weights.T)
            assert np.all(np.diagonal(weights) == 0)
            assert np.all(weights >= 0)


class TestVectorize:
    def test_two_by_two(self):
        np.testing.assert_array_equal(vectorize_upper(build_mbn([0.0, 1.0])).values, [1.0])

    def test_row_major_order(self):
        np.testing.assert_array_equal(vectorize_upper(edges3(4.0, 5.0, 6.0)).values, [4.0, 5.0, 6.0])

    def test_zero_matrix(self):
        vector = vectorize_upper(ConnectivityMatrix(np.zeros((4, 4))))
        assert len(vector) == 6
        assert not vector.values.any()

    def test_inverse(self, make_matrix):
        matrix = make_matrix(9)
        restored = unvectorize_upper(vectorize_upper(matrix), 9)
        np.testing.assert_array_equal(restored.weights, matrix.weights)

    def test_inverse_length_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            unvectorize_upper(FeatureVector(np.ones(4)), 3)


class TestMetrics:
    def test_identity(self, make_matrix):
        matrix = make_matrix()
        assert mad(matrix, matrix) == 0.0
        assert mse(matrix, matrix) == 0.0

    def test_two_by_two(self):
        a, b = build_mbn([0.0, 1.0]), build_mbn([0.0, 3.0])
        assert mad(a, b) == 2.0
        assert mse(a, b) == 4.0

    def test_three_by_three_mirrored_diffs(self):
        a, b = edges3(0, 0, 0), edges3(1, 2, 3)
        assert mad(a, b) == pytest.approx(2.0)
        assert mse(a, b) == pytest.approx(14 / 3, abs=1e-6)

    def test_symmetric_in_arguments(self, make_matrix):
        a, b = make_matrix(), make_matrix()
        assert mad(a, b) == mad(b, a)
        assert mse(a, b) == mse(b, a)

    def test_mse_zero_iff_equal(self, make_matrix):
        a, b = make_matrix(), make_matrix()
        assert mse(a, b) > 0
        assert mse(a, ConnectivityMatrix(a.weights)) == 0

    def test_dimension_mismatch(self, make_matrix):
        with pytest.raises(DimensionMismatchError):
            mad(make_matrix(3), make_matrix(4))
        with pytest.raises(DimensionMismatchError):
            mse(make_matrix(3), make_matrix(4))

    def test_absolute_error_map(self):
        error = absolute_error_map(edges3(1, 2, 3), edges3(3, 2, 0))
        np.testing.assert_array_equal(error, [[0, 2, 0], [2, 0, 3], [0, 3, 0]])


class TestNormalizeMinmax:
    def test_two_values(self):
        normalized = normalize_minmax(edges3(1, 3, 3))
        assert sorted(set(vectorize_upper(normalized).values)) == [0.0, 1.0]

    def test_constant_maps_to_zero(self):
        np.testing.assert_array_equal(normalize_minmax(edges3(2, 2, 2)).weights, np.zeros((3, 3)))

    def test_affine_map(self):
        np.testing.assert_allclose(vectorize_upper(normalize_minmax(edges3(2, 4, 6))).values, [0.0, 0.5, 1.0])

    def test_range(self, make_matrix):
        weights = normalize_minmax(make_matrix(12)).weights
        assert weights.min() == 0.0
        assert weights.max() == 1.0
        assert np.all(np.diagonal(weights) == 0)


class TestMeanNetwork:
    def test_elementwise_mean(self):
        np.testing.assert_allclose(mean_network([edges3(1, 1, 1), edges3(3, 5, 7)]).weights[0], [0, 2, 3])

    def test_identical_networks_are_exact(self, make_matrix):
        matrix = make_matrix(10)
        averaged = mean_network([matrix] * 3)
        assert np.array_equal(averaged.weights, matrix.weights)

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            mean_network([])


class TestPopulation:
    def test_reorders_subject_timepoints(self, make_matrix):
        a, b = make_matrix(), make_matrix()
        subject = SubjectTrajectory("x", {"t1": b, "t0": a})
        population = Population((subject,), ("t0", "t1"), 6)
        assert population.subjects[0].timepoints == ("t0", "t1")
        assert population.subjects[0].baseline is a

    def test_missing_timepoint(self, make_matrix):
        subject = SubjectTrajectory("x", {"t0": make_matrix()})
        with pytest.raises(ManifestError):
            Population((subject,), ("t0", "t1"), 6)

    def test_size_mismatch(self, make_matrix):
        subject = SubjectTrajectory("x", {"t0": make_matrix(5)})
        with pytest.raises(DimensionMismatchError):
            Population((subject,), ("t0",), 6)

    def test_duplicate_ids(self, make_matrix):
        subject = SubjectTrajectory("x", {"t0": make_matrix()})
        with pytest.raises(ValidationError):
            Population((subject, subject), ("t0",), 6)

    def test_without(self, small_population):
        held_out_id = small_population.subject_ids[2]
        rest, held_out = small_population.without(held_out_id)
        assert held_out.subject_id == held_out_id
        assert held_out_id not in rest.subject_ids
        assert rest.n_subjects == small_population.n_subjects - 1

    def test_stack_shape(self, small_population):
        assert small_population.stack("t0").shape == (8, 6, 6)

    def test_unknown_timepoint(self, small_population):
        with pytest.raises(ValidationError):
            small_population.matrices_at("t9")
