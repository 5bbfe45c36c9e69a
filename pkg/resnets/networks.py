"""Core graph types, morphological network construction and error metrics.

All types here are immutable: arrays are copied on construction and marked
read-only, so they can be shared between concurrent workers.
"""
from dataclasses import dataclass
from typing import Iterable, List, Mapping, Sequence, Tuple
import logging

import numpy as np

from .errors import (
    AsymmetryError,
    DimensionMismatchError,
    InvalidInputError,
    ManifestError,
    NegativeWeightError,
    ValidationError,
)

logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-9


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


def _off_diagonal(weights: np.ndarray) -> np.ndarray:
    n = weights.shape[0]
    return weights[~np.eye(n, dtype=bool)]


@dataclass(frozen=True, eq=False)
class ConnectivityMatrix:
    """Symmetric, non-negative, zero-diagonal weighted graph over n_rois nodes"""
    weights: np.ndarray

    def __post_init__(self):
        weights = _frozen(self.weights)
        if weights.ndim != 2 or weights.shape[0] != weights.shape[1] or weights.shape[0] < 1:
            raise ValidationError(f"connectivity matrix must be square and non-empty, got shape {weights.shape}")
        if not np.all(np.isfinite(weights)):
            raise InvalidInputError("connectivity matrix contains non-finite weights")
        if not np.array_equal(weights, weights.T):
            raise AsymmetryError("connectivity matrix is not symmetric")
        if np.any(np.diagonal(weights) != 0):
            raise ValidationError("connectivity matrix must have a zero diagonal")
        if np.any(weights < 0):
            raise NegativeWeightError("connectivity matrix contains negative weights")
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_array(cls, array, symmetry_tol: float = SYMMETRY_TOLERANCE) -> "ConnectivityMatrix":
        """Build from a possibly text-rounded array.

        Symmetry and the zero diagonal are checked within `symmetry_tol`; the
        result is then symmetrized by averaging and its diagonal zeroed.
        """
        weights = np.asarray(array, dtype=np.float64)
        if weights.ndim != 2 or weights.shape[0] != weights.shape[1]:
            raise ValidationError(f"connectivity matrix must be square, got shape {weights.shape}")
        if not np.all(np.isfinite(weights)):
            raise InvalidInputError("connectivity matrix contains non-finite weights")
        asymmetry = np.max(np.abs(weights - weights.T)) if weights.size else 0.0
        if asymmetry > symmetry_tol:
            raise AsymmetryError(f"connectivity matrix asymmetry {asymmetry:.3g} exceeds tolerance {symmetry_tol:g}")
        if np.any(np.abs(np.diagonal(weights)) > symmetry_tol):
            raise ValidationError("connectivity matrix must have a zero diagonal")
        if np.any(weights < 0):
            raise NegativeWeightError("connectivity matrix contains negative weights")
        symmetric = (weights + weights.T) / 2.0
        np.fill_diagonal(symmetric, 0.0)
        return cls(symmetric)

    @property
    def n_rois(self) -> int:
        return self.weights.shape[0]

    def scaled(self, factor: float) -> "ConnectivityMatrix":
        if factor < 0:
            raise InvalidInputError("scale factor must be non-negative")
        return ConnectivityMatrix(self.weights * factor)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """Row-major upper-triangle (diagonal excluded) of a connectivity matrix"""
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(np.ravel(self.values)))

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class SubjectTrajectory:
    """One subject's networks, keyed by timepoint label in observation order"""
    subject_id: str
    matrices: Mapping[str, ConnectivityMatrix]

    def __post_init__(self):
        matrices = dict(self.matrices)
        if not matrices:
            raise ValidationError(f"subject '{self.subject_id}' has no networks")
        sizes = {m.n_rois for m in matrices.values()}
        if len(sizes) != 1:
            raise DimensionMismatchError(f"subject '{self.subject_id}' mixes network sizes {sorted(sizes)}")
        object.__setattr__(self, "matrices", matrices)

    @property
    def timepoints(self) -> Tuple[str, ...]:
        return tuple(self.matrices)

    @property
    def baseline(self) -> ConnectivityMatrix:
        return next(iter(self.matrices.values()))

    @property
    def n_rois(self) -> int:
        return self.baseline.n_rois

    def at(self, timepoint: str) -> ConnectivityMatrix:
        try:
            return self.matrices[timepoint]
        except KeyError:
            raise ValidationError(f"subject '{self.subject_id}' has no network at timepoint '{timepoint}'") from None


@dataclass(frozen=True)
class Population:
    """Training population: every subject observed at every timepoint"""
    subjects: Tuple[SubjectTrajectory, ...]
    timepoints: Tuple[str, ...]
    n_rois: int

    def __post_init__(self):
        subjects = tuple(self.subjects)
        timepoints = tuple(self.timepoints)
        if not timepoints:
            raise ValidationError("population needs at least one timepoint")
        if len(set(timepoints)) != len(timepoints):
            raise ValidationError(f"duplicate timepoint labels in {timepoints}")
        ids = [s.subject_id for s in subjects]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate subject ids in population")
        for subject in subjects:
            if subject.n_rois != self.n_rois:
                raise DimensionMismatchError(
                    f"subject '{subject.subject_id}' has {subject.n_rois} ROIs, population expects {self.n_rois}"
                )
            missing = [t for t in timepoints if t not in subject.matrices]
            if missing:
                raise ManifestError(f"subject '{subject.subject_id}' is missing timepoints {missing}")
            # keep each subject's matrices in population order
            if subject.timepoints != timepoints:
                ordered = SubjectTrajectory(subject.subject_id, {t: subject.matrices[t] for t in timepoints})
                subjects = tuple(ordered if s is subject else s for s in subjects)
        object.__setattr__(self, "subjects", subjects)
        object.__setattr__(self, "timepoints", timepoints)

    @classmethod
    def from_subjects(cls, subjects: Iterable[SubjectTrajectory]) -> "Population":
        subjects = tuple(subjects)
        if not subjects:
            raise ValidationError("population needs at least one subject")
        return cls(subjects, subjects[0].timepoints, subjects[0].n_rois)

    @property
    def n_subjects(self) -> int:
        return len(self.subjects)

    @property
    def subject_ids(self) -> List[str]:
        return [s.subject_id for s in self.subjects]

    @property
    def baseline(self) -> str:
        return self.timepoints[0]

    @property
    def follow_ups(self) -> Tuple[str, ...]:
        return self.timepoints[1:]

    def index_of(self, subject_id: str) -> int:
        try:
            return self.subject_ids.index(subject_id)
        except ValueError:
            raise ValidationError(f"unknown subject '{subject_id}'") from None

    def subject(self, subject_id: str) -> SubjectTrajectory:
        return self.subjects[self.index_of(subject_id)]

    def require_timepoint(self, timepoint: str) -> None:
        if timepoint not in self.timepoints:
            raise ValidationError(f"timepoint '{timepoint}' not in population timepoints {list(self.timepoints)}")

    def matrices_at(self, timepoint: str) -> List[ConnectivityMatrix]:
        self.require_timepoint(timepoint)
        return [s.matrices[timepoint] for s in self.subjects]

    def stack(self, timepoint: str) -> np.ndarray:
        """(n_subjects, n_rois, n_rois) array of the networks at one timepoint"""
        return np.stack([m.weights for m in self.matrices_at(timepoint)])

    def without(self, subject_id: str) -> Tuple["Population", SubjectTrajectory]:
        """Split off one subject; the remaining population excludes it entirely"""
        held_out = self.subject(subject_id)
        rest = tuple(s for s in self.subjects if s.subject_id != subject_id)
        return Population(rest, self.timepoints, self.n_rois), held_out

    def scaled(self, factor: float) -> "Population":
        subjects = tuple(
            SubjectTrajectory(s.subject_id, {t: m.scaled(factor) for t, m in s.matrices.items()})
            for s in self.subjects
        )
        return Population(subjects, self.timepoints, self.n_rois)


def build_mbn(thickness: Sequence[float]) -> ConnectivityMatrix:
    """Morphological network: edge (a, b) = |thickness[a] - thickness[b]|"""
    values = np.asarray(thickness, dtype=np.float64).ravel()
    if values.shape[0] < 2:
        raise InvalidInputError("a morphological network needs at least 2 ROIs")
    if not np.all(np.isfinite(values)):
        raise InvalidInputError("cortical thickness values must be finite")
    return ConnectivityMatrix(np.abs(values[:, None] - values[None, :]))


def vectorize_upper(matrix: ConnectivityMatrix) -> FeatureVector:
    rows, cols = np.triu_indices(matrix.n_rois, k=1)
    return FeatureVector(matrix.weights[rows, cols])


def unvectorize_upper(vector: FeatureVector, n_rois: int) -> ConnectivityMatrix:
    expected = n_rois * (n_rois - 1) // 2
    if len(vector) != expected:
        raise DimensionMismatchError(f"feature vector of length {len(vector)} does not fit {n_rois} ROIs (expected {expected})")
    weights = np.zeros((n_rois, n_rois))
    rows, cols = np.triu_indices(n_rois, k=1)
    weights[rows, cols] = vector.values
    weights[cols, rows] = vector.values
    return ConnectivityMatrix(weights)


def _check_same_size(a: ConnectivityMatrix, b: ConnectivityMatrix) -> None:
    if a.n_rois != b.n_rois:
        raise DimensionMismatchError(f"cannot compare networks with {a.n_rois} and {b.n_rois} ROIs")


def mad(a: ConnectivityMatrix, b: ConnectivityMatrix) -> float:
    """Mean absolute deviance over off-diagonal entries"""
    _check_same_size(a, b)
    if a.n_rois < 2:
        return 0.0
    return float(np.mean(np.abs(_off_diagonal(a.weights) - _off_diagonal(b.weights))))


def mse(a: ConnectivityMatrix, b: ConnectivityMatrix) -> float:
    """Mean squared error over off-diagonal entries"""
    _check_same_size(a, b)
    if a.n_rois < 2:
        return 0.0
    return float(np.mean((_off_diagonal(a.weights) - _off_diagonal(b.weights)) ** 2))


def absolute_error_map(a: ConnectivityMatrix, b: ConnectivityMatrix) -> np.ndarray:
    """Per-edge |a - b|; what a residual prediction error heatmap shows"""
    _check_same_size(a, b)
    return np.abs(a.weights - b.weights)


def normalize_minmax(matrix: ConnectivityMatrix) -> ConnectivityMatrix:
    """Map off-diagonal weights affinely onto [0, 1]; a constant matrix maps to 0"""
    if matrix.n_rois < 2:
        return matrix
    off = _off_diagonal(matrix.weights)
    low, high = off.min(), off.max()
    if high == low:
        return ConnectivityMatrix(np.zeros_like(matrix.weights))
    weights = (matrix.weights - low) / (high - low)
    np.fill_diagonal(weights, 0.0)
    # rounding can leave -0.0 or values a hair outside the unit interval
    return ConnectivityMatrix(np.clip(weights, 0.0, 1.0))


def mean_network(matrices: Sequence[ConnectivityMatrix]) -> ConnectivityMatrix:
    """Elementwise arithmetic mean of same-sized networks"""
    if not matrices:
        raise ValidationError("cannot average an empty set of networks")
    for other in matrices[1:]:
        _check_same_size(matrices[0], other)
    stacked = np.stack([m.weights for m in matrices])
    # offsets from the first network, so identical networks average to it exactly
    first = stacked[0]
    return ConnectivityMatrix(first + np.mean(stacked - first, axis=0))
