"""Connectional brain template estimation by per-edge medoid.

For every ROI pair the template takes the edge value of the most centered
subject: the one whose value has the smallest summed absolute distance to
all other subjects' values at that edge.
"""
from dataclasses import dataclass
from typing import Tuple
import logging

import numpy as np

from .errors import ValidationError
from .networks import ConnectivityMatrix, Population

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class HighOrderEdgeGraph:
    """Subject-by-subject distance graph for one ROI pair"""
    roi_pair: Tuple[int, int]
    distances: np.ndarray


@dataclass(frozen=True, eq=False)
class CbtResult:
    template: ConnectivityMatrix
    # -1 on the diagonal, where no subject is selected
    chosen_subject: np.ndarray

    def to_payload(self, subject_ids) -> dict:
        rows, cols = np.triu_indices(self.template.n_rois, k=1)
        return {
            "n_rois": self.template.n_rois,
            "subject_ids": list(subject_ids),
            "chosen_subject": self.chosen_subject.tolist(),
            "edges": [
                {"a": int(a), "b": int(b), "subject": int(self.chosen_subject[a, b])}
                for a, b in zip(rows, cols)
            ],
        }


def edge_values(population: Population, timepoint: str, a: int, b: int) -> np.ndarray:
    """Value of edge (a, b) for every subject, in population order"""
    if a == b:
        raise ValidationError(f"edge values need two distinct ROIs, got ({a}, {b})")
    if not (0 <= a < population.n_rois and 0 <= b < population.n_rois):
        raise ValidationError(f"ROI pair ({a}, {b}) outside 0..{population.n_rois - 1}")
    return np.array([m.weights[a, b] for m in population.matrices_at(timepoint)])


def high_order_graph(values) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.shape[0] < 2:
        raise ValidationError("a high-order graph needs at least 2 subjects")
    return np.abs(values[:, None] - values[None, :])


def edge_graph(population: Population, timepoint: str, a: int, b: int) -> HighOrderEdgeGraph:
    return HighOrderEdgeGraph((a, b), high_order_graph(edge_values(population, timepoint, a, b)))


def cumulative_distance(distances) -> np.ndarray:
    """Node strength of each subject in a high-order graph"""
    if isinstance(distances, HighOrderEdgeGraph):
        distances = distances.distances
    return np.asarray(distances, dtype=np.float64).sum(axis=1)


def estimate_cbt(population: Population, timepoint: str) -> CbtResult:
    """Estimate the population template at `timepoint`.

    Each unordered ROI pair is resolved once and mirrored. Ties in cumulative
    distance go to the lowest subject index.
    """
    if population.n_subjects < 2:
        raise ValidationError(f"template estimation needs at least 2 subjects, got {population.n_subjects}")
    stacked = population.stack(timepoint)
    n_rois = population.n_rois
    rows, cols = np.triu_indices(n_rois, k=1)
    # (n_subjects, n_pairs): column p holds the edge values of pair p
    values = stacked[:, rows, cols]
    # one subject at a time keeps memory at the size of `values`
    strengths = np.empty_like(values)
    for s in range(values.shape[0]):
        strengths[s] = np.abs(values - values[s]).sum(axis=0)
    # argmin returns the first minimum, i.e. the lowest subject index
    chosen = np.argmin(strengths, axis=0)
    picked = values[chosen, np.arange(values.shape[1])]

    weights = np.zeros((n_rois, n_rois))
    weights[rows, cols] = picked
    weights[cols, rows] = picked
    chosen_subject = np.full((n_rois, n_rois), -1, dtype=np.int64)
    chosen_subject[rows, cols] = chosen
    chosen_subject[cols, rows] = chosen
    logger.debug(f"Estimated template at '{timepoint}' from {population.n_subjects} subjects")
    return CbtResult(ConnectivityMatrix(weights), chosen_subject)
