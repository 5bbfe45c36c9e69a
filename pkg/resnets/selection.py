"""Neighbor selection at baseline and follow-up prediction by averaging.

Three ways of scoring training subjects against a test subject:

    resnets  cosine between residual embeddings |z_cbt - z|
    esnets   dot product between embeddings
    snets    dot product between raw upper-triangle feature vectors

plus a seeded `random-selection` control. The top-K training subjects at
baseline are selected once and their follow-up networks averaged.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple
import logging

import numpy as np

from .embedding import Embedding
from .errors import ConfigError, DimensionMismatchError, ValidationError
from .networks import (
    ConnectivityMatrix,
    FeatureVector,
    Population,
    mean_network,
    vectorize_upper,
)

logger = logging.getLogger(__name__)


class Method(str, Enum):
    RESNETS = "resnets"
    ESNETS = "esnets"
    SNETS = "snets"
    RANDOM = "random-selection"

    @classmethod
    def parse(cls, value) -> "Method":
        try:
            return cls(value)
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise ConfigError(f"unknown method '{value}' (choose from {choices})") from None

    @property
    def needs_embeddings(self) -> bool:
        return self in (Method.RESNETS, Method.ESNETS)


@dataclass(frozen=True, eq=False)
class ResidualEmbedding:
    values: np.ndarray
    subject_id: str = ""

    def __post_init__(self):
        values = np.array(np.ravel(self.values), dtype=np.float64, copy=True)
        if np.any(values < 0):
            raise ValidationError("residual embeddings are absolute deviations and cannot be negative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class SimilarityVector:
    test_subject_id: str
    scores: np.ndarray
    subject_ids: Tuple[str, ...] = ()

    def to_payload(self) -> dict:
        return {
            "test_subject": self.test_subject_id,
            "scores": [
                {"index": i, "subject": sid, "score": float(s)}
                for i, (sid, s) in enumerate(zip(self.subject_ids, self.scores))
            ],
        }


@dataclass(frozen=True)
class NeighborSelection:
    indices: Tuple[int, ...]
    scores: Tuple[float, ...]

    @property
    def k(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class Prediction:
    method: Method
    matrices: Dict[str, ConnectivityMatrix]
    similarity: SimilarityVector
    selection: NeighborSelection


def _vector(value) -> np.ndarray:
    if isinstance(value, (Embedding, ResidualEmbedding, FeatureVector)):
        return value.values
    return np.asarray(value, dtype=np.float64).ravel()


def _check_lengths(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape != y.shape:
        raise DimensionMismatchError(f"vectors of length {x.shape[0]} and {y.shape[0]} cannot be compared")


def residual(cbt_embedding: Embedding, embedding: Embedding) -> ResidualEmbedding:
    """Elementwise |z_cbt - z|: how a subject deviates from the template"""
    z_c, z = _vector(cbt_embedding), _vector(embedding)
    _check_lengths(z_c, z)
    return ResidualEmbedding(np.abs(z_c - z), getattr(embedding, "subject_id", ""))


def cosine_similarity(r_i, r_j) -> float:
    """Cosine of the angle between two vectors; 0 when either has zero norm"""
    x, y = _vector(r_i), _vector(r_j)
    _check_lengths(x, y)
    norm = np.linalg.norm(x) * np.linalg.norm(y)
    if norm == 0:
        return 0.0
    return float(np.dot(x, y) / norm)


def dot_similarity(x_i, x_j) -> float:
    x, y = _vector(x_i), _vector(x_j)
    _check_lengths(x, y)
    return float(np.dot(x, y))


def snets_similarity(x_i: FeatureVector, x_j: FeatureVector) -> float:
    return dot_similarity(x_i, x_j)


def esnets_similarity(z_i: Embedding, z_j: Embedding) -> float:
    return dot_similarity(z_i, z_j)


def similarity_vector(method, test_subject_id: str, train_subject_ids: Sequence[str], *,
                      cbt_embedding: Optional[Embedding] = None,
                      test_embedding: Optional[Embedding] = None,
                      train_embeddings: Optional[Sequence[Embedding]] = None,
                      test_network: Optional[ConnectivityMatrix] = None,
                      train_networks: Optional[Sequence[ConnectivityMatrix]] = None,
                      use_cosine: bool = False,
                      rng: Optional[np.random.Generator] = None) -> SimilarityVector:
    """Score every training subject against the test subject"""
    method = Method.parse(method)
    n_train = len(train_subject_ids)
    compare = cosine_similarity if use_cosine else dot_similarity

    if method is Method.RANDOM:
        if rng is None:
            raise ValidationError("random-selection needs a seeded generator")
        scores = rng.random(n_train)
    elif method.needs_embeddings:
        if test_embedding is None or train_embeddings is None:
            raise ValidationError(f"method '{method.value}' needs test and training embeddings")
        if len(train_embeddings) != n_train:
            raise DimensionMismatchError("one training embedding per training subject is required")
        if method is Method.RESNETS:
            if cbt_embedding is None:
                raise ValidationError("method 'resnets' needs the template embedding")
            r_test = residual(cbt_embedding, test_embedding)
            scores = np.array([cosine_similarity(r_test, residual(cbt_embedding, z)) for z in train_embeddings])
        else:
            scores = np.array([compare(test_embedding, z) for z in train_embeddings])
    else:
        if test_network is None or train_networks is None:
            raise ValidationError("method 'snets' needs the test and training baseline networks")
        if len(train_networks) != n_train:
            raise DimensionMismatchError("one training network per training subject is required")
        x_test = vectorize_upper(test_network)
        scores = np.array([compare(x_test, vectorize_upper(x)) for x in train_networks])

    return SimilarityVector(test_subject_id, np.asarray(scores, dtype=np.float64), tuple(train_subject_ids))


def select_neighbors(scores, k: int) -> NeighborSelection:
    """Top-k indices by descending score; exact ties go to the lower index"""
    values = scores.scores if isinstance(scores, SimilarityVector) else np.asarray(scores, dtype=np.float64)
    n = values.shape[0]
    if not 1 <= k <= n:
        raise ValidationError(f"K must lie in 1..{n}, got {k}")
    order = np.lexsort((np.arange(n), -values))[:k]
    return NeighborSelection(tuple(int(i) for i in order), tuple(float(values[i]) for i in order))


def predict_followup(population: Population, selection: NeighborSelection, timepoint: str) -> ConnectivityMatrix:
    """Elementwise mean of the selected subjects' raw networks at `timepoint`"""
    population.require_timepoint(timepoint)
    matrices = [population.subjects[i].at(timepoint) for i in selection.indices]
    return mean_network(matrices)


def predict_trajectory(population: Population, method, k: int, *,
                       test_subject_id: str = "test",
                       cbt_embedding: Optional[Embedding] = None,
                       test_embedding: Optional[Embedding] = None,
                       train_embeddings: Optional[Sequence[Embedding]] = None,
                       test_network: Optional[ConnectivityMatrix] = None,
                       use_cosine: bool = False,
                       rng: Optional[np.random.Generator] = None) -> Prediction:
    """Predict every follow-up network of one test subject.

    Neighbors are selected once, at baseline, and reused for all follow-ups.
    """
    method = Method.parse(method)
    similarity = similarity_vector(
        method, test_subject_id, population.subject_ids,
        cbt_embedding=cbt_embedding,
        test_embedding=test_embedding,
        train_embeddings=train_embeddings,
        test_network=test_network,
        train_networks=population.matrices_at(population.baseline) if method is Method.SNETS else None,
        use_cosine=use_cosine,
        rng=rng,
    )
    selection = select_neighbors(similarity, k)
    logger.debug(f"[{method.value}] K={k} neighbors of '{test_subject_id}': "
                 f"{[population.subject_ids[i] for i in selection.indices]}")
    matrices = {t: predict_followup(population, selection, t) for t in population.follow_ups}
    return Prediction(method, matrices, similarity, selection)


def selected_subjects(population: Population, selection: NeighborSelection) -> List[str]:
    return [population.subject_ids[i] for i in selection.indices]
