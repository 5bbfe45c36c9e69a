"""Shared fixtures: small populations and fast training configurations."""
import numpy as np
import pytest

from resnets.embedding import TrainConfig
from resnets.networks import ConnectivityMatrix, Population, SubjectTrajectory, build_mbn
from resnets.synthetic import SynthConfig, generate


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def make_matrix(rng):
    """Random morphological network over `n_rois` ROIs"""
    def factory(n_rois: int = 6) -> ConnectivityMatrix:
        return build_mbn(rng.uniform(1.0, 5.0, size=n_rois))
    return factory


@pytest.fixture
def make_population():
    """Population from nested lists: values[s][t] is a matrix array"""
    def factory(values, timepoints=None) -> Population:
        timepoints = timepoints or [f"t{g}" for g in range(len(values[0]))]
        subjects = [
            SubjectTrajectory(f"s{s}", {t: ConnectivityMatrix(np.asarray(m, dtype=float))
                                        for t, m in zip(timepoints, matrices)})
            for s, matrices in enumerate(values)
        ]
        return Population.from_subjects(subjects)
    return factory


@pytest.fixture
def edge_population(make_population):
    """2-ROI population whose single edge takes the given values at baseline"""
    def factory(edge_values, follow_up=None):
        follow_up = follow_up or [2 * v for v in edge_values]
        return make_population([
            [[[0, v], [v, 0]], [[0, w], [w, 0]]] for v, w in zip(edge_values, follow_up)
        ])
    return factory


@pytest.fixture(scope="session")
def small_synth():
    return generate(SynthConfig(
        n_subjects=8, n_rois=6, n_clusters=2, n_timepoints=2,
        within_cluster_noise=0.05, between_cluster_separation=1.0, seed=3,
    ))


@pytest.fixture(scope="session")
def small_population(small_synth):
    return small_synth.population


@pytest.fixture(scope="session")
def identical_population():
    """Six subjects sharing the same network at each of two timepoints"""
    thickness = np.random.default_rng(99).uniform(1.0, 5.0, size=5)
    baseline, follow_up = build_mbn(thickness), build_mbn(thickness * 1.3 + 0.2)
    subjects = [SubjectTrajectory(f"s{s}", {"t0": baseline, "t1": follow_up}) for s in range(6)]
    return Population.from_subjects(subjects)


@pytest.fixture
def fast_config():
    return TrainConfig(iterations=3, h=4, seed=7)
