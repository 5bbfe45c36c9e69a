"""Leave-one-out evaluation of the neighbor-selection methods.

For every held-out subject the fold's template is re-estimated from the
remaining subjects' baselines and embedded, and each (method, K) predicts the
held-out subject's follow-up networks, scored with MAD and MSE against the
ground truth. A subject's embedding depends on its own baseline network and
the training config only, so it is trained once and shared by every fold.
"""
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union
import logging
import threading
import time

import numpy as np
import pandas as pd
from tqdm.auto import tqdm

from .embedding import Embedding, TrainConfig, train_embedding
from .errors import ConfigError, FoldError, ValidationError
from .networks import ConnectivityMatrix, Population, SubjectTrajectory, mad, mse
from .seeding import derive_seed
from .selection import Method, predict_trajectory
from .storage import ensure_writable
from .template import estimate_cbt

logger = logging.getLogger(__name__)

CBT_ID = "__cbt__"
METRICS = ("mad", "mse")
CELL_COLUMNS = ["method", "K", "timepoint", "subject", "mad", "mse"]
AGGREGATE_COLUMNS = ["method", "K", "timepoint", "metric", "mean", "std"]


@dataclass
class EvalConfig:
    """Configuration for leave-one-out evaluation"""
    methods: Tuple[Method, ...] = (Method.RESNETS, Method.ESNETS, Method.SNETS)
    k_values: Tuple[int, ...] = (2, 3, 4)
    train_config: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 42
    workers: int = 1
    use_cosine: bool = False

    def __post_init__(self):
        self.methods = tuple(Method.parse(m) for m in self.methods)
        self.k_values = tuple(int(k) for k in self.k_values)

    def validate(self, n_training: Optional[int] = None):
        """Validate configuration parameters, optionally against the fold training size"""
        if not self.methods:
            raise ConfigError("at least one method is required")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("methods must be distinct")
        if not self.k_values:
            raise ConfigError("at least one K value is required")
        if any(k < 1 for k in self.k_values):
            raise ConfigError(f"K values must be positive, got {list(self.k_values)}")
        if n_training is not None and max(self.k_values) >= n_training:
            raise ConfigError(
                f"K={max(self.k_values)} must be smaller than the fold training size {n_training}"
            )
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        self.train_config.validate()

    def to_dict(self) -> dict:
        return {
            "methods": [m.value for m in self.methods],
            "k_values": list(self.k_values),
            "train_config": self.train_config.to_dict(),
            "seed": self.seed,
            "use_cosine": self.use_cosine,
        }


@dataclass(frozen=True)
class FoldInputs:
    """Everything one fold may see, built by exclusion before any computation"""
    fold: int
    test_subject: SubjectTrajectory
    training: Population


@dataclass
class EvalReport:
    config: dict
    cells: pd.DataFrame
    aggregates: pd.DataFrame
    wall_clock_seconds: float = 0.0

    def to_payload(self) -> dict:
        """JSON-ready report; wall-clock time is kept out so payloads are reproducible"""
        return {
            "config": self.config,
            "cells": _records(self.cells, CELL_COLUMNS),
            "aggregates": _records(self.aggregates, AGGREGATE_COLUMNS),
        }


def _records(frame: pd.DataFrame, columns: Sequence[str]) -> List[dict]:
    records = []
    for row in frame[list(columns)].itertuples(index=False):
        record = {}
        for name, value in zip(columns, row):
            if isinstance(value, (np.integer, int)) and not isinstance(value, bool):
                value = int(value)
            elif isinstance(value, (np.floating, float)):
                value = float(value)
            record[name] = value
        records.append(record)
    return records


def build_fold(population: Population, fold: int) -> FoldInputs:
    test_id = population.subject_ids[fold]
    training, test_subject = population.without(test_id)
    return FoldInputs(fold, test_subject, training)


class EmbeddingCache:
    """Baseline embeddings by subject id, each trained once on first request.

    Safe to share between fold threads: a subject asked for by several folds
    at once is trained by one of them while the others wait.
    """

    def __init__(self, config: TrainConfig):
        self.config = config
        self._embeddings: Dict[str, Embedding] = {}
        self._locks: Dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._guard = threading.Lock()

    def __len__(self) -> int:
        return len(self._embeddings)

    def get(self, subject_id: str, matrix: ConnectivityMatrix) -> Embedding:
        with self._guard:
            lock = self._locks[subject_id]
        with lock:
            if subject_id not in self._embeddings:
                self._embeddings[subject_id] = train_embedding(matrix, self.config, subject_id)
            return self._embeddings[subject_id]


def run_fold(population: Population, fold: int, config: EvalConfig,
             cache: Optional[EmbeddingCache] = None) -> List[dict]:
    """Evaluate every (method, K) on one held-out subject"""
    inputs = build_fold(population, fold)
    training, test = inputs.training, inputs.test_subject
    baseline = training.baseline
    train_config = replace(config.train_config, seed=config.seed)

    cbt = estimate_cbt(training, baseline)
    cbt_embedding = test_embedding = train_embeddings = None
    if any(m.needs_embeddings for m in config.methods):
        if cache is None:
            cache = EmbeddingCache(train_config)
        # rotated so concurrent folds start on different subjects
        order = population.subjects[fold:] + population.subjects[:fold]
        embedded = {s.subject_id: cache.get(s.subject_id, s.at(baseline)) for s in order}
        train_embeddings = [embedded[s.subject_id] for s in training.subjects]
        test_embedding = embedded[test.subject_id]
        cbt_embedding = train_embedding(cbt.template, train_config, CBT_ID)

    cells = []
    for method in config.methods:
        for k in config.k_values:
            rng = None
            if method is Method.RANDOM:
                rng = np.random.default_rng(derive_seed(config.seed, method.value, fold, k))
            prediction = predict_trajectory(
                training, method, k,
                test_subject_id=test.subject_id,
                cbt_embedding=cbt_embedding,
                test_embedding=test_embedding,
                train_embeddings=train_embeddings,
                test_network=test.at(baseline),
                use_cosine=config.use_cosine,
                rng=rng,
            )
            for timepoint, predicted in prediction.matrices.items():
                truth = test.at(timepoint)
                cells.append({
                    "method": method.value,
                    "K": k,
                    "timepoint": timepoint,
                    "subject": test.subject_id,
                    "mad": mad(predicted, truth),
                    "mse": mse(predicted, truth),
                })
    return cells


def aggregate(cells: pd.DataFrame) -> pd.DataFrame:
    """Mean and population standard deviation per (method, K, timepoint, metric)"""
    rows = []
    for (method, k, timepoint), group in cells.groupby(["method", "K", "timepoint"], sort=False):
        for metric in METRICS:
            values = group[metric].to_numpy()
            rows.append({
                "method": method,
                "K": int(k),
                "timepoint": timepoint,
                "metric": metric,
                "mean": float(np.mean(values)),
                "std": float(np.std(values)),
            })
    return pd.DataFrame(rows, columns=AGGREGATE_COLUMNS)


def loocv(population: Population, config: Optional[EvalConfig] = None, progress: bool = True) -> EvalReport:
    """Leave-one-out cross-validation over every subject of `population`"""
    config = config or EvalConfig()
    if population.n_subjects < 3:
        raise ValidationError(f"leave-one-out evaluation needs at least 3 subjects, got {population.n_subjects}")
    if len(population.timepoints) < 2:
        raise ValidationError("leave-one-out evaluation needs a baseline and at least one follow-up timepoint")
    config.validate(population.n_subjects - 1)

    logger.info(
        f"LOOCV over {population.n_subjects} subjects: methods={[m.value for m in config.methods]} "
        f"K={list(config.k_values)} seed={config.seed} workers={config.workers}"
    )
    start = time.perf_counter()
    cache = EmbeddingCache(replace(config.train_config, seed=config.seed))

    def evaluate_fold(fold: int) -> List[dict]:
        try:
            return run_fold(population, fold, config, cache)
        except Exception as e:
            subject_id = population.subject_ids[fold]
            logger.error(f"Fold {fold} (subject '{subject_id}') failed: {e}")
            raise FoldError(fold, subject_id, e) from e

    folds = range(population.n_subjects)
    bar = dict(total=population.n_subjects, desc="LOOCV folds", disable=not progress)
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(tqdm(pool.map(evaluate_fold, folds), **bar))
    else:
        results = [evaluate_fold(fold) for fold in tqdm(folds, **bar)]

    cells = pd.DataFrame([cell for fold_cells in results for cell in fold_cells], columns=CELL_COLUMNS)
    report = EvalReport(config.to_dict(), cells, aggregate(cells), time.perf_counter() - start)
    logger.info(f"LOOCV finished in {report.wall_clock_seconds:.1f}s")
    return report


def summarize(report: EvalReport) -> pd.DataFrame:
    """Aggregated means as a (method) x (metric, K, timepoint) table"""
    return report.aggregates.pivot_table(
        index="method", columns=["metric", "K", "timepoint"], values="mean", sort=False
    )


def emit_plot_data(report: EvalReport, path: Union[str, Path], force: bool = False) -> Path:
    """One CSV row per aggregate cell: method, K, timepoint, metric, mean, std"""
    path = ensure_writable(path, force)
    report.aggregates[AGGREGATE_COLUMNS].to_csv(path, index=False)
    return path


def mean_by_method(report: EvalReport, metric: str = "mad") -> Dict[Tuple[str, int], float]:
    """Mean of `metric` per (method, K), pooled over follow-up timepoints"""
    frame = report.cells.groupby(["method", "K"], sort=False)[metric].mean()
    return {(method, int(k)): float(v) for (method, k), v in frame.items()}
