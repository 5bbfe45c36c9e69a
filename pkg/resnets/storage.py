"""File I/O: matrix CSVs, population manifests, embeddings and JSON results.

Matrix CSVs have no header: n_rois lines of n_rois comma-separated floats,
written with 17 significant digits so a save/load round trip is bit-exact.
"""
from pathlib import Path
from typing import Any, Dict, Union
import json
import logging

import numpy as np

from .embedding import Embedding
from .errors import (
    ManifestError,
    MissingFileError,
    OverwriteRefusedError,
    ParseError,
    StorageError,
    ValidationError,
)
from .networks import ConnectivityMatrix, Population, SubjectTrajectory

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
FLOAT_FORMAT = "%.17g"


def ensure_writable(path: PathLike, force: bool = False) -> Path:
    """Create the parent directory; refuse to clobber an existing file unless forced"""
    path = Path(path)
    if path.exists() and not force:
        raise OverwriteRefusedError(f"{path} already exists (use --force to overwrite)")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise StorageError(f"cannot create directory {path.parent}: {e}") from e
    return path


def _read_text(path: Path) -> str:
    if not path.is_file():
        raise MissingFileError(f"file not found: {path}")
    try:
        return path.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise ParseError(f"{path}: not UTF-8 text ({e.reason} at byte {e.start})") from e
    except OSError as e:
        raise StorageError(f"cannot read {path}: {e}") from e


def _write_text(path: PathLike, text: str, force: bool) -> Path:
    path = ensure_writable(path, force)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise StorageError(f"cannot write {path}: {e}") from e
    return path


def load_matrix(path: PathLike) -> ConnectivityMatrix:
    path = Path(path)
    text = _read_text(path)
    rows = [line for line in text.splitlines() if line.strip()]
    if not rows:
        raise ParseError(f"{path}: empty matrix file")
    try:
        values = [[float(cell) for cell in line.split(",")] for line in rows]
    except ValueError as e:
        raise ParseError(f"{path}: {e}") from e
    n = len(values)
    for i, row in enumerate(values):
        if len(row) != n:
            raise ParseError(f"{path}: row {i} has {len(row)} values, expected {n} for a square matrix")
    try:
        return ConnectivityMatrix.from_array(np.array(values))
    except ValidationError as e:
        raise type(e)(f"{path}: {e}") from e


def save_matrix(matrix: ConnectivityMatrix, path: PathLike, force: bool = False) -> Path:
    return save_array(matrix.weights, path, force)


def save_array(array: np.ndarray, path: PathLike, force: bool = False) -> Path:
    lines = [",".join(FLOAT_FORMAT % v for v in row) for row in np.atleast_2d(array)]
    return _write_text(path, "\n".join(lines) + "\n", force)


def save_embedding(embedding: Embedding, path: PathLike, force: bool = False) -> Path:
    return save_array(embedding.values[None, :], path, force)


def load_embedding(path: PathLike, subject_id: str = "") -> Embedding:
    path = Path(path)
    text = _read_text(path).strip()
    try:
        values = [float(cell) for cell in text.split(",")]
    except ValueError as e:
        raise ParseError(f"{path}: {e}") from e
    return Embedding(np.array(values), subject_id)


def load_json(path: PathLike) -> Any:
    path = Path(path)
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: invalid JSON ({e})") from e


def save_json(payload: Any, path: PathLike, force: bool = False) -> Path:
    return _write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n", force)


def load_population(manifest_path: PathLike) -> Population:
    """Load every network a manifest references, resolving paths relative to it"""
    manifest_path = Path(manifest_path)
    manifest = load_json(manifest_path)
    try:
        n_rois = int(manifest["n_rois"])
        timepoints = [str(t) for t in manifest["timepoints"]]
        entries = manifest["subjects"]
    except (KeyError, TypeError, ValueError) as e:
        raise ManifestError(f"{manifest_path}: malformed manifest ({e})") from e

    base = manifest_path.parent
    subjects = []
    for entry in entries:
        try:
            subject_id = str(entry["id"])
            files: Dict[str, str] = entry["matrices"]
        except (KeyError, TypeError) as e:
            raise ManifestError(f"{manifest_path}: malformed subject entry ({e})") from e
        missing = [t for t in timepoints if t not in files]
        if missing:
            raise ManifestError(f"{manifest_path}: subject '{subject_id}' has no file for timepoints {missing}")
        matrices = {}
        for t in timepoints:
            try:
                matrices[t] = load_matrix(base / files[t])
            except MissingFileError as e:
                raise ManifestError(f"{manifest_path}: subject '{subject_id}' at '{t}': {e}") from e
            if matrices[t].n_rois != n_rois:
                raise ManifestError(
                    f"{manifest_path}: subject '{subject_id}' at '{t}' has {matrices[t].n_rois} ROIs, "
                    f"manifest declares {n_rois}"
                )
        subjects.append(SubjectTrajectory(subject_id, matrices))

    logger.info(f"Loaded {len(subjects)} subjects x {len(timepoints)} timepoints from {manifest_path}")
    return Population(tuple(subjects), tuple(timepoints), n_rois)


def write_population(population: Population, out_dir: PathLike, force: bool = False,
                     manifest_name: str = "manifest.json") -> Path:
    """Write one CSV per (subject, timepoint) plus a manifest with relative paths"""
    out_dir = Path(out_dir)
    entries = []
    for subject in population.subjects:
        files = {}
        for t, matrix in subject.matrices.items():
            relative = Path("networks") / f"{subject.subject_id}_{t}.csv"
            save_matrix(matrix, out_dir / relative, force)
            files[t] = relative.as_posix()
        entries.append({"id": subject.subject_id, "matrices": files})
    manifest = {"n_rois": population.n_rois, "timepoints": list(population.timepoints), "subjects": entries}
    return save_json(manifest, out_dir / manifest_name, force)


def save_report(report, path: PathLike, force: bool = False) -> Path:
    """Write an evaluation report's payload (no timestamps) as JSON"""
    return save_json(report.to_payload(), path, force)


def load_report(path: PathLike) -> Dict[str, Any]:
    payload = load_json(path)
    for key in ("config", "cells", "aggregates"):
        if key not in payload:
            raise ParseError(f"{path}: report is missing '{key}'")
    return payload
