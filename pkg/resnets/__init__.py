"""Residual-embedding similarity networks for brain network evolution prediction."""
from .embedding import Embedding, TrainConfig, train_embedding
from .errors import ResnetsError
from .evaluation import EvalConfig, EvalReport, loocv
from .networks import ConnectivityMatrix, Population, SubjectTrajectory, build_mbn, mad, mse
from .selection import Method, predict_trajectory
from .synthetic import SynthConfig, generate
from .template import estimate_cbt

__version__ = "0.1.0"

__all__ = [
    "ConnectivityMatrix",
    "Embedding",
    "EvalConfig",
    "EvalReport",
    "Method",
    "Population",
    "ResnetsError",
    "SubjectTrajectory",
    "SynthConfig",
    "TrainConfig",
    "build_mbn",
    "estimate_cbt",
    "generate",
    "loocv",
    "mad",
    "mse",
    "predict_trajectory",
    "train_embedding",
]
