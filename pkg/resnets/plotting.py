"""Figures for evaluation reports and per-subject prediction errors."""
from pathlib import Path
from typing import Optional, Union
import logging

import matplotlib
import matplotlib.pyplot as plt
import numpy as np
import seaborn as sns

from .evaluation import METRICS, EvalReport
from .storage import ensure_writable

# files only, never a window
matplotlib.use("Agg")

logger = logging.getLogger(__name__)

METRIC_LABELS = {"mad": "Mean absolute deviance", "mse": "Mean squared error"}


def plot_comparison(report: EvalReport, path: Union[str, Path], force: bool = False) -> Path:
    """Bar chart of per-subject MAD and MSE by K, one bar per method"""
    path = ensure_writable(path, force)
    cells = report.cells
    sns.set(style="whitegrid")

    fig, axes = plt.subplots(1, len(METRICS), figsize=(12, 5))
    for ax, metric in zip(axes, METRICS):
        sns.barplot(data=cells, x="K", y=metric, hue="method", errorbar="sd", ax=ax)
        ax.set_title(f"{METRIC_LABELS[metric]} by K")
        ax.set_xlabel("K (selected neighbors)")
        ax.set_ylabel(metric.upper())
        ax.legend(title="Method")

    timepoints = ", ".join(sorted(cells["timepoint"].unique()))
    fig.suptitle(f"Follow-up prediction error ({timepoints})", fontsize=14)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    logger.info(f"Comparison chart written to {path}")
    return path


def plot_error_map(error_map: np.ndarray, path: Union[str, Path], title: Optional[str] = None,
                   force: bool = False) -> Path:
    """Heatmap of the per-edge absolute error of one predicted network"""
    path = ensure_writable(path, force)
    error_map = np.asarray(error_map, dtype=np.float64)
    sns.set(style="white")

    fig, ax = plt.subplots(figsize=(7, 6))
    sns.heatmap(error_map, cmap="viridis", square=True, xticklabels=False, yticklabels=False,
                cbar_kws={"label": "|predicted - actual|"}, ax=ax)
    ax.set_xlabel("ROI")
    ax.set_ylabel("ROI")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    logger.info(f"Error map written to {path}")
    return path
