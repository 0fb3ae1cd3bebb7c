"""Figure rendering for benchmark reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .bench import PRECISION_THRESHOLDS, SUCCESS_THRESHOLDS, EvalCurves


def render_precision_figure(curves: EvalCurves, path: str, title: str = "Precision plot") -> None:
    fig, ax = plt.subplots(figsize=(6, 5))
    ax.plot(
        PRECISION_THRESHOLDS,
        curves.precision,
        "b-",
        label=f"precision@20 = {curves.precision_at_20:.3f}",
    )
    ax.set_xlabel("center error threshold [px]")
    ax.set_ylabel("fraction of frames")
    ax.set_xlim(0, 50)
    ax.set_ylim(0.0, 1.02)
    ax.set_title(title)
    ax.legend(loc="lower right")
    ax.grid(alpha=0.3)
    fig.savefig(path, dpi=110)
    plt.close(fig)


def render_success_figure(curves: EvalCurves, path: str, title: str = "Success plot") -> None:
    fig, ax = plt.subplots(figsize=(6, 5))
    ax.plot(
        SUCCESS_THRESHOLDS,
        curves.success,
        "g-",
        label=f"AUC = {curves.success_auc:.3f}",
    )
    ax.set_xlabel("overlap threshold")
    ax.set_ylabel("fraction of frames")
    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(0.0, 1.02)
    ax.set_title(title)
    ax.legend(loc="lower left")
    ax.grid(alpha=0.3)
    fig.savefig(path, dpi=110)
    plt.close(fig)
