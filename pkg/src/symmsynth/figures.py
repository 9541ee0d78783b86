"""Matplotlib renderings of the tabular curve outputs.

Every plotting helper takes already-assembled series and writes a PNG next
to the delimited file the numbers came from.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def plot_loss_curve(iters, losses, path, title="Training loss"):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(iters, losses, lw=1.0)
    ax.set_xlabel("iteration")
    ax.set_ylabel("loss")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_recall_curves(series, path, title="Recall@1"):
    """series: list of (label, iters, recalls)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, iters, recalls in series:
        ax.plot(iters, recalls, marker="o", ms=3, lw=1.0, label=str(label))
    ax.set_xlabel("iteration")
    ax.set_ylabel("Recall@1")
    ax.set_ylim(0.0, 1.0)
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_ratio_curve(iters, ratios, path, title="Synthetic selection ratio"):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(iters, ratios, lw=1.0)
    ax.set_xlabel("iteration")
    ax.set_ylabel("synthetic fraction of mined endpoints")
    ax.set_ylim(0.0, 1.0)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
