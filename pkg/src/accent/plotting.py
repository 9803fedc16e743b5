"""Figures written next to evaluation reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "font.family": "serif",
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.bbox": "tight",
    "savefig.dpi": 150,
}


def size(scale=1.0, width_in=5.0):
    golden = (np.sqrt(5.0) - 1.0) / 2.0
    return width_in * scale, width_in * scale * golden


def _save(fig, path):
    fig.savefig(path)
    plt.close(fig)
    return path


def correlation_scatter(metric, human, path, pearson_r=None, spearman_r=None, label="metric score"):
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=size(0.8))
        ax.scatter(human, metric, s=10, alpha=0.6, color="tab:blue", edgecolors="none")
        ax.set_xlabel("mean human score")
        ax.set_ylabel(label)
        if pearson_r is not None and spearman_r is not None:
            ax.set_title(f"Pearson {pearson_r:.3f} / Spearman {spearman_r:.3f}")
        return _save(fig, path)


def system_ranking_bars(ranking, path):
    names = [name for name, _ in ranking]
    means = [m for _, m in ranking]
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=size(0.8))
        ax.bar(range(len(names)), means, color="tab:gray")
        ax.set_xticks(range(len(names)))
        ax.set_xticklabels(names, rotation=30, ha="right")
        ax.set_ylabel("mean score")
        ax.set_ylim(0, 1)
        return _save(fig, path)


def roc_curve(scores, labels, path, auc=None):
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=int)
    thresholds = np.unique(s)[::-1]
    n_pos, n_neg = max(int(y.sum()), 1), max(int((1 - y).sum()), 1)
    tpr = [0.0] + [float(((s >= t) & (y == 1)).sum()) / n_pos for t in thresholds]
    fpr = [0.0] + [float(((s >= t) & (y == 0)).sum()) / n_neg for t in thresholds]
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=size(0.6, 5.0 / 0.618))
        ax.plot(fpr, tpr, color="tab:red", lw=1.2)
        ax.plot([0, 1], [0, 1], ls=":", color="0.5", lw=0.8)
        ax.set_xlabel("false positive rate")
        ax.set_ylabel("true positive rate")
        if auc is not None:
            ax.set_title(f"AUC {auc:.3f}")
        ax.set_aspect("equal")
        return _save(fig, path)


def metric_bars(metrics, path):
    keys = list(metrics)
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=size(0.8))
        ax.bar(keys, [metrics[k] for k in keys], color="tab:green")
        ax.set_ylim(0, 1)
        for i, k in enumerate(keys):
            ax.text(i, metrics[k] + 0.02, f"{metrics[k]:.3f}", ha="center", fontsize=7)
        return _save(fig, path)
