"""Figure rendering for the CLI report paths.

Every command that writes delimited output also renders a matching figure
next to it; all functions take data plus a target path and return the path.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_series_figure(path, frames, windowed_counts, windowed_sigmas, feeding) -> str:
    """Windowed count, windowed activity, and feed state over frames."""
    has_sigma = any(s is not None for s in windowed_sigmas)
    n_rows = 3 if has_sigma else 2
    fig, axes = plt.subplots(n_rows, 1, figsize=(9, 2.4 * n_rows), sharex=True)
    axes[0].plot(frames, windowed_counts, color="tab:blue", lw=1.2)
    axes[0].set_ylabel("windowed count")
    if has_sigma:
        sig = [float("nan") if s is None else s for s in windowed_sigmas]
        axes[1].plot(frames, sig, color="tab:orange", lw=1.2)
        axes[1].set_ylabel("windowed activity")
    axes[-1].step(frames, [1 if f else 0 for f in feeding], where="post", color="tab:green")
    axes[-1].set_ylabel("feeding")
    axes[-1].set_yticks([0, 1])
    axes[-1].set_yticklabels(["off", "on"])
    axes[-1].set_xlabel("frame")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def save_loss_figure(path, loss_iterations, losses, label="dataset MSE") -> str:
    """Training loss curve on a log y scale."""
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(loss_iterations, losses, lw=1.2)
    ax.set_xlabel("iteration")
    ax.set_ylabel(label)
    if np.all(np.asarray(losses) > 0):
        ax.set_yscale("log")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def save_eval_figure(path, names, stats, best: int) -> str:
    """Per-model mean error with 95% CI bars; the selected model highlighted."""
    means = [s.mean for s in stats]
    errs = [1.96 * s.stderr for s in stats]
    colors = ["tab:green" if i == best else "tab:blue" for i in range(len(names))]
    fig, ax = plt.subplots(figsize=(max(5, 1.2 * len(names)), 4))
    ax.bar(range(len(names)), means, yerr=errs, capsize=4, color=colors)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names)
    ax.set_ylabel("mean error (px)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def save_scene_figure(path, scenario, line_points=None) -> str:
    """Top-down view of the synthetic scene: tracks, ripple boxes, count line."""
    fig, ax = plt.subplots(figsize=(8, 5))
    xs, ys = [], []
    for record in scenario.records:
        for box in record.nutriments:
            xs.append(box.cx)
            ys.append(box.cy)
    ax.scatter(xs, ys, s=3, color="tab:blue", alpha=0.4, label="nutriments")
    last = scenario.records[-1]
    for box in last.ripples:
        ax.add_patch(
            plt.Rectangle(
                (box.cx - box.w / 2, box.cy - box.h / 2),
                box.w,
                box.h,
                fill=False,
                edgecolor="tab:red",
                lw=1.5,
            )
        )
    if line_points is not None:
        (x1, y1), (x2, y2) = line_points
        ax.axline((x1, y1), (x2, y2), color="tab:green", lw=1.2, label="count line")
    ax.invert_yaxis()
    ax.set_xlabel("x (px)")
    ax.set_ylabel("y (px)")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def save_activity_figure(path, frames, sigmas, windowed_sigmas) -> str:
    """Raw and windowed activity index over frames."""
    fig, ax = plt.subplots(figsize=(9, 4))
    ax.plot(frames, sigmas, lw=0.8, alpha=0.6, label="sigma")
    ax.plot(frames, windowed_sigmas, lw=1.4, label="windowed sigma")
    ax.set_xlabel("frame")
    ax.set_ylabel("activity")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)
