"""Figures for trial campaigns, written straight to files with the Agg backend."""
from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .superop import model_table  # noqa: E402

TARGET_STYLE = {"ising": ("k", "--"), "tricritical-ising": ("tab:red", ":"), "potts3": ("tab:green", "-.")}


def _target_lines(ax, models, top):
    for m in models:
        color, ls = TARGET_STYLE.get(m, ("0.5", ":"))
        for j, d in enumerate(x for x in model_table(m).dimensions if float(x) <= top):
            ax.axhline(float(d), color=color, ls=ls, lw=0.8, label=m if j == 0 else None)


def plot_campaign(summary, records, path, indices=(1, 2), ymax=4.0):
    """Scatter of the first nontrivial dimensions against trial index.

    One panel per index, with the CFT target dimensions as horizontal lines
    and the envelope shaded.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ok = [r for r in sorted(records, key=lambda r: r.trial_id) if not r.failed]
    models = [c["model"] for c in summary.containment]
    models = list(dict.fromkeys(models))
    fig, axes = plt.subplots(1, len(indices), figsize=(5 * len(indices), 3.6), sharey=True, squeeze=False)
    for ax, i in zip(axes[0], indices):
        xs = [r.trial_id for r in ok if i < len(r.dimensions) and math.isfinite(r.dimensions[i])]
        ys = [r.dimensions[i] for r in ok if i < len(r.dimensions) and math.isfinite(r.dimensions[i])]
        ax.scatter(xs, ys, s=3, alpha=0.5, color="tab:blue", rasterized=True)
        env = summary.envelopes[i] if i < len(summary.envelopes) else None
        if env and env["n_finite"]:
            ax.axhspan(env["min"], min(env["max"], ymax), color="tab:blue", alpha=0.07)
        _target_lines(ax, models, ymax)
        ax.set_ylim(0, ymax)
        ax.set_xlabel("trial")
        ax.set_title(f"$\\Delta_{i}$")
    axes[0][0].set_ylabel("scaling dimension")
    axes[0][-1].legend(loc="upper right", fontsize=7, frameon=False)
    fig.suptitle(f"{summary.decomposition}: {summary.trials} trials ({summary.n_failed} failed)", fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_comparison(summaries, path, indices=(1, 2)):
    """Min-max bars of each dimension index for several decompositions side by side."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    width = 0.8 / max(len(indices), 1)
    for j, i in enumerate(indices):
        for n, s in enumerate(summaries):
            env = s.envelopes[i]
            if not env["n_finite"]:
                continue
            x = n + (j - (len(indices) - 1) / 2) * width
            ax.vlines(x, env["min"], env["max"], lw=6, color=f"C{j}", label=f"$\\Delta_{i}$" if n == 0 else None)
            ax.plot([x], [env["mean"]], "w_", ms=8)
    _target_lines(ax, ["ising"], 10.0)
    ax.set_yscale("log")
    ax.set_xticks(range(len(summaries)))
    ax.set_xticklabels([s.decomposition for s in summaries])
    ax.set_ylabel("scaling dimension envelope")
    ax.legend(fontsize=7, frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
