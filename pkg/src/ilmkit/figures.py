"""Matplotlib figures written next to the CSV outputs of a run."""
import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STATE_STYLE = {
    0: dict(marker="o", facecolors="none", edgecolors="0.3", label="susceptible"),
    1: dict(marker="o", facecolors="tab:red", edgecolors="tab:red", label="infectious"),
    2: dict(marker="x", c="tab:blue", label="removed"),
}

RC = {
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.labelsize": 11,
    "legend.frameon": False,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_curves(table, path, title=None):
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        for name in table.names:
            ax.step(table.t, table[name], where="post", label=name)
        ax.set_xlabel("time")
        ax.set_ylabel("individuals")
        if title:
            ax.set_title(title)
        ax.legend()
        return _save(fig, path)


def plot_snapshots(snapshots, path, max_panels=9):
    """Grid of spatial frames; evenly spaced times when there are more than ``max_panels``."""
    if len(snapshots) > max_panels:
        idx = np.linspace(0, len(snapshots) - 1, max_panels).round().astype(int)
        snapshots = [snapshots[k] for k in idx]
    cols = min(3, len(snapshots))
    rows = math.ceil(len(snapshots) / cols)
    with plt.rc_context(RC):
        fig, axes = plt.subplots(rows, cols, figsize=(3.2 * cols, 3.2 * rows), squeeze=False)
        for ax in axes.flat[len(snapshots):]:
            ax.set_visible(False)
        for ax, snap in zip(axes.flat, snapshots):
            for code, style in STATE_STYLE.items():
                sel = snap.state == code
                if sel.any():
                    ax.scatter(snap.coords[sel, 0], snap.coords[sel, 1], s=14, **style)
            ax.set_title(f"t = {snap.t}", fontsize=10)
            ax.set_aspect("equal", adjustable="datalim")
            ax.tick_params(labelsize=8)
        handles, labels = axes.flat[0].get_legend_handles_labels()
        if handles:
            fig.legend(handles, labels, loc="lower center", ncol=3, fontsize=9)
            fig.subplots_adjust(bottom=0.12)
        return _save(fig, path)


def plot_trace(chain, path, start=1):
    free = np.flatnonzero(chain.free)
    it = np.arange(start, chain.niter + 1)
    with plt.rc_context(RC):
        fig, axes = plt.subplots(len(free) + 1, 1, figsize=(7, 1.8 * (len(free) + 1)), sharex=True)
        for ax, k in zip(axes, free):
            ax.plot(it, chain.samples[start - 1:, k], lw=0.5)
            ax.set_ylabel(chain.labels[k])
        axes[-1].plot(it, chain.loglik[start - 1:], lw=0.5, color="0.3")
        axes[-1].set_ylabel("loglik")
        axes[-1].set_xlabel("iteration")
        return _save(fig, path)


def plot_prediction(bands, path):
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.fill_between(bands.t, bands.lower, bands.upper, step="mid", alpha=0.3, label="95% band")
        ax.plot(bands.t, bands.median, drawstyle="steps-mid", label="median")
        ax.plot(bands.t, bands.observed, "ko", ms=3, label="observed")
        ax.axvline(bands.t_star, color="0.5", ls="--", lw=1)
        ax.set_xlabel("time")
        ax.set_ylabel("new infections")
        ax.legend()
        return _save(fig, path)
