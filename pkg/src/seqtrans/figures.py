"""SVG figure rendering for the report commands.

Figures are written with a fixed hash salt and without date metadata so a
rerun with the same config produces identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "seqtrans"

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path: str | Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def save_param_scatter(x, y, xlabel: str, ylabel: str, title: str,
                       path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    ax.scatter(np.asarray(x), np.asarray(y), s=12, alpha=0.5, edgecolors="none")
    ax.axhline(0.0, color="0.8", lw=0.8, zorder=0)
    ax.axvline(1.0 if xlabel.endswith("1") else 0.0, color="0.8", lw=0.8, zorder=0)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)


def save_signal_panel(original: np.ndarray, transformed: np.ndarray,
                      channel_names: list[str], title: str,
                      path: str | Path) -> None:
    """Per-channel before/after line plots for one example."""
    d = original.shape[0]
    fig, axes = plt.subplots(d, 1, figsize=(6.0, 1.6 * d + 0.8),
                             sharex=True, squeeze=False)
    for k in range(d):
        ax = axes[k][0]
        ax.plot(original[k], lw=1.2, label="original")
        ax.plot(transformed[k], lw=1.2, label="transformed")
        ax.set_ylabel(channel_names[k], fontsize=8)
    axes[0][0].legend(loc="upper right", fontsize=8)
    axes[-1][0].set_xlabel("time step")
    fig.suptitle(title)
    fig.tight_layout()
    _save(fig, path)
