"""Static figures for the reproduction reports (written next to the CSVs)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

CHANNELS = (
    ("mse_coords", "coordinates", "o-"),
    ("mse_forces", "forces", "s-"),
    ("mse_freqs", "frequencies", "^-"),
)

plt.rcParams.update({
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (4.0, 3.0),
    "savefig.dpi": 150,
})


def plot_mse_vs_samples(rows: list[dict], path: str | Path, title: str = "") -> Path:
    sizes = [r["size"] for r in rows]
    fig, ax = plt.subplots()
    for key, label, style in CHANNELS:
        ax.semilogy(sizes, [max(r[key], 1e-300) for r in rows], style, label=label, ms=4)
    ax.set_xlabel("number of samples")
    ax.set_ylabel("average test MSE (normalized)")
    ax.set_xticks(sizes)
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", lw=0.3, alpha=0.6)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)


def plot_runtime(rows: list[dict], path: str | Path, title: str = "") -> Path:
    sizes = [r["size"] for r in rows]
    fig, ax = plt.subplots()
    ax.plot(sizes, [r["train_s"] for r in rows], "o-", ms=4, label="train")
    ax.plot(sizes, [r["test_s"] for r in rows], "s-", ms=4, label="test")
    ax.set_xlabel("number of samples")
    ax.set_ylabel("mean runtime per trial [s]")
    ax.set_xticks(sizes)
    if title:
        ax.set_title(title)
    ax.grid(True, lw=0.3, alpha=0.6)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)
