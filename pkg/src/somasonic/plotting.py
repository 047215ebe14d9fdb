"""Figure rendering for the CLI report paths.

Every machine-readable output (CSV) gets a sibling PNG; all figures go
through the same save helper so styling stays uniform.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

plt.rcParams.update(
    {
        "figure.figsize": (7.0, 4.2),
        "figure.dpi": 110,
        "axes.grid": True,
        "grid.alpha": 0.3,
        "font.size": 10,
        "axes.titlesize": 11,
    }
)


def save_figure(fig, path) -> None:
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)


def spectrogram_figure(values: np.ndarray, sample_rate: int, hop: int, title: str = ""):
    """Grayscale mel spectrogram image, time on x, band index on y."""
    fig, ax = plt.subplots()
    extent = (0.0, values.shape[1] * hop / sample_rate, 0, values.shape[0])
    vmax = float(values.max())
    im = ax.imshow(
        values,
        origin="lower",
        aspect="auto",
        cmap="gray",
        extent=extent,
        vmin=vmax - 90.0,
        vmax=vmax,
    )
    ax.set_xlabel("time (s)")
    ax.set_ylabel("mel band")
    ax.grid(False)
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax, label="dB")
    return fig


def modes_figure(freq_table: dict[str, np.ndarray], title: str = "retained modes"):
    """Stem-style plot of retained frequencies per structure."""
    fig, ax = plt.subplots()
    for row, (sid, freqs) in enumerate(freq_table.items()):
        ax.scatter(freqs, np.full(len(freqs), row), s=12, label=sid)
    ax.set_yticks(range(len(freq_table)), list(freq_table.keys()))
    ax.set_xscale("log")
    ax.set_xlabel("frequency (Hz)")
    ax.set_title(title)
    return fig


def eval_summary_figure(summaries) -> "matplotlib.figure.Figure":
    """Mean +- sd bars of dice and task time per condition."""
    fig, (ax_d, ax_t) = plt.subplots(1, 2)
    names = [s.condition for s in summaries]
    x = np.arange(len(names))
    ax_d.bar(x, [s.dice_mean for s in summaries], yerr=[s.dice_sd for s in summaries], capsize=4)
    ax_d.set_xticks(x, names, rotation=15)
    ax_d.set_ylabel("dice")
    ax_d.set_ylim(0, 1)
    ax_t.bar(
        x,
        [s.time_mean for s in summaries],
        yerr=[s.time_sd for s in summaries],
        capsize=4,
        color="tab:orange",
    )
    ax_t.set_xticks(x, names, rotation=15)
    ax_t.set_ylabel("task time (s)")
    fig.tight_layout()
    return fig
