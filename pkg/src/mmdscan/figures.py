"""Static figures written next to the CSV outputs."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.family": "DejaVu Sans",
    "font.size": 9,
    "axes.labelsize": 10,
    "axes.titlesize": 10,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.dpi": 100,
    "savefig.bbox": "tight",
    # fixed salt and no date keep SVG output byte-stable between runs
    "svg.hashsalt": "mmdscan",
    "svg.fonttype": "path",
}


def _save(fig, path):
    fmt = str(path).rsplit(".", 1)[-1].lower()
    meta = {"Date": None} if fmt in ("svg", "pdf") else {}
    if fmt == "svg":
        meta["Creator"] = "mmdscan"
    fig.savefig(path, format=fmt, metadata=meta or None)
    plt.close(fig)


def risk_heatmap(values, min_sizes, max_sizes, path, title="minimax risk / 2"):
    """Heatmap of normalized risk (rows: I_min, columns: I_max) on a fixed [0, 1] color scale."""
    z = np.asarray(values, dtype=float).reshape(len(min_sizes), len(max_sizes))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(1.0 + 0.9 * len(max_sizes), 0.8 + 0.7 * len(min_sizes)))
        # pcolormesh keeps cells as vector paths, so the SVG has no embedded raster
        im = ax.pcolormesh(np.arange(len(max_sizes) + 1) - 0.5, np.arange(len(min_sizes) + 1) - 0.5, z,
                           cmap="viridis", vmin=0.0, vmax=1.0)
        ax.invert_yaxis()
        ax.set_xticks(range(len(max_sizes)), [str(v) for v in max_sizes])
        ax.set_yticks(range(len(min_sizes)), [str(v) for v in min_sizes])
        ax.set_xlabel("I_max")
        ax.set_ylabel("I_min")
        ax.set_title(title)
        for i in range(z.shape[0]):
            for j in range(z.shape[1]):
                ax.text(j, i, f"{z[i, j]:.2f}", ha="center", va="center",
                        color="white" if z[i, j] < 0.5 else "black", fontsize=7)
        cb = fig.colorbar(im, ax=ax, fraction=0.05, pad=0.03)
        cb.solids.set_rasterized(False)
        _save(fig, path)


def compare_bars(rows, detectors, path):
    """Grouped bars of estimated risk per (I_min, I_max) pair and detector."""
    labels = [f"({r['min_size']},{r['max_size']})" for r in rows]
    x = np.arange(len(rows))
    width = 0.8 / len(detectors)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(1.5 + 1.2 * len(rows), 3.0))
        for k, det in enumerate(detectors):
            ax.bar(x + (k - (len(detectors) - 1) / 2) * width, [r[det] for r in rows], width, label=det)
        ax.set_xticks(x, labels)
        ax.set_ylim(0, 2)
        ax.set_ylabel("minimax risk")
        ax.set_xlabel("(I_min, I_max)")
        ax.legend(frameon=False, ncol=len(detectors))
        _save(fig, path)
