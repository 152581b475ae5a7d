"""Static figures written next to the CSV outputs (Agg backend, no display)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def learning_curves(curves: dict, path: Path, title: str = "") -> Path:
    """``curves`` maps a label to (returns, smoothed) sequences."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, (raw, smooth) in curves.items():
        x = np.arange(len(raw))
        line, = ax.plot(x, smooth, label=str(label))
        ax.plot(x, raw, color=line.get_color(), alpha=0.2, lw=0.8)
    ax.set_xlabel("episode")
    ax.set_ylabel("return")
    if title:
        ax.set_title(title)
    ax.legend(fontsize="small")
    return _save(fig, path)


def regression_surfaces(rows: list[dict], train_mse, test_mse, path: Path) -> Path:
    n = int(round(np.sqrt(len(rows))))
    a0 = np.array([r["a0"] for r in rows]).reshape(n, n)
    a1 = np.array([r["a1"] for r in rows]).reshape(n, n)
    tgt = np.array([r["target"] for r in rows]).reshape(n, n)
    pred = np.array([r["prediction"] for r in rows]).reshape(n, n)
    lim = max(np.abs(tgt).max(), np.abs(pred).max())
    fig, axes = plt.subplots(1, 3, figsize=(13, 4))
    for ax, z, name in zip(axes[:2], (tgt, pred), ("target r(a)", "RBVF prediction")):
        im = ax.pcolormesh(a0, a1, z, vmin=-lim, vmax=lim, cmap="RdBu_r", shading="auto")
        ax.set_title(name)
        ax.set_xlabel("a0")
        ax.set_ylabel("a1")
        fig.colorbar(im, ax=ax)
    axes[2].semilogy(train_mse, label="train")
    axes[2].semilogy(test_mse, label="test")
    axes[2].set_xlabel("step")
    axes[2].set_ylabel("MSE")
    axes[2].legend()
    return _save(fig, path)


def gap_decay(reports, path: Path) -> Path:
    betas = [r.beta for r in reports]
    gaps = [max(r.gap, 0.0) for r in reports]
    tols = [r.tolerance for r in reports]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(betas, gaps, "o-", label="grid max - centroid max")
    ax.plot(betas, tols, "k:", label="grid tolerance")
    ax.set_yscale("symlog", linthresh=1e-6)
    ax.set_xlabel("beta")
    ax.set_ylabel("gap")
    ax.legend(fontsize="small")
    return _save(fig, path)


def sweep_auc(rows: list[dict], axis: str, path: Path) -> Path:
    values = sorted({r["axis_value"] for r in rows})
    groups = [[r["area_under_curve"] for r in rows if r["axis_value"] == v] for v in values]
    fig, ax = plt.subplots(figsize=(5, 4))
    for v, g in zip(values, groups):
        ax.scatter([v] * len(g), g, color="0.6", s=12)
    ax.plot(values, [np.median(g) for g in groups], "o-", label="median")
    if axis == "beta":
        ax.set_xscale("log")
    ax.set_xlabel(axis)
    ax.set_ylabel("area under curve")
    ax.legend(fontsize="small")
    return _save(fig, path)
