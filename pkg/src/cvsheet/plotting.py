"""Static figures of a run: energy traces, stability margins and front snapshots."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _series(reports, getter):
    t, y = [], []
    for r in reports:
        val = getter(r)
        if val is not None:
            t.append(r.time)
            y.append(val)
    return np.asarray(t), np.asarray(y, dtype=float)


def _semilogy_safe(ax, t, y, label):
    if len(t) == 0:
        return
    if np.all(y > 0):
        ax.semilogy(t, y, label=label)
    else:
        ax.plot(t, y, label=label)


def plot_energy(reports, path):
    """``E``, ``H`` and ``K`` against time."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for name in ("E", "H", "K"):
        t, y = _series(reports, lambda r, n=name: getattr(r, n))
        _semilogy_safe(ax, t, y, name)
    ax.set_xlabel("t")
    ax.set_ylabel("energy")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def plot_margins(reports, path):
    """Pointwise minima of the stability margins and ``max |lambda|`` against time."""
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
    for key in ("weak", "spectral", "strong", "cross_margin", "ratio_margin"):
        t, y = _series(reports, lambda r, k=key: r.stability_margins.get(k))
        if len(t):
            ax1.plot(t, y, label=key)
    ax1.axhline(0.0, color="k", lw=0.8)
    ax1.set_ylabel("margin")
    ax1.legend(fontsize="small")
    ax1.grid(True, alpha=0.3)
    t, y = _series(reports, lambda r: r.lambda_bound)
    if len(t):
        ax2.plot(t, y, label="max |lambda|")
    ax2.axhline(1.0, color="k", lw=0.8)
    ax2.set_xlabel("t")
    ax2.set_ylabel("lambda bound")
    ax2.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def plot_fronts(snapshots, path):
    """Front heights ``f(x')`` for a list of ``(time, FrontField)`` pairs.

    Each snapshot gets an image panel; a last panel overlays the ``x2``-averaged
    profiles.
    """
    n = len(snapshots)
    fig, axes = plt.subplots(1, n + 1, figsize=(3 * (n + 1), 3), squeeze=False)
    axes = axes[0]
    for ax, (t, f) in zip(axes, snapshots):
        im = ax.imshow(f.values.T, origin="lower", extent=(0, 1, 0, 1), cmap="RdBu_r")
        ax.set_title(f"t = {t:.3g}")
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        fig.colorbar(im, ax=ax, fraction=0.046)
    ax = axes[-1]
    for t, f in snapshots:
        x1 = f.grid.x[0][:, 0]
        ax.plot(x1, f.values.mean(axis=1), label=f"t = {t:.3g}")
    ax.set_xlabel("x1")
    ax.set_ylabel("mean_x2 f")
    if n:
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def render_all(reports, snapshots, outdir, stem="run"):
    """Write the three figures into ``outdir``; returns their paths."""
    from pathlib import Path

    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    return [
        plot_energy(reports, out / f"{stem}_energy.png"),
        plot_margins(reports, out / f"{stem}_margins.png"),
        plot_fronts(snapshots, out / f"{stem}_fronts.png"),
    ]
