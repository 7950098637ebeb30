"""Optional PNG renderings of study artifacts (``--plots``).

Figures are conveniences; the CSV files remain the authoritative output.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_rates(report, out_dir: str | Path) -> Path | None:
    """Log-log error vs h (one curve per replica mean) with the fitted slopes in the legend."""
    rows = [(h, e) for h, _, e in report.errors if np.isfinite(h) and np.isfinite(e) and e > 0]
    if not rows:
        return None
    plt = _pyplot()
    data = np.array(rows, float)
    hs = np.unique(data[:, 0])[::-1]
    mean = np.array([data[data[:, 0] == h, 1].mean() for h in hs])
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(hs, mean, "o-", label="mean error")
    for r in report.rates:
        ax.plot([], [], " ", label=f"{r['name']}: slope {r['exponent']:.3f}")
    ax.set_xlabel("h")
    ax.set_ylabel("error")
    ax.set_title(report.claim)
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    path = Path(out_dir) / "errors.png"
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_eigen(rows, out_dir: str | Path) -> Path:
    plt = _pyplot()
    a = np.array(rows, float)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(a[:, 0], a[:, 1], label="lambda_k (sine index)")
    ax.plot(a[:, 0], a[:, 3], "--", label="4 gamma k^2")
    ax.plot(a[:, 0], a[:, 4], ":", label="gamma pi^2 k^2")
    ax.set_yscale("log")
    ax.set_xlabel("k")
    ax.legend(fontsize=8)
    path = Path(out_dir) / "eigen.png"
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_trajectory(traj, out_dir: str | Path) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    im = ax.imshow(traj.states.T, aspect="auto", origin="lower", cmap="coolwarm",
                   extent=(traj.times[0], traj.times[-1], 0.0, 1.0))
    fig.colorbar(im, ax=ax, label="u")
    ax.set_xlabel("t")
    ax.set_ylabel("x")
    path = Path(out_dir) / "trajectory.png"
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_histograms(report, out_dir: str | Path, table: str = "tau") -> Path | None:
    if table not in report.extra_tables:
        return None
    header, rows = report.extra_tables[table]
    a = np.array([r[1:] for r in rows], float)
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 4))
    finite = a[np.isfinite(a).all(axis=1)] if a.size else a
    if finite.size:
        ax.hist(finite, bins=30, label=header[1:], histtype="step")
        ax.legend(fontsize=7)
    ax.set_xlabel(table)
    path = Path(out_dir) / f"{table}.png"
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render(report, out_dir: str | Path) -> list[Path]:
    out = [plot_rates(report, out_dir), plot_histograms(report, out_dir)]
    return [p for p in out if p is not None]
