"""Matplotlib rendering of trajectories and spatial gains to image files.

Figures complement the CSV output; every figure writes a PNG next to the
delimited data it visualizes.  The Agg backend keeps rendering headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .engine import SpatialFunction, Trajectory  # noqa: E402

__all__ = [
    "plot_error_series",
    "plot_error_surface",
    "plot_spatial_gain",
]


def plot_error_series(traj: Trajectory, path: str, title: str = "") -> str:
    """Semilog plot of every recorded norm series against time."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for name, vals in traj.series.items():
        positive = np.where(vals > 0, vals, np.nan)
        ax.semilogy(traj.times, positive, label=name)
    ax.set_xlabel("t")
    ax.set_ylabel("norm")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_error_surface(traj: Trajectory, path: str, field: str = "err",
                       title: str = "") -> str | None:
    """Surface of a snapshot field over (x, t); needs >= 2 snapshots."""
    if traj.snapshot_x is None or len(traj.snapshots) < 2:
        return None
    ts = np.array([t for t, _ in traj.snapshots])
    zs = np.array([fields[field] for _, fields in traj.snapshots])
    fig = plt.figure(figsize=(6.4, 4.8))
    ax = fig.add_subplot(projection="3d")
    xg, tg = np.meshgrid(traj.snapshot_x, ts)
    ax.plot_surface(xg, tg, zs, cmap="viridis", linewidth=0)
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    ax.set_zlabel(field)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_spatial_gain(sf: SpatialFunction, path: str, name: str = "gain") -> str:
    """Line plot of a (possibly vector-valued) spatial gain."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    samples = np.atleast_2d(sf.samples.T)
    for i, comp in enumerate(samples):
        label = name if samples.shape[0] == 1 else f"{name}[{i}]"
        ax.plot(sf.x, comp, label=label)
    ax.set_xlabel("x")
    ax.set_ylabel(name)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
