"""Optional PNG figures next to the data files (``--plots``).

matplotlib is imported lazily with the Agg backend so that runs without
``--plots`` never touch it.
"""

from __future__ import annotations

import os
from typing import List, Sequence

import numpy as np


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _finish(fig, ax, path: str) -> str:
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    fig.clf()
    return path


def plot_spectrum(result, out_dir: str) -> List[str]:
    """Eigenvalues against radial index, one series per sector."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for s in sorted(result.sectors, key=lambda s: s.l):
        ax.semilogy(np.arange(len(s.mu)), s.mu, "o-", ms=3, lw=1, label=f"l={s.l}")
    ax.set_xlabel("radial index k")
    ax.set_ylabel(r"$\mu$")
    ax.legend(fontsize=7, ncol=2, frameon=False)
    path = _finish(fig, ax, os.path.join(out_dir, "spectrum.png"))
    plt.close(fig)
    return [path]


def plot_trajectories(trajs: Sequence, out_dir: str) -> List[str]:
    """``||u(t)|| / ||u0||`` on a log scale."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for i, tr in enumerate(trajs):
        if tr.norms[0] == 0:
            continue
        ax.semilogy(tr.times, tr.norms / tr.norms[0], lw=1,
                    label=f"l={tr.sector} #{i} ({tr.scheme})")
    ax.set_xlabel("t")
    ax.set_ylabel(r"$\|u(t)\| / \|u_0\|$")
    ax.legend(fontsize=7, frameon=False)
    path = _finish(fig, ax, os.path.join(out_dir, "trajectories.png"))
    plt.close(fig)
    return [path]


def plot_margins(reports: Sequence, out_dir: str) -> List[str]:
    """Margin of every non-skipped report (symlog axis)."""
    plt = _pyplot()
    live = [r for r in reports if not r.skipped]
    fig, ax = plt.subplots(figsize=(6.0, 0.3 * len(live) + 1.2))
    y = np.arange(len(live))
    ax.barh(y, [r.margin for r in live],
            color=["tab:green" if r.passed else "tab:red" for r in live])
    ax.set_yticks(y, [r.id for r in live], fontsize=7)
    ax.set_xscale("symlog", linthresh=1e-8)
    ax.set_xlabel("margin")
    path = _finish(fig, ax, os.path.join(out_dir, "margins.png"))
    plt.close(fig)
    return [path]
