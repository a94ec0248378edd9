"""Figures written next to the CSV outputs (Agg backend, PNG files)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_STYLE = {
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_training(curves: dict[str, Sequence], path) -> Path:
    """Three stacked panels: L_var, L_fit and gradient shots per iteration.

    ``curves`` maps a label to a list of per-run column dicts (as returned by
    :func:`qnnvar.reports.read_csv`); thin lines are runs, thick lines means.
    """
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(3, 1, figsize=(6, 7), sharex=True)
        for color, (label, runs) in zip(plt.rcParams["axes.prop_cycle"].by_key()["color"], curves.items()):
            n = min(len(r["iter"]) for r in runs)
            for key, ax in zip(("L_var", "L_fit", "shots"), axes):
                stack = np.array([r[key][:n] for r in runs])
                if len(runs) > 1:
                    for row in stack:
                        ax.plot(runs[0]["iter"][:n], row, color=color, lw=0.4, alpha=0.4)
                ax.plot(runs[0]["iter"][:n], stack.mean(axis=0), color=color, lw=1.5, label=label)
        axes[0].set_yscale("log")
        axes[1].set_yscale("log")
        axes[0].set_ylabel(r"$L_\mathrm{var}$")
        axes[1].set_ylabel(r"$L_\mathrm{fit}$")
        axes[2].set_ylabel("gradient shots")
        axes[2].set_xlabel("iteration")
        axes[0].legend()
        return _save(fig, path)


def plot_inference(x, f, std, path, train_x=None, train_y=None, reference=None) -> Path:
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(6, 4))
        if reference is not None:
            ax.plot(x, reference, "k-", lw=1, label="reference")
        ax.plot(x, f, lw=1.2, label="QNN")
        if np.any(std):
            ax.fill_between(x, f - 1.96 * std, f + 1.96 * std, alpha=0.3, lw=0)
        if train_x is not None:
            ax.plot(train_x, train_y, "kx", ms=5, label="training points")
        ax.set_xlabel("x")
        ax.set_ylabel("f(x)")
        ax.legend()
        return _save(fig, path)


def plot_parity(labels: dict[str, tuple], path) -> Path:
    """Predicted vs reference with error bars; ``labels`` maps split -> (ref, pred, half)."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5, 5))
        lo, hi = np.inf, -np.inf
        for name, (ref, pred, half) in labels.items():
            ax.errorbar(ref, pred, yerr=half, fmt="x", ms=4, lw=0.8, label=name)
            lo, hi = min(lo, np.min(ref)), max(hi, np.max(ref))
        ax.plot([lo, hi], [lo, hi], "k--", lw=0.8)
        ax.set_xlabel("reference energy")
        ax.set_ylabel("QNN energy")
        ax.legend()
        return _save(fig, path)


def plot_chebyshev(x, phis, values, path) -> Path:
    """``values[k]`` is the curve for ``phis[k]``; colour runs along ``phi``."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(6, 4))
        cmap = plt.get_cmap("viridis")
        span = max(phis) - min(phis) or 1.0
        for phi, v in zip(phis, values):
            ax.plot(x, v, color=cmap((phi - min(phis)) / span), lw=1)
        sm = plt.cm.ScalarMappable(cmap=cmap, norm=plt.Normalize(min(phis), min(phis) + span))
        fig.colorbar(sm, ax=ax, label=r"$\varphi$")
        ax.set_xlabel("x")
        ax.set_ylabel(r"$T_\varphi(x)$")
        return _save(fig, path)
