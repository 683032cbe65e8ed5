"""SVG figures written next to the results.

Figures carry no timestamp and a fixed hash salt so reruns give identical files.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

plt.rcParams["svg.hashsalt"] = "cellident"


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def voltage_fit_svg(measured, predicted, labels, path) -> None:
    """Measured and predicted voltage, one panel per trace."""
    n = len(measured)
    fig, axes = plt.subplots(n, 1, figsize=(7, 2.2 * n), squeeze=False)
    for ax, m, p, lab in zip(axes[:, 0], measured, predicted, labels):
        ax.plot(m.time, m.voltage, lw=1.2, label="measured")
        ax.plot(p.time, p.voltage, lw=1.0, ls="--", label="model")
        ax.set_title(lab, fontsize=9)
        ax.set_ylabel("V")
    axes[-1, 0].set_xlabel("time (s)")
    axes[0, 0].legend(fontsize=8)
    _save(fig, path)


def convergence_svg(curves: dict, path) -> None:
    """Best objective against evaluations used, one line per named run."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for name, (evals, best) in curves.items():
        if len(evals):
            ax.semilogy(evals, best, lw=1.2, label=name)
    ax.set_xlabel("objective evaluations")
    ax.set_ylabel("best objective")
    ax.legend(fontsize=7)
    _save(fig, path)


def ocv_svg(macro, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(macro.soc, macro.ocv)
    ax.set_xlabel("SOC")
    ax.set_ylabel("OCV (V)")
    ax.set_title(f"capacity {macro.capacity:.1f} mAh", fontsize=9)
    _save(fig, path)


def capacity_svg(cycles, capacities, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(cycles, capacities, marker="o")
    ax.set_xlabel("cycles")
    ax.set_ylabel("capacity (mAh)")
    _save(fig, path)
