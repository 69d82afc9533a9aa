"""SVG overlay plots of truth (dashed) against estimates (solid).

Presentation only.  matplotlib is imported lazily; without it, plotting is
skipped with a log message.
"""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)


def _pyplot():
    try:
        import matplotlib
    except ImportError:
        log.warning("matplotlib not installed; skipping plots")
        return None
    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "flowobs"
    import matplotlib.pyplot as plt
    return plt


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})


def plot_states(out_dir, trace, truth=None):
    """Estimated states, crossover flux and parameters in four panels.

    Returns the list of written files (empty when matplotlib is absent).
    """
    plt = _pyplot()
    if plt is None:
        return []
    fig, axes = plt.subplots(2, 2, figsize=(10, 7))
    panels = [(axes[0, 0], "SOC", trace.soc, None if truth is None else truth.soc),
              (axes[0, 1], "SOC_cell", trace.soc_cell,
               None if truth is None else truth.soc_cell),
              (axes[1, 0], "crossover flux [mol/min]", trace.crossover,
               None if truth is None else truth.crossover_flux)]
    for ax, label, est, ref in panels:
        if ref is not None:
            ax.plot(truth.time, ref, "k-.", lw=1.2, label="truth")
        ax.plot(trace.time, est, "C0-", lw=1.0, label="estimate")
        ax.set_ylabel(label)
        ax.set_xlabel("time [min]")
        ax.legend(loc="best", fontsize=8)
    ax = axes[1, 1]
    for j in range(trace.omega.shape[1]):
        ax.plot(trace.time, trace.omega[:, j], lw=1.0,
                label="theta_hat" if j == 0 else f"omega_hat_{j + 1}")
    ax.set_xlabel("time [min]")
    ax.set_ylabel("parameters")
    ax.legend(loc="best", fontsize=8)
    path = Path(out_dir) / "states.svg"
    _save(fig, path)
    plt.close(fig)
    return [path]


def plot_voltage(out_dir, samples, trace, params):
    """Measured voltage (dotted) against the voltage predicted from the estimate."""
    plt = _pyplot()
    if plt is None:
        return []
    from ..battery import nernst_voltage
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot([s.time for s in samples], [s.v_out for s in samples], "k:", lw=1.0,
            label="measured")
    cur = np.array([s.current for s in samples])
    ax.plot(trace.time, nernst_voltage(trace.soc_cell, cur, params), "C1-.", lw=1.2,
            label="predicted")
    ax.set_xlabel("time [min]")
    ax.set_ylabel("V_out [V]")
    ax.legend(loc="best", fontsize=8)
    path = Path(out_dir) / "voltage.svg"
    _save(fig, path)
    plt.close(fig)
    return [path]
