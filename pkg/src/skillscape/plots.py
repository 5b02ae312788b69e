"""Figure rendering for the report paths.

Figures are built on explicit Agg canvases (no pyplot global state), so
rendering is deterministic and safe in headless runs.  Each helper takes
the same frame its companion CSV writer receives and saves a PNG next to
the delimited output.
"""

from __future__ import annotations

import numpy as np
import pandas as pd
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure


def _new_figure(width=7.0, height=4.5) -> Figure:
    fig = Figure(figsize=(width, height), dpi=150)
    FigureCanvasAgg(fig)
    return fig


def _save(fig: Figure, path) -> str:
    fig.savefig(path, bbox_inches="tight", metadata={"Software": "skillscape"})
    return str(path)


def plot_counterfactual(frame: pd.DataFrame, path) -> str:
    """Redistribution impacts against initial college fraction, per year.

    Solid lines include the signaling channel; dashed lines are the
    agglomeration-only baseline, flat across origins.
    """
    fig = _new_figure()
    ax = fig.add_subplot(111)
    for i, (year, block) in enumerate(frame.groupby("year")):
        block = block.sort_values("delta_initial")
        color = f"C{i}"
        ax.plot(block["delta_initial"], block["dphi_total"], color=color,
                label=f"{year} with signaling")
        ax.plot(block["delta_initial"], block["dphi_agglomeration"],
                color=color, linestyle="--", alpha=0.7,
                label=f"{year} agglomeration only")
    ax.axhline(0.0, color="gray", linewidth=0.8)
    ax.set_xlabel("initial college fraction of origin")
    ax.set_ylabel("change in market potential measure")
    ax.set_title("Redistributing college workers: welfare impact by origin")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_trace(trace: pd.DataFrame, path) -> str:
    """Solver gap trajectory on a log scale."""
    fig = _new_figure()
    ax = fig.add_subplot(111)
    for col in ("gap", "gap_population", "gap_shares", "gap_migration"):
        if col in trace.columns and trace[col].gt(0).any():
            ax.semilogy(trace["iteration"], trace[col].clip(lower=1e-300),
                        label=col)
    ax.set_xlabel("iteration")
    ax.set_ylabel("fixed-point gap")
    ax.set_title("Equilibrium solver convergence")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_amenities(amenities: dict[str, float], path, k: int = 10) -> str:
    """Horizontal bars for the top and bottom amenity MSAs."""
    items = sorted(amenities.items(), key=lambda kv: kv[1])
    chosen = items[:k] + items[-k:] if len(items) > 2 * k else items
    labels = [m for m, _ in chosen]
    values = [v for _, v in chosen]
    fig = _new_figure(7.0, max(3.0, 0.3 * len(chosen)))
    ax = fig.add_subplot(111)
    colors = ["C3" if v < 0 else "C0" for v in values]
    ax.barh(np.arange(len(chosen)), values, color=colors)
    ax.set_yticks(np.arange(len(chosen)))
    ax.set_yticklabels(labels, fontsize=7)
    ax.set_xlabel("amenity value (currency)")
    ax.set_title("High and low amenity MSAs")
    return _save(fig, path)


def plot_recovery(report: pd.DataFrame, path) -> str:
    """Relative recovery error per parameter against its tolerance."""
    fig = _new_figure()
    ax = fig.add_subplot(111)
    x = np.arange(len(report))
    rel_err = np.abs(report["estimate"] - report["truth"]) \
        / np.abs(report["truth"])
    rel_tol = report["tolerance"] / np.abs(report["truth"])
    ax.bar(x, rel_err, color=["C0" if ok else "C3" for ok in report["ok"]],
           label="relative error")
    ax.plot(x, rel_tol, "k_", markersize=18, label="tolerance")
    ax.set_xticks(x)
    ax.set_xticklabels(report["param"], rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("relative deviation from truth")
    ax.set_title("Round-trip parameter recovery")
    ax.legend(fontsize=8)
    return _save(fig, path)
