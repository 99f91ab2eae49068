"""Figure rendering for experiment reports.

Figures are derived from the same tables the CSV files hold; the CSVs stay
the canonical output and every figure is written as a PNG file next to them.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DIRECTION_COLORS = {"easy": "tab:blue", "hard": "tab:red"}


def _save(fig, path: str, paths: list) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    paths.append(path)


def _fen_figure(rows: list, out_dir: str, paths: list) -> None:
    objectives = sorted({r["objective"] for r in rows})
    for objective in objectives:
        subset = [r for r in rows if r["objective"] == objective]
        templates = sorted({r["template"] for r in subset})
        fig, ax = plt.subplots(figsize=(7, 4))
        offsets = {"easy": -0.15, "hard": 0.15}
        for direction in ("easy", "hard"):
            xs, medians, lows, highs = [], [], [], []
            for i, template in enumerate(templates):
                match = [r for r in subset
                         if r["template"] == template and r["direction"] == direction]
                if not match:
                    continue
                row = match[0]
                xs.append(i + offsets.get(direction, 0.0))
                medians.append(row["median_fen"])
                lows.append(row["median_fen"] - row["q1_fen"])
                highs.append(row["q3_fen"] - row["median_fen"])
            if not xs:
                continue
            ax.errorbar(xs, medians, yerr=[lows, highs], fmt="o",
                        capsize=4, label=direction,
                        color=_DIRECTION_COLORS.get(direction))
        ax.set_xticks(range(len(templates)))
        ax.set_xticklabels(templates)
        ax.set_xlabel("constraint template")
        ax.set_ylabel("FEN (median, q1..q3)")
        ax.set_title(f"Solver effort on evolved instances: {objective}")
        ax.legend()
        _save(fig, os.path.join(out_dir, f"fen_{objective}.png"), paths)


def _ratio_figure(rows: list, out_dir: str, paths: list) -> None:
    objectives = sorted({r["objective"] for r in rows})
    for objective in objectives:
        subset = [r for r in rows if r["objective"] == objective]
        fig, ax = plt.subplots(figsize=(7, 4))
        for direction in ("easy", "hard"):
            match = sorted(
                (r for r in subset if r["direction"] == direction),
                key=lambda r: (r["constraint_count"], r["template"]),
            )
            if not match:
                continue
            ax.plot(
                [r["constraint_count"] for r in match],
                [r["median_ratio"] for r in match],
                marker="o",
                label=direction,
                color=_DIRECTION_COLORS.get(direction),
            )
        ax.set_xlabel("constraint count")
        ax.set_ylabel("median local feasibility ratio")
        ax.set_ylim(-0.05, 1.05)
        ax.set_title(f"Feasible share near the optimum: {objective}")
        ax.legend()
        _save(fig, os.path.join(out_dir, f"ratio_{objective}.png"), paths)


def _box_figure(rows: list, metric: str, out_dir: str, paths: list) -> None:
    objectives = sorted({r["objective"] for r in rows})
    for objective in objectives:
        subset = [r for r in rows if r["objective"] == objective
                  and np.isfinite(r["max"])]
        if not subset:
            continue
        stats = []
        for r in sorted(subset, key=lambda r: (r["template"], r["direction"],
                                               r["constraint_index"])):
            stats.append({
                "label": f'{r["template"]}/{r["direction"][0].upper()}/c{r["constraint_index"]}',
                "whislo": r["min"],
                "q1": r["q1"],
                "med": r["median"],
                "q3": r["q3"],
                "whishi": r["max"],
                "fliers": [],
            })
        fig, ax = plt.subplots(figsize=(max(7, 0.45 * len(stats)), 4))
        ax.bxp(stats, showfliers=False)
        ax.set_ylabel(metric)
        ax.set_title(f"{metric} per constraint: {objective}")
        ax.tick_params(axis="x", rotation=75)
        _save(fig, os.path.join(out_dir, f"box_{metric}_{objective}.png"), paths)


def render_report_figures(tables: dict, figures_dir: str) -> list:
    """Render every report figure; returns the list of files written."""
    os.makedirs(figures_dir, exist_ok=True)
    paths: list = []
    if tables.get("fen_summary"):
        _fen_figure(tables["fen_summary"], figures_dir, paths)
    if tables.get("ratio_summary"):
        _ratio_figure(tables["ratio_summary"], figures_dir, paths)
    if tables.get("box_coeff_sd"):
        _box_figure(tables["box_coeff_sd"], "coeff_sd", figures_dir, paths)
    if tables.get("box_distance"):
        _box_figure(tables["box_distance"], "distance", figures_dir, paths)
    return paths


def render_raster_figure(grid: np.ndarray, bounds, path: str) -> str:
    """Render a 0/1 feasibility grid; feasible cells are dark."""
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.imshow(
        grid,
        origin="lower",
        extent=(bounds.lower[0], bounds.upper[0], bounds.lower[1], bounds.upper[1]),
        cmap="Blues",
        vmin=0.0,
        vmax=1.0,
        interpolation="nearest",
    )
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.set_title("feasible region (dark)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
