"""Rendering of score surfaces and estimator summary panels.

Outputs are byte-stable: a fixed style file drives colours, camera and DPI,
and PNG metadata that would vary between runs is stripped.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import load_report, load_summary, load_surface  # noqa: E402

_PNG_METADATA = {"Software": None}  # drop the version-dependent tag


def load_style(path=None) -> dict:
    if path is not None:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    return json.loads(
        resources.files("performa_plots").joinpath("style.json")
        .read_text(encoding="utf-8"))


def _save(fig, out, style):
    out = Path(out)
    fig.savefig(out, dpi=style["dpi"], metadata=_PNG_METADATA)
    plt.close(fig)
    return out


def plot_surface(csv_path, report_path, out, style=None):
    """3D metric surface over the two forecast slices, with the grid optima
    (blue), the correct forecast (green) and their floor projections."""
    style = style or load_style()
    data = load_surface(csv_path)
    report = load_report(report_path)

    f0 = np.array(data.f0)
    f1 = np.array(data.f1)
    z = np.array(data.values).reshape(len(f0), len(f1))
    grid_f1, grid_f0 = np.meshgrid(f1, f0)

    fig = plt.figure(figsize=tuple(style["figsize_surface"]))
    ax = fig.add_subplot(projection="3d")
    ax.plot_surface(grid_f0, grid_f1, z, cmap=style["surface_cmap"],
                    alpha=style["surface_alpha"], linewidth=0,
                    antialiased=False, rstride=1, cstride=1)
    floor = float(z.min())
    lift = 0.01 * (float(z.max()) - floor or 1.0)

    if report.maximizers:
        mx = np.array(report.maximizers, dtype=float)
        ax.scatter(mx[:, 0], mx[:, 1], report.optimum + lift,
                   color=style["optimum_color"], s=14, depthshade=False,
                   label="optimum")
        ax.scatter(mx[:, 0], mx[:, 1], floor, color=style["optimum_color"],
                   s=6, alpha=0.6, depthshade=False)
    if report.correct_forecast is not None:
        cx, cy = report.correct_forecast
        try:
            cz = data.value_at(report.correct_forecast)
        except ValueError:  # not a grid point; mark at the optimum height
            cz = report.optimum
        ax.scatter([cx], [cy], [cz + lift], color=style["correct_color"],
                   s=36, depthshade=False, label="correct forecast")
        ax.scatter([cx], [cy], [floor], color=style["correct_color"], s=14,
                   alpha=0.7, depthshade=False)
        ax.plot([cx, cx], [cy, cy], [floor, cz],
                color=style["projection_color"], linestyle="--", linewidth=0.8)

    ax.set_xlabel("forecast for action 0")
    ax.set_ylabel("forecast for action 1")
    ax.set_zlabel(report.metric)
    ax.view_init(elev=style["elev"], azim=style["azim"])
    ax.legend(loc="upper left", fontsize=8)
    return _save(fig, out, style)


def _forecast_colour(rows, forecast, style):
    """Green when some divergence-type row declares this forecast exactly on
    target (truth 0); red otherwise.  Falls back to the label when the file
    carries no divergence rows for the forecast."""
    divergence_rows = [r for r in rows
                       if r.forecast == forecast and r.orientation == "min"]
    if divergence_rows:
        correct = all(abs(r.truth) <= 1e-12 for r in divergence_rows)
    else:
        correct = forecast == "correct"
    return style["correct_series_color" if correct else "incorrect_series_color"]


def plot_estimators(csv_path, out, style=None):
    """One panel per estimator: median (solid), truth (dashed) and the
    5th-95th percentile band, per forecast."""
    style = style or load_style()
    rows = load_summary(csv_path)
    estimators = list(dict.fromkeys(r.estimator for r in rows))
    forecasts = list(dict.fromkeys(r.forecast for r in rows))

    width, height = style["figsize_panel"]
    fig, axes = plt.subplots(
        1, len(estimators),
        figsize=(width * len(estimators), height), squeeze=False)
    for ax, estimator in zip(axes[0], estimators):
        for forecast in forecasts:
            series = sorted((r for r in rows
                             if r.estimator == estimator
                             and r.forecast == forecast),
                            key=lambda r: r.n)
            if not series:
                continue
            ns = [r.n for r in series]
            colour = _forecast_colour(rows, forecast, style)
            ax.plot(ns, [r.median for r in series], color=colour,
                    marker="o", markersize=2.5, linewidth=1.2, label=forecast)
            ax.plot(ns, [r.truth for r in series], color=colour,
                    linestyle="--", linewidth=1.0)
            ax.fill_between(ns, [r.q05 for r in series],
                            [r.q95 for r in series], color=colour,
                            alpha=style["band_alpha"], linewidth=0)
        ax.set_xscale("log")
        ax.set_xticks(sorted({r.n for r in rows}))
        ax.get_xaxis().set_major_formatter(matplotlib.ticker.ScalarFormatter())
        ax.set_xlabel("sample size")
        ax.set_title(estimator, fontsize=10)
        ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, out, style)
