"""Headless figure rendering for experiment tables.

Every render is deterministic: fixed rc settings, a fixed svg.hashsalt,
text kept as text (not glyph paths), and no timestamps in the output, so
identical inputs give byte-identical SVG.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .tables import SchemaError, read_table

FIGURE_KINDS = ("overlay", "per_frequency", "snr_curve", "error_vs_L")

# pinned style so output does not depend on user matplotlibrc
_RC = {
    "svg.hashsalt": "srmra-plots",
    "svg.fonttype": "none",
    "figure.figsize": (7.0, 4.5),
    "figure.dpi": 100,
    "font.family": "DejaVu Sans",
    "font.size": 10.0,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.axisbelow": True,
}


@dataclass(frozen=True)
class PlotJob:
    """One figure to render from one or more experiment CSV files."""

    input_csv_paths: tuple[str, ...]
    figure_kind: str
    output_path: str
    title: str | None = None
    dpi: int = 150

    def __post_init__(self):
        object.__setattr__(self, "input_csv_paths", tuple(self.input_csv_paths))
        if self.figure_kind not in FIGURE_KINDS:
            raise ValueError(
                f"unknown figure kind {self.figure_kind!r}, "
                f"choose from {list(FIGURE_KINDS)}"
            )
        if not self.input_csv_paths:
            raise ValueError("at least one input CSV is required")
        if self.figure_kind in ("overlay", "per_frequency") and len(self.input_csv_paths) != 1:
            raise ValueError(
                f"{self.figure_kind} takes exactly one input table, "
                f"got {len(self.input_csv_paths)}"
            )
        if self.dpi <= 0:
            raise ValueError("dpi must be positive")


def fit_loglog_slope(x, y) -> float:
    """Least-squares slope of log10(y) against log10(x).

    Non-finite or non-positive pairs are dropped; fewer than two usable
    points gives nan.
    """
    slope, _ = _loglog_fit(x, y)
    return slope


def _loglog_fit(x, y) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = np.isfinite(x) & np.isfinite(y) & (x > 0) & (y > 0)
    if keep.sum() < 2:
        return float("nan"), float("nan")
    lx = np.log10(x[keep])
    ly = np.log10(y[keep])
    mx = lx.mean()
    my = ly.mean()
    denom = ((lx - mx) ** 2).sum()
    if denom == 0.0:
        return float("nan"), float("nan")
    slope = float(((lx - mx) * (ly - my)).sum() / denom)
    return slope, float(my - slope * mx)


def _series_label(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def _draw_overlay(ax, job: PlotJob) -> None:
    table = read_table(job.input_csv_paths[0], expected_kind="overlay")
    pos = table["position"]
    ax.plot(pos, table["truth"], color="black", linestyle="--", label="truth")
    ax.plot(pos, table["baseline"], color="tab:gray", linewidth=1.2,
            label="low-passed baseline")
    ax.plot(pos, table["estimate"], color="tab:orange", marker="o",
            markersize=3.5, label="estimate")
    ax.set_xlabel("position")
    ax.set_ylabel("value")
    ax.legend()


def _draw_per_frequency(ax, job: PlotJob) -> None:
    table = read_table(job.input_csv_paths[0], expected_kind="per_frequency")
    freq = table["freq_index"]
    # masked so NaN rows break the line instead of bridging the gap
    est = np.ma.masked_invalid(table["estimate_error"])
    base = np.ma.masked_invalid(table["baseline_error"])
    ax.plot(freq, est, color="tab:orange", marker="o", markersize=4,
            label="estimate")
    ax.plot(freq, base, color="tab:blue", linestyle="--", marker="s",
            markersize=4, label="low-passed baseline")
    ax.set_yscale("log")
    ax.set_xlabel("frequency index")
    ax.set_ylabel("per-frequency error")
    ax.legend()


def _draw_snr_curve(ax, job: PlotJob) -> None:
    many = len(job.input_csv_paths) > 1
    for i, path in enumerate(job.input_csv_paths):
        table = read_table(path, expected_kind="snr_curve")
        snr = table["snr"]
        err = table["median_relative_error"]
        label = _series_label(path)
        ax.plot(snr, err, marker="o", linestyle="-", label=label)
        slope, intercept = _loglog_fit(snr, err)
        if np.isfinite(slope):
            grid = np.array([snr.min(), snr.max()], dtype=float)
            ax.plot(grid, 10.0 ** (intercept + slope * np.log10(grid)),
                    linestyle="--", color="black", linewidth=1.0)
            note = f"slope {slope:.2f}"
            if many:
                note = f"{label}: {note}"
            ax.text(0.02, 0.04 + 0.07 * i, note, transform=ax.transAxes)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("signal-to-noise ratio")
    ax.set_ylabel("median relative error")
    ax.legend()


def _draw_error_vs_l(ax, job: PlotJob) -> None:
    m_values: list[float] = []
    for path in job.input_csv_paths:
        table = read_table(path, expected_kind="error_vs_L")
        order = np.argsort(table["L"])
        ax.plot(table["L"][order], table["mean_relative_error"][order],
                marker="o", label=_series_label(path))
        for m in np.unique(table["M"]):
            if m not in m_values:
                m_values.append(float(m))
    for m in m_values:
        ax.axvline(m ** (2.0 / 3.0), color="black", linestyle="--",
                   linewidth=1.0, label=f"L = M^(2/3), M = {m:g}")
    ax.set_xlabel("observation length L")
    ax.set_ylabel("mean relative error")
    ax.legend()


_DRAWERS = {
    "overlay": _draw_overlay,
    "per_frequency": _draw_per_frequency,
    "snr_curve": _draw_snr_curve,
    "error_vs_L": _draw_error_vs_l,
}


def render(job: PlotJob) -> tuple[str, str]:
    """Render a job to ``<base>.svg`` and ``<base>.png``, returning both paths."""
    base = job.output_path
    for ext in (".svg", ".png"):
        if base.endswith(ext):
            base = base[: -len(ext)]
    parent = os.path.dirname(base)
    if parent:
        os.makedirs(parent, exist_ok=True)
    svg_path = base + ".svg"
    png_path = base + ".png"

    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots()
        try:
            _DRAWERS[job.figure_kind](ax, job)
            if job.title is not None:
                ax.set_title(job.title)
            fig.tight_layout()
            # metadata Date suppressed so reruns are byte-identical
            fig.savefig(svg_path, format="svg", metadata={"Date": None})
            fig.savefig(png_path, format="png", dpi=job.dpi)
        finally:
            plt.close(fig)
    return svg_path, png_path
