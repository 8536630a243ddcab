"""Figure rendering for experiment reports.

Renders the three report views (privacy-loss CDF, error by quintile, and
noise scale versus query value) to image files next to the delimited
output.  Uses the non-interactive Agg backend so it works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = ["plot_loss_cdf", "plot_are_quintiles", "plot_sd_curve", "render_report_figures"]

REPORT_FIGURES = ("loss_cdf.png", "are_quintiles.png", "sd_curve.png")


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_loss_cdf(cdf_points, path, label=None):
    """Empirical privacy-loss CDF on a log-scaled loss axis."""
    fig, ax = plt.subplots(figsize=(6, 4))
    thresholds = [t for t, _ in cdf_points]
    fractions = [f for _, f in cdf_points]
    ax.plot(thresholds, fractions, drawstyle="steps-post", label=label)
    ax.set_xscale("log")
    ax.set_xlabel("privacy loss threshold")
    ax.set_ylabel("fraction of records at or below")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(True, which="both", alpha=0.3)
    if label:
        ax.legend()
    _finish(fig, path)


def plot_are_quintiles(summaries, path):
    """25th/50th/75th percentile absolute relative error per true-sum quintile."""
    fig, ax = plt.subplots(figsize=(6, 4))
    quintiles = [s.quintile for s in summaries]
    for attr, style in (("are_p25", ":"), ("are_p50", "-"), ("are_p75", "--")):
        series = [getattr(s, attr) for s in summaries]
        xs = [q for q, v in zip(quintiles, series) if v is not None]
        ys = [v for v in series if v is not None]
        if xs:
            ax.plot(xs, ys, style, marker="o", label=attr.replace("are_", ""))
    ax.axhline(1.0, color="tab:blue", alpha=0.4, lw=1)
    ax.axhline(0.1, color="tab:orange", alpha=0.4, lw=1)
    ax.set_yscale("log")
    ax.set_xticks(quintiles)
    ax.set_xlabel("true-sum quintile")
    ax.set_ylabel("absolute relative error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    _finish(fig, path)


def plot_sd_curve(sd_points, path):
    """Mechanism standard deviation as a function of the true query value."""
    fig, ax = plt.subplots(figsize=(6, 4))
    if sd_points:
        qs = [q for q, _ in sd_points]
        sds = [s for _, s in sd_points]
        ax.plot(qs, sds)
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel("true query value")
    ax.set_ylabel("output standard deviation")
    ax.grid(True, which="both", alpha=0.3)
    _finish(fig, path)


def render_report_figures(report, outdir) -> dict:
    """Render all report figures into the output directory."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {
        "loss_cdf.png": outdir / "loss_cdf.png",
        "are_quintiles.png": outdir / "are_quintiles.png",
        "sd_curve.png": outdir / "sd_curve.png",
    }
    plot_loss_cdf(report.loss_cdf, paths["loss_cdf.png"])
    plot_are_quintiles(report.are_by_quintile, paths["are_quintiles.png"])
    plot_sd_curve(report.sd_points, paths["sd_curve.png"])
    return paths
