"""Deterministic SVG plots of convergence and trajectory series."""

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed ids and no timestamp so identical input gives identical bytes
matplotlib.rcParams["svg.hashsalt"] = "abpverify"
matplotlib.rcParams["svg.fonttype"] = "none"


class SeriesError(KeyError):
    """Requested series does not exist in the report."""


def fitted_slope(x, y):
    """Least-squares slope of ``log y`` against ``log x`` over positive pairs."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def plot_series(series, path, title=""):
    """Write one series to ``path`` as SVG and return the path."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    try:
        if series["kind"] == "convergence":
            x = np.asarray(series["x"], dtype=float)
            y = np.maximum(np.asarray(series["y"], dtype=float), 1e-17)
            ax.loglog(x, y, "o-", color="C0")
            slope = fitted_slope(x, y)
            if math.isfinite(slope):
                ax.annotate(f"slope {slope:.2f}", xy=(0.05, 0.9), xycoords="axes fraction")
        elif series["kind"] == "trajectory":
            x = series["x"]
            for i, (label, ys) in enumerate(sorted(series["curves"].items())):
                ax.plot(x, ys, label=label, color=f"C{i}")
            ax.legend(loc="best")
        else:
            raise SeriesError(f"unknown series kind {series['kind']!r}")
        ax.set_xlabel(series.get("x_label", ""))
        ax.set_ylabel(series.get("y_label", ""))
        if title:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
    return path


def find_series(report, name):
    for entry in report.get("scenarios", []):
        if entry["scenario"]["name"] == name and entry.get("series"):
            return entry["series"]
    known = [e["scenario"]["name"] for e in report.get("scenarios", []) if e.get("series")]
    raise SeriesError(f"unknown series {name!r}; available: {', '.join(known) or 'none'}")
