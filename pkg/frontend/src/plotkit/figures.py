"""Log-log convergence figures with slope guides, and mesh wireframes."""

import os
from dataclasses import dataclass, field

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .csvdata import CsvError, load_report, require_columns  # noqa: E402
from .meshfile import load_mesh  # noqa: E402


@dataclass
class PlotSpec:
    """One convergence figure: series are the (csv file, column) pairs.

    x_axis is "h" or "ndof".  Slopes lists reference rates to draw as
    guide triangles.  The annotated rate of each series is the
    least-squares slope of log(error) against log(h) for the h axis and
    against log(ndof^(-1/2)) for the ndof axis, matching the convention
    of the CSV's EOC columns.
    """

    csv_paths: list
    x_axis: str = "h"
    columns: list = field(default_factory=lambda: ["err_pair_H1"])
    out: str = "fig.svg"
    slopes: list = field(default_factory=list)

    def __post_init__(self):
        if self.x_axis not in ("h", "ndof"):
            raise ValueError("x_axis must be 'h' or 'ndof'")
        if not self.csv_paths:
            raise ValueError("need at least one CSV path")
        if not self.columns:
            raise ValueError("need at least one error column")


def fit_slope(x, y):
    """Least-squares slope of log(y) against log(x)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2:
        raise ValueError("need at least two points for a slope")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit needs positive data")
    lx = np.log(x)
    ly = np.log(y)
    lx = lx - lx.mean()
    return float((lx @ (ly - ly.mean())) / (lx @ lx))


def _series_rate(xs, errs, x_axis):
    if x_axis == "h":
        return fit_slope(xs, errs)
    # rate r in err ~ ndof^(-r/2): fit against ndof^(-1/2)
    return fit_slope(xs ** -0.5, errs)


def plot_convergence(spec):
    """Render the log-log figure described by spec; returns per-series
    annotated rates as {(path, column): rate}."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    rates = {}
    markers = ["o", "s", "^", "d", "v", "*"]
    all_x, all_y = [], []
    idx = 0
    for path in spec.csv_paths:
        table = load_report(path)
        require_columns(table, [spec.x_axis] + list(spec.columns), path)
        xs = table[spec.x_axis]
        label_base = os.path.splitext(os.path.basename(path))[0]
        for col in spec.columns:
            errs = table[col]
            good = np.isfinite(xs) & np.isfinite(errs) & (errs > 0)
            if good.sum() < 2:
                raise CsvError("column %s of %s has fewer than two "
                               "positive entries" % (col, path))
            x, y = xs[good], errs[good]
            rate = _series_rate(x, y, spec.x_axis)
            rates[(path, col)] = rate
            ax.loglog(x, y, marker=markers[idx % len(markers)],
                      label="%s:%s (rate %.2f)" % (label_base, col, rate))
            all_x.append(x)
            all_y.append(y)
            idx += 1

    _draw_slope_guides(ax, spec, np.concatenate(all_x),
                       np.concatenate(all_y))
    ax.set_xlabel(spec.x_axis)
    ax.set_ylabel("error")
    if spec.x_axis == "h":
        ax.invert_xaxis()
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(spec.out)
    plt.close(fig)
    return rates


def _draw_slope_guides(ax, spec, xs, ys):
    """Reference triangles for the requested rates."""
    if not spec.slopes:
        return
    x0, x1 = xs.min(), xs.max()
    if x0 == x1:
        return
    xa = np.array([x0, x1])
    for rate in spec.slopes:
        expo = rate if spec.x_axis == "h" else -0.5 * rate
        # anchor the guide at the geometric middle of the data cloud
        ymid = np.exp(np.log(ys).mean())
        xmid = np.exp(np.log(xs).mean())
        ya = 0.7 * ymid * (xa / xmid) ** expo
        ax.loglog(xa, ya, "k--", linewidth=0.8)
        ax.annotate("slope %g" % rate, (xa[1], ya[1]), fontsize=8,
                    textcoords="offset points", xytext=(4, 0))


def plot_mesh(mesh_path, out):
    """Wireframe rendering of a mesh text file; returns the triangle
    count drawn."""
    vertices, triangles, boundary = load_mesh(mesh_path)
    fig, ax = plt.subplots(figsize=(5.0, 5.0))
    ax.triplot(vertices[:, 0], vertices[:, 1], triangles,
               color="tab:blue", linewidth=0.4)
    if len(boundary):
        for a, b in boundary:
            ax.plot(vertices[[a, b], 0], vertices[[a, b], 1],
                    color="black", linewidth=0.8)
    ax.set_aspect("equal")
    ax.set_axis_off()
    fig.tight_layout()
    fig.savefig(out, dpi=200)
    plt.close(fig)
    return len(triangles)
