"""Plot-ready CSV files (x, y, series) and their rendering to PNG."""
from __future__ import annotations

import csv
from collections import OrderedDict
from pathlib import Path

from .errors import FormatError

PLOT_HEADER = ("x", "y", "series")

# file stem -> axis setup; anything else renders as plain lines
FIGURES = {
    "traces": dict(xlabel="gradient loss", ylabel="MSE(x', x)", logx=True, logy=True),
    "convergence": dict(xlabel="iteration k", ylabel="MSE(x', x)", logy=True),
    "filter": dict(xlabel="iteration k", ylabel="MSE(x', x)", logy=True),
    "depth": dict(xlabel="ansatz parameters", ylabel="iterations to 1e-5", bar=True),
    "noise": dict(xlabel="noise sigma", ylabel="value", logy=True),
    "batch": dict(xlabel="batch size", ylabel="test score"),
}


def write_plot_csv(path, points):
    """``points`` is an iterable of ``(x, y, series)``; header is always written."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PLOT_HEADER)
        for x, y, series in points:
            w.writerow((repr(float(x)), repr(float(y)), series))
    return path


def read_plot_csv(path):
    """Return ``{series: ([x...], [y...])}`` in first-seen series order."""
    series = OrderedDict()
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != PLOT_HEADER:
            raise FormatError(f"{path}: expected header {','.join(PLOT_HEADER)}")
        for row in reader:
            if not row:
                continue
            if len(row) != 3:
                raise FormatError(f"{path}: malformed row {row!r}")
            xs, ys = series.setdefault(row[2], ([], []))
            xs.append(float(row[0]))
            ys.append(float(row[1]))
    return series


def render(csv_path, png_path=None, title=None):
    """Draw one plot-ready CSV to PNG next to it (Agg backend, no display)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    csv_path = Path(csv_path)
    png_path = Path(png_path) if png_path else csv_path.with_suffix(".png")
    style = FIGURES.get(csv_path.stem, {})
    data = read_plot_csv(csv_path)
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    if style.get("bar"):
        width = 0.8 / max(len(data), 1)
        for i, (name, (xs, ys)) in enumerate(data.items()):
            pos = [k + i * width for k in range(len(xs))]
            ax.bar(pos, ys, width=width, label=name)
            ax.set_xticks([k + 0.4 - width / 2 for k in range(len(xs))])
            ax.set_xticklabels([f"{v:g}" for v in xs])
    else:
        for name, (xs, ys) in data.items():
            ax.plot(xs, ys, marker="." if len(xs) < 30 else None, lw=1, label=name)
    if style.get("logx"):
        ax.set_xscale("log")
    if style.get("logy"):
        ax.set_yscale("log")
    ax.set_xlabel(style.get("xlabel", "x"))
    ax.set_ylabel(style.get("ylabel", "y"))
    if title:
        ax.set_title(title)
    if 1 < len(data) <= 12:
        ax.legend(fontsize=7, frameon=False)
    fig.tight_layout()
    # no Software/date metadata, so reruns give identical bytes
    fig.savefig(png_path, dpi=110, metadata={"Software": None})
    plt.close(fig)
    return png_path
