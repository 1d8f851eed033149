"""Result artifacts: CSV traces and summaries, SVG figures, atomic bundles.

Bundle layout under the output directory::

    config.yaml                  fully resolved configuration
    <strategy>/rep<r>/trace.csv  one row per acquisition
    <strategy>/rep<r>/hyper.yaml final outer-GP hyperparameters
    summary.csv                  mean/std RMSE on the shared cost grid
    fidelity_hist.csv            selected-fidelity counts per strategy
    failures.csv                 repetitions that raised
    plots/rmse_vs_cost.svg
    plots/fidelity_hist.svg

Floats are written with 17 significant digits so they round-trip exactly.
"""

from __future__ import annotations

import csv
import io
import os
import shutil
import tempfile
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np
import yaml

SUMMARY_HEADER = ["strategy", "cost", "rmse_mean", "rmse_std", "n_runs"]
HIST_HEADER = ["strategy", "bin_lo", "bin_hi", "count"]
FAILURE_HEADER = ["strategy", "repetition", "error"]
COLORS = {"mfcv": "#1f77b4", "hf": "#d62728", "sobol": "#2ca02c"}
_FALLBACK_COLORS = ["#9467bd", "#8c564b", "#e377c2", "#7f7f7f"]


def fmt(v) -> str:
    """17-significant-digit float formatting; integers stay integral."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def trace_header(dim: int) -> list[str]:
    return (
        ["iteration", "batch_index"]
        + [f"x_{i}" for i in range(dim)]
        + ["s", "y", "query_cost", "cumulative_cost", "rmse", "fallback_flag"]
    )


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return buf.getvalue()


def trace_csv(record) -> str:
    """CSV text of one run; the initial (seed-only) RMSE is not a row."""
    rows = [
        [r.iteration, r.batch_index, *r.x, r.s, r.y, r.query_cost, r.cumulative_cost, r.rmse, r.fallback]
        for r in record.rows
    ]
    return _csv_text(trace_header(record.dim), rows)


def read_trace(path) -> dict:
    """Columns of a trace file as float arrays, keyed by header name."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = np.array(body, dtype=float).reshape(len(body), len(header))
    return {name: cols[:, i] for i, name in enumerate(header)}


def summary_csv(summary: dict) -> str:
    rows = []
    for strategy, s in summary.items():
        for c, m, sd in zip(s["cost"], s["mean"], s["std"]):
            rows.append([strategy, c, m, sd, s["n"]])
    return _csv_text(SUMMARY_HEADER, rows)


def histogram_csv(histograms: dict) -> str:
    rows = []
    for strategy, (lo, hi, counts) in histograms.items():
        rows.extend([strategy, a, b, int(c)] for a, b, c in zip(lo, hi, counts))
    return _csv_text(HIST_HEADER, rows)


def failures_csv(failures: dict) -> str:
    rows = [[s, rep, err] for s, items in failures.items() for rep, err in items]
    return _csv_text(FAILURE_HEADER, rows)


# -- SVG -------------------------------------------------------------------

W, H = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 150, 30, 50


def _color(strategy, i):
    return COLORS.get(strategy, _FALLBACK_COLORS[i % len(_FALLBACK_COLORS)])


def _svg(body: list[str], title: str) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">'
    )
    return "\n".join(
        [head, '<rect width="100%" height="100%" fill="white"/>',
         f'<text x="{W / 2:.1f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
         *body, "</svg>", ""]
    )


def _ticks_log(lo, hi):
    a, b = int(np.floor(np.log10(lo))), int(np.ceil(np.log10(hi)))
    return [10.0**k for k in range(a, b + 1)]


def _legend(entries) -> list[str]:
    out = []
    x0 = W - RIGHT + 15
    for i, (label, color) in enumerate(entries):
        y = TOP + 20 + 20 * i
        out.append(f'<rect x="{x0}" y="{y - 9}" width="18" height="10" fill="{color}" fill-opacity="0.8"/>')
        out.append(f'<text x="{x0 + 24}" y="{y}">{escape(label)}</text>')
    return out


def rmse_plot_svg(summary: dict) -> str:
    """Mean RMSE with a shaded one-sigma band against cumulative cost, log y-axis."""
    if not summary:
        raise ValueError("summary is empty")
    costs = np.concatenate([s["cost"] for s in summary.values()])
    means = np.concatenate([s["mean"] for s in summary.values()])
    uppers = np.concatenate([s["mean"] + s["std"] for s in summary.values()])
    positive = means[means > 0]
    # Band edges at or below zero are clipped to half the smallest mean.
    floor = positive.min() / 2 if positive.size else 1e-12
    lows = np.concatenate([s["mean"] - s["std"] for s in summary.values()])
    ticks = _ticks_log(max(floor, lows.min()), max(uppers.max(), floor))
    if len(ticks) == 1:
        ticks.append(ticks[0] * 10)
    y_lo, y_hi = ticks[0], ticks[-1]
    c_lo, c_hi = 0.0, float(costs.max()) if costs.max() > 0 else 1.0
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM

    def px(c):
        return LEFT + pw * (np.asarray(c) - c_lo) / (c_hi - c_lo)

    def py(v):
        v = np.log10(np.maximum(np.asarray(v, dtype=float), y_lo))
        return TOP + ph * (1 - (v - np.log10(y_lo)) / (np.log10(y_hi) - np.log10(y_lo)))

    body = [f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for t in ticks:
        y = float(py(t))
        body.append(f'<line x1="{LEFT - 4}" y1="{y:.2f}" x2="{LEFT}" y2="{y:.2f}" stroke="black"/>')
        body.append(f'<text x="{LEFT - 6}" y="{y + 4:.2f}" text-anchor="end">{t:.0e}</text>')
    for t in np.linspace(c_lo, c_hi, 5):
        x = float(px(t))
        body.append(f'<line x1="{x:.2f}" y1="{TOP + ph}" x2="{x:.2f}" y2="{TOP + ph + 4}" stroke="black"/>')
        body.append(f'<text x="{x:.2f}" y="{TOP + ph + 18}" text-anchor="middle">{t:.4g}</text>')
    body.append(f'<text x="{LEFT + pw / 2:.1f}" y="{H - 10}" text-anchor="middle">cumulative cost</text>')
    body.append(
        f'<text x="16" y="{TOP + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {TOP + ph / 2:.1f})">RMSE at s = 1 (log scale)</text>'
    )
    legend = []
    for i, (strategy, s) in enumerate(summary.items()):
        color = _color(strategy, i)
        x = px(s["cost"])
        lo, hi, mid = py(s["mean"] - s["std"]), py(s["mean"] + s["std"]), py(s["mean"])
        g = [f'<g class="series" data-strategy="{escape(strategy)}">']
        if len(x) == 1:
            g.append(f'<circle cx="{x[0]:.2f}" cy="{mid[0]:.2f}" r="4" fill="{color}"/>')
        else:
            pts = [f"{a:.2f},{b:.2f}" for a, b in zip(x, hi)]
            pts += [f"{a:.2f},{b:.2f}" for a, b in zip(x[::-1], lo[::-1])]
            g.append(f'<polygon class="band" points="{" ".join(pts)}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
            line = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(x, mid))
            g.append(f'<polyline class="mean" points="{line}" fill="none" stroke="{color}" stroke-width="2"/>')
        g.append("</g>")
        body.extend(g)
        legend.append((f"{strategy} (n={s['n']})", color))
    body.extend(_legend(legend))
    return _svg(body, "RMSE versus cumulative cost")


def histogram_svg(histograms: dict) -> str:
    """Grouped bar chart of selected-fidelity counts per strategy."""
    if not histograms:
        raise ValueError("no histograms to plot")
    first = next(iter(histograms.values()))
    lo, hi = np.asarray(first[0]), np.asarray(first[1])
    nb = len(lo)
    top = max(1, max(int(np.max(h[2])) if len(h[2]) else 0 for h in histograms.values()))
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM
    slot = pw / max(nb, 1)
    width = 0.8 * slot / len(histograms)
    body = [f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for t in np.unique(np.linspace(0, top, 5).round().astype(int)):
        y = TOP + ph * (1 - t / top)
        body.append(f'<text x="{LEFT - 6}" y="{y + 4:.2f}" text-anchor="end">{t}</text>')
    for j in range(nb):
        label = f"{lo[j]:g}" if lo[j] == hi[j] else f"{lo[j]:g}-{hi[j]:g}"
        body.append(
            f'<text x="{LEFT + slot * (j + 0.5):.2f}" y="{TOP + ph + 18}" text-anchor="middle" '
            f'font-size="10">{label}</text>'
        )
    legend = []
    for i, (strategy, (_, _, counts)) in enumerate(histograms.items()):
        color = _color(strategy, i)
        body.append(f'<g class="series" data-strategy="{escape(strategy)}">')
        for j, c in enumerate(counts):
            h = ph * int(c) / top
            x = LEFT + slot * j + 0.1 * slot + i * width
            body.append(f'<rect x="{x:.2f}" y="{TOP + ph - h:.2f}" width="{width:.2f}" height="{h:.2f}" fill="{color}"/>')
        body.append("</g>")
        legend.append((strategy, color))
    body.append(f'<text x="{LEFT + pw / 2:.1f}" y="{H - 10}" text-anchor="middle">selected fidelity s</text>')
    body.extend(_legend(legend))
    return _svg(body, "Fidelity levels selected")


def emit_plots(summary: dict, histograms: dict, directory) -> list[Path]:
    """Write ``rmse_vs_cost.svg`` and ``fidelity_hist.svg`` into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = [directory / "rmse_vs_cost.svg", directory / "fidelity_hist.svg"]
    paths[0].write_text(rmse_plot_svg(summary))
    paths[1].write_text(histogram_svg(histograms))
    return paths


# -- bundle ----------------------------------------------------------------


def trace_path(root, strategy: str, repetition: int) -> Path:
    return Path(root) / strategy / f"rep{repetition}" / "trace.csv"


def prepare_output(out) -> Path:
    """Create a temporary sibling of ``out``; fails early if it cannot be written."""
    out = Path(out).resolve()
    out.parent.mkdir(parents=True, exist_ok=True)
    if out.exists() and not out.is_dir():
        raise OSError(f"output path {out} exists and is not a directory")
    return Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))


def write_bundle(result, out, staging: Path | None = None) -> Path:
    """Write every artifact of ``result`` and move it to ``out`` in one rename.

    An existing ``out`` directory is replaced.
    """
    out = Path(out).resolve()
    tmp = prepare_output(out) if staging is None else Path(staging)
    try:
        (tmp / "config.yaml").write_text(result.config.to_yaml())
        for strategy, records in result.runs.items():
            for rec in records:
                path = trace_path(tmp, strategy, rec.repetition)
                path.parent.mkdir(parents=True, exist_ok=True)
                path.write_text(trace_csv(rec))
                (path.parent / "hyper.yaml").write_text(
                    yaml.safe_dump(
                        {"initial_rmse": float(rec.initial_rmse), "final_hyperparameters": rec.final_hyper},
                        sort_keys=False,
                    )
                )
        (tmp / "summary.csv").write_text(summary_csv(result.summary))
        (tmp / "fidelity_hist.csv").write_text(histogram_csv(result.histograms))
        (tmp / "failures.csv").write_text(failures_csv(result.failures))
        if result.summary:
            emit_plots(result.summary, result.histograms, tmp / "plots")
        if out.exists():
            old = Path(tempfile.mkdtemp(prefix=f".{out.name}.old.", dir=out.parent))
            os.replace(out, old / out.name)
            os.replace(tmp, out)
            shutil.rmtree(old, ignore_errors=True)
        else:
            os.replace(tmp, out)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return out
