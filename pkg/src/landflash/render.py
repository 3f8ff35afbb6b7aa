"""Static SVG/CSV reports built from the CSVs in a run directory.

Everything here reads CSVs only, so a report can be regenerated from a copied
run directory without rerunning any sampling.
"""

from __future__ import annotations

import colorsys
import csv
import json
import math
from pathlib import Path

import numpy as np

from .analysis import SQRT3, read_gray_area_csv

MAX_MARKERS = 5000
SUBSAMPLE_SEED = 5000
REPORT_DIR = "report"

EXPECTED = (
    "use_count_series.csv",
    "points/<ps>/ternary.csv",
    "points/<ps>/landau_<type>.csv",
    "grayarea/fp<n>_{below,above,combined}.csv",
    "samples.csv",
)

TYPE_COLOURS = ("#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02")


class MissingInputs(FileNotFoundError):
    def __init__(self, run_dir):
        lines = "\n  ".join(EXPECTED)
        super().__init__(f"{run_dir}: nothing to render; expected at least one of:\n  {lines}")


def _f(x: float) -> str:
    return f"{x:.3f}"


def _svg(width: float, height: float, body: list[str]) -> str:
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(width)}" height="{_f(height)}" '
            f'viewBox="0 0 {_f(width)} {_f(height)}">\n' + "\n".join(body) + "\n</svg>\n")


def _read_rows(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# --- ternary --------------------------------------------------------------------

def subsample(n: int, cap: int = MAX_MARKERS, seed: int = SUBSAMPLE_SEED) -> np.ndarray:
    """Sorted indices of at most ``cap`` items, fixed-seed so reruns agree."""
    if n <= cap:
        return np.arange(n)
    return np.sort(np.random.default_rng(seed).choice(n, size=cap, replace=False))


def ternary_svg(xy: np.ndarray, size: float = 400.0, cap: int = MAX_MARKERS) -> str:
    pad = 20.0
    h = size * SQRT3 / 2
    def to_px(x, y):
        return pad + x * size, pad + h - y * size
    corners = [to_px(0, 0), to_px(1, 0), to_px(0.5, SQRT3 / 2)]
    body = ['<polygon points="' + " ".join(f"{_f(a)},{_f(b)}" for a, b in corners)
            + '" fill="none" stroke="black" stroke-width="1"/>']
    for k, (a, b) in enumerate(corners):
        body.append(f'<text x="{_f(a)}" y="{_f(b + (14 if k < 2 else -6))}" font-size="12" '
                    f'text-anchor="middle">{k}</text>')
    for k in subsample(len(xy), cap):
        a, b = to_px(*xy[k])
        body.append(f'<circle cx="{_f(a)}" cy="{_f(b)}" r="1.5" fill="#333" fill-opacity="0.4"/>')
    return _svg(size + 2 * pad, h + 2 * pad, body)


def _ternary_xy(path: Path) -> np.ndarray:
    rows = _read_rows(path)
    return np.array([(float(r["x"]), float(r["y"])) for r in rows]).reshape(-1, 2)


def _samples_xy(path: Path) -> np.ndarray:
    rows = _read_rows(path)
    cols = [k for k in rows[0] if k.startswith("N_")] if rows else []
    if len(cols) != 3:
        return np.zeros((0, 2))
    w = np.array([[float(r[c]) for c in cols] for r in rows])
    w /= w.sum(axis=1, keepdims=True)
    return np.column_stack([w[:, 1] + w[:, 2] / 2, w[:, 2] * SQRT3 / 2])


# --- gray areas -----------------------------------------------------------------

def gray_colour(z: complex) -> str:
    """Hue from arg z, saturation from |z|, full value."""
    hue = (math.atan2(z.imag, z.real) / (2 * math.pi)) % 1.0
    sat = min(1.0, abs(z))
    r, g, b = colorsys.hsv_to_rgb(hue, sat, 1.0)
    return "#%02x%02x%02x" % (round(r * 255), round(g * 255), round(b * 255))


def gray_area_svg(mean: np.ndarray, cell: float = 12.0) -> str:
    n, m = mean.shape
    body = []
    for i in range(n):
        for j in range(m):
            body.append(f'<rect x="{_f(j * cell)}" y="{_f(i * cell)}" width="{_f(cell)}" '
                        f'height="{_f(cell)}" fill="{gray_colour(complex(mean[i, j]))}"/>')
    return _svg(m * cell, n * cell, body)


# --- line charts ----------------------------------------------------------------

def line_chart_svg(series: dict, xlabel: str, ylabel: str, width: float = 480.0,
                   height: float = 300.0) -> str:
    """``series`` maps a label to (x, y) arrays."""
    pad = 40.0
    xs = np.concatenate([np.asarray(x, float) for x, _ in series.values()])
    ys = np.concatenate([np.asarray(y, float) for _, y in series.values()])
    ys = ys[np.isfinite(ys)]
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = (float(ys.min()), float(ys.max())) if ys.size else (0.0, 1.0)
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1
    def px(x, y):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad), height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)
    body = [f'<rect x="{_f(pad)}" y="{_f(pad)}" width="{_f(width - 2 * pad)}" '
            f'height="{_f(height - 2 * pad)}" fill="none" stroke="black"/>',
            f'<text x="{_f(width / 2)}" y="{_f(height - 8)}" font-size="12" text-anchor="middle">{xlabel}</text>',
            f'<text x="12" y="{_f(height / 2)}" font-size="12" text-anchor="middle" '
            f'transform="rotate(-90 12 {_f(height / 2)})">{ylabel}</text>',
            f'<text x="{_f(pad)}" y="{_f(height - pad + 14)}" font-size="10">{x0:g}</text>',
            f'<text x="{_f(width - pad)}" y="{_f(height - pad + 14)}" font-size="10" text-anchor="end">{x1:g}</text>',
            f'<text x="{_f(pad - 4)}" y="{_f(height - pad)}" font-size="10" text-anchor="end">{y0:.3g}</text>',
            f'<text x="{_f(pad - 4)}" y="{_f(pad + 4)}" font-size="10" text-anchor="end">{y1:.3g}</text>']
    for k, (label, (x, y)) in enumerate(series.items()):
        pts = [px(a, b) for a, b in zip(x, y) if math.isfinite(b)]
        colour = TYPE_COLOURS[k % len(TYPE_COLOURS)]
        body.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="'
                    + " ".join(f"{_f(a)},{_f(b)}" for a, b in pts) + '"/>')
        body.append(f'<text x="{_f(width - pad + 4)}" y="{_f(pad + 14 * (k + 1))}" font-size="10" '
                    f'fill="{colour}">{label}</text>')
    return _svg(width + 40, height, body)


# --- driver ---------------------------------------------------------------------

def render_reports(run_dir) -> list[Path]:
    """Write SVGs and chart CSVs under ``<run_dir>/report``; returns the files written."""
    run = Path(run_dir)
    if not run.is_dir():
        raise MissingInputs(run)
    out = run / REPORT_DIR
    written: list[Path] = []

    def emit(name: str, text: str):
        out.mkdir(exist_ok=True)
        p = out / name
        p.write_text(text)
        written.append(p)

    series = run / "use_count_series.csv"
    if series.exists():
        rows = _read_rows(series)
        if rows:
            types = sorted(int(k[5:]) for k in rows[0] if k.startswith("frac_"))
            ps = [float(r["P_S"]) for r in rows]
            fr = {f"type {x}": (ps, [float(r[f"frac_{x}"]) for r in rows]) for x in types}
            lines = ["P_S," + ",".join(f"frac_{x}" for x in types) + "," + ",".join(f"N_{x}" for x in types)]
            for r in rows:
                lines.append(",".join([r["P_S"], *(r[f"frac_{x}"] for x in types), *(r[f"N_{x}"] for x in types)]))
            emit("fractions.csv", "\n".join(lines) + "\n")
            emit("fractions.svg", line_chart_svg(fr, "P_S", "land-use fraction"))

    points = sorted(p for p in (run / "points").glob("ps_*") if p.is_dir()) if (run / "points").is_dir() else []
    fe_lines = []
    for pdir in points:
        tag = pdir.name
        tern = pdir / "ternary.csv"
        if tern.exists():
            emit(f"ternary_{tag}.svg", ternary_svg(_ternary_xy(tern)))
        curves = {}
        for lf in sorted(pdir.glob("landau_*.csv")):
            x = lf.stem.split("_", 1)[1]
            rows = _read_rows(lf)
            b = [float(r["bin"]) for r in rows]
            f = [float(r["F"]) for r in rows]
            curves[f"type {x}"] = (b, f)
            fe_lines += [f"{tag[3:]},{x},{r['bin']},{r['F']}" for r in rows]
        if curves:
            emit(f"free_energy_{tag}.svg", line_chart_svg(curves, "N_X", "F"))
    if fe_lines:
        emit("free_energy.csv", "P_S,type,bin,F\n" + "\n".join(fe_lines) + "\n")

    if (run / "grayarea").is_dir():
        for g in sorted((run / "grayarea").glob("*.csv")):
            emit(f"grayarea_{g.stem}.svg", gray_area_svg(read_gray_area_csv(g).mean))

    single = run / "samples.csv"
    if single.exists() and not points:
        xy = _samples_xy(single)
        if len(xy):
            emit("ternary.svg", ternary_svg(xy))

    if not written:
        raise MissingInputs(run)
    manifest = run / "manifest.json"
    if manifest.exists():
        from .pipeline import write_manifest
        write_manifest(run, json.loads(manifest.read_text()).get("status", "complete"))
    return written
