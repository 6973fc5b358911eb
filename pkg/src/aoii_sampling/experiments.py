"""Parameter sweeps, the q x q1 cost grid, CSV I/O and SVG charts."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import ModelParams
from .simulator import SimConfig, simulate
from .solver import DEFAULT_TOL, relative_value_iteration
from .threshold import ThresholdPolicy, optimal_threshold

AXES = ("p", "S", "q", "q1")
MODES = ("bounds", "closed_form", "rvi", "simulate")

SWEEP_HEADER = ["axis", "axis_value", "v_lower", "v_opt", "v_upper", "cost_closed_form", "cost_rvi", "cost_sim", "stderr_sim"]
HEATMAP_HEADER = ["q", "q1", "v_opt", "cost_opt"]

AGREEMENT_RTOL = 1e-6
# Slack for "nondecreasing" comparisons between costs that agree to rounding.
MONOTONE_RTOL = 1e-12


def _grid(start: float, stop: float, step: float) -> list[float]:
    n = int(round((stop - start) / step))
    return [round(start + i * step, 10) for i in range(n + 1)]


DEFAULT_GRIDS = {
    "p": _grid(2, 40, 2),
    "S": _grid(0.5, 10, 0.5),
    "q": _grid(0.05, 0.95, 0.05),
    "q1": _grid(0.05, 0.95, 0.05),
}

# Base points of the published figures, keyed by swept axis.
FIGURE_BASES = {
    "p": {"S": 1.0, "q": 0.4, "q1": 0.3},
    "S": {"p": 20.0, "q": 0.4, "q1": 0.3},
    "q": {"S": 1.0, "p": 20.0, "q1": 0.3},
    "q1": {"S": 1.0, "p": 20.0, "q": 0.4},
}


@dataclass(frozen=True)
class SweepSpec:
    base: ModelParams
    axis: str
    values: tuple[float, ...]
    modes: frozenset[str] = frozenset({"bounds", "closed_form"})
    sim: SimConfig | None = None
    fixed_K: int | None = None
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"axis {self.axis!r} not one of {AXES}")
        unknown = set(self.modes) - set(MODES)
        if unknown:
            raise ValueError(f"unknown modes {sorted(unknown)}")
        vals = list(self.values)
        if not vals or any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("sweep values must be non-empty and strictly increasing")
        if "simulate" in self.modes and self.sim is None:
            raise ValueError("simulate mode needs a SimConfig")

    def point(self, value: float) -> ModelParams:
        return self.base.replace(**{self.axis: value, "K": self.fixed_K})

    def points(self) -> list[ModelParams]:
        """Every swept instance; raises InvalidParams on the first invalid one."""
        return [self.point(v) for v in self.values]


@dataclass(frozen=True)
class SweepRow:
    axis: str
    axis_value: float
    v_lower: int
    v_opt: int
    v_upper: int
    cost_closed_form: float
    cost_rvi: float | None = None
    cost_sim: float | None = None
    stderr_sim: float | None = None


def evaluate_point(spec: SweepSpec, index: int) -> SweepRow:
    value = spec.values[index]
    params = spec.point(value)
    search = optimal_threshold(params)
    cost_rvi = cost_sim = stderr_sim = None
    if "rvi" in spec.modes:
        cost_rvi = relative_value_iteration(params, tol=spec.tol).avg_cost
    if "simulate" in spec.modes:
        # Distinct, reproducible stream per sweep point.
        cfg = SimConfig(spec.sim.horizon, spec.sim.seed + index, spec.sim.burn_in, spec.sim.initial_state)
        stats = simulate(params, ThresholdPolicy(search.v_opt).as_mapping(params), cfg)
        cost_sim, stderr_sim = stats.avg_cost, stats.stderr_cost
    return SweepRow(spec.axis, value, search.v_lower, search.v_opt, search.v_upper, search.cost_opt, cost_rvi, cost_sim, stderr_sim)


def run_sweep(spec: SweepSpec, jobs: int = 1) -> list[SweepRow]:
    spec.points()
    indices = range(len(spec.values))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(evaluate_point, [spec] * len(indices), indices))
    else:
        rows = [evaluate_point(spec, i) for i in indices]
    return sorted(rows, key=lambda r: r.axis_value)


@dataclass(frozen=True)
class HeatmapCell:
    q: float
    q1: float
    v_opt: int
    cost_opt: float


def run_heatmap(qs, q1s, S: float, p: float, fixed_K: int | None = None) -> list[HeatmapCell]:
    cells = []
    for q in qs:
        for q1 in q1s:
            res = optimal_threshold(ModelParams.create(q, q1, S, p, fixed_K))
            cells.append(HeatmapCell(q, q1, res.v_opt, res.cost_opt))
    return cells


# --- checks -----------------------------------------------------------------


def _nondecreasing(xs, rtol=0.0) -> bool:
    return all(b >= a - rtol * max(abs(a), abs(b)) for a, b in zip(xs, xs[1:]))


def check_sweep(rows: list[SweepRow]) -> dict[str, bool]:
    """Sandwich, solver agreement and the monotone trend expected along the axis."""
    if not rows:
        return {}
    axis = rows[0].axis
    out = {"sandwich": all(r.v_lower <= r.v_opt <= r.v_upper for r in rows)}
    with_rvi = [r for r in rows if r.cost_rvi is not None]
    if with_rvi:
        out["rvi_agreement"] = all(
            abs(r.cost_rvi - r.cost_closed_form) <= AGREEMENT_RTOL * max(1.0, r.cost_closed_form) for r in with_rvi
        )
    v = [r.v_opt for r in rows]
    if axis in ("p", "q1"):
        out[f"v_opt nondecreasing in {axis}"] = _nondecreasing(v)
    elif axis == "S":
        out["v_opt nonincreasing in S"] = _nondecreasing(v[::-1])
    else:
        out["v_opt nondecreasing in q (q >= 1/2)"] = _nondecreasing([r.v_opt for r in rows if r.axis_value >= 0.5])
    return out


def heatmap_matrix(cells: list[HeatmapCell]):
    qs = sorted({c.q for c in cells})
    q1s = sorted({c.q1 for c in cells})
    C = np.full((len(qs), len(q1s)), np.nan)
    for c in cells:
        C[qs.index(c.q), q1s.index(c.q1)] = c.cost_opt
    return qs, q1s, C


def _unimodal(xs, rtol=MONOTONE_RTOL) -> bool:
    k = int(np.argmax(xs))
    return _nondecreasing(list(xs[: k + 1]), rtol) and _nondecreasing(list(xs[k:][::-1]), rtol)


def check_heatmap(cells: list[HeatmapCell]) -> dict[str, bool]:
    qs, q1s, C = heatmap_matrix(cells)
    argmax_q = [qs[int(np.argmax(C[:, j]))] for j in range(len(q1s))]
    return {
        "cost nondecreasing in q1": all(_nondecreasing(list(C[i]), MONOTONE_RTOL) for i in range(len(qs))),
        "cost unimodal in q": all(_unimodal(C[:, j]) for j in range(len(q1s))),
        "peak q nonincreasing in q1": _nondecreasing(argmax_q[::-1]),
    }


# --- CSV --------------------------------------------------------------------


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{x:.12g}"


def canonical(row: SweepRow) -> SweepRow:
    """``row`` with every float rounded to the 12 significant digits written to CSV."""
    def r(x):
        return None if x is None else float(fmt(x))

    return SweepRow(row.axis, r(row.axis_value), row.v_lower, row.v_opt, row.v_upper,
                    r(row.cost_closed_form), r(row.cost_rvi), r(row.cost_sim), r(row.stderr_sim))


def sweep_to_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for r in rows:
        w.writerow([r.axis, fmt(r.axis_value), r.v_lower, r.v_opt, r.v_upper,
                    fmt(r.cost_closed_form), fmt(r.cost_rvi), fmt(r.cost_sim), fmt(r.stderr_sim)])
    return buf.getvalue()


def _opt_float(s: str) -> float | None:
    return float(s) if s != "" else None


def sweep_from_csv(text: str) -> list[SweepRow]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != SWEEP_HEADER:
        raise ValueError(f"unexpected sweep header {reader.fieldnames}")
    return [
        SweepRow(d["axis"], float(d["axis_value"]), int(d["v_lower"]), int(d["v_opt"]), int(d["v_upper"]),
                 float(d["cost_closed_form"]), _opt_float(d["cost_rvi"]), _opt_float(d["cost_sim"]),
                 _opt_float(d["stderr_sim"]))
        for d in reader
    ]


def heatmap_to_csv(cells: list[HeatmapCell]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEATMAP_HEADER)
    for c in cells:
        w.writerow([fmt(c.q), fmt(c.q1), c.v_opt, fmt(c.cost_opt)])
    return buf.getvalue()


def heatmap_from_csv(text: str) -> list[HeatmapCell]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != HEATMAP_HEADER:
        raise ValueError(f"unexpected heatmap header {reader.fieldnames}")
    return [HeatmapCell(float(d["q"]), float(d["q1"]), int(d["v_opt"]), float(d["cost_opt"])) for d in reader]


# --- SVG --------------------------------------------------------------------

WIDTH, HEIGHT = 800, 600
MARGIN = {"left": 70, "right": 150, "top": 40, "bottom": 60}
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]


def _ticks(lo: float, hi: float, n: int = 6) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / (n - 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    return [round(start + i * step, 10) for i in range(int((hi - start) / step + 1e-9) + 1)]


def line_chart_svg(x: list[float], series: dict[str, list[float]], xlabel: str, ylabel: str, title: str = "") -> str:
    """Self-contained SVG line chart, one polyline per series."""
    plot_w = WIDTH - MARGIN["left"] - MARGIN["right"]
    plot_h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
    ys = [y for vals in series.values() for y in vals]
    xlo, xhi = min(x), max(x)
    ylo, yhi = min(0.0, min(ys)), max(ys)
    if xhi == xlo:
        xhi = xlo + 1.0
    if yhi == ylo:
        yhi = ylo + 1.0

    def px(v):
        return MARGIN["left"] + (v - xlo) / (xhi - xlo) * plot_w

    def py(v):
        return MARGIN["top"] + plot_h - (v - ylo) / (yhi - ylo) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{title}</text>',
    ]
    x0, y0 = MARGIN["left"], MARGIN["top"] + plot_h
    out.append(f'<line x1="{x0}" y1="{y0}" x2="{x0 + plot_w}" y2="{y0}" stroke="black"/>')
    out.append(f'<line x1="{x0}" y1="{MARGIN["top"]}" x2="{x0}" y2="{y0}" stroke="black"/>')
    for t in _ticks(xlo, xhi):
        out.append(f'<line x1="{px(t):.2f}" y1="{y0}" x2="{px(t):.2f}" y2="{y0 + 5}" stroke="black"/>')
        out.append(f'<text x="{px(t):.2f}" y="{y0 + 20}" text-anchor="middle" font-family="sans-serif" font-size="12">{t:g}</text>')
    for t in _ticks(ylo, yhi):
        out.append(f'<line x1="{x0 - 5}" y1="{py(t):.2f}" x2="{x0}" y2="{py(t):.2f}" stroke="black"/>')
        out.append(f'<text x="{x0 - 8}" y="{py(t) + 4:.2f}" text-anchor="end" font-family="sans-serif" font-size="12">{t:g}</text>')
    out.append(f'<text x="{x0 + plot_w / 2}" y="{HEIGHT - 15}" text-anchor="middle" font-family="sans-serif" font-size="14">{xlabel}</text>')
    out.append(f'<text x="18" y="{MARGIN["top"] + plot_h / 2}" text-anchor="middle" font-family="sans-serif" font-size="14" '
               f'transform="rotate(-90 18 {MARGIN["top"] + plot_h / 2})">{ylabel}</text>')
    for k, (name, vals) in enumerate(series.items()):
        color = COLORS[k % len(COLORS)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, vals))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{pts}"/>')
        ly = MARGIN["top"] + 20 * k + 10
        lx = WIDTH - MARGIN["right"] + 15
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 25}" y="{ly + 4}" font-family="sans-serif" font-size="12">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def sweep_svg(rows: list[SweepRow]) -> str:
    axis = rows[0].axis
    x = [r.axis_value for r in rows]
    series = {
        "v_lower": [r.v_lower for r in rows],
        "v_opt": [r.v_opt for r in rows],
        "v_upper": [r.v_upper for r in rows],
    }
    return line_chart_svg(x, series, axis, "threshold", f"Optimal threshold and bounds vs {axis}")


def _shade(t: float) -> str:
    # White-to-blue ramp.
    t = 0.0 if math.isnan(t) else min(max(t, 0.0), 1.0)
    r = int(255 - t * (255 - 31))
    g = int(255 - t * (255 - 119))
    b = int(255 - t * (255 - 180))
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap_svg(cells: list[HeatmapCell], title: str = "Optimal average cost") -> str:
    qs, q1s, C = heatmap_matrix(cells)
    plot_w = WIDTH - MARGIN["left"] - MARGIN["right"]
    plot_h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
    cw, ch = plot_w / len(q1s), plot_h / len(qs)
    lo, hi = np.nanmin(C), np.nanmax(C)
    span = hi - lo if hi > lo else 1.0
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{title}</text>',
    ]
    for i, q in enumerate(qs):
        for j, q1 in enumerate(q1s):
            x = MARGIN["left"] + j * cw
            y = MARGIN["top"] + plot_h - (i + 1) * ch
            out.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{cw:.2f}" height="{ch:.2f}" '
                       f'fill="{_shade((C[i, j] - lo) / span)}"><title>q={q:g} q1={q1:g} cost={C[i, j]:.6g}</title></rect>')
    for j, q1 in enumerate(q1s):
        out.append(f'<text x="{MARGIN["left"] + (j + 0.5) * cw:.2f}" y="{HEIGHT - MARGIN["bottom"] + 18}" '
                   f'text-anchor="middle" font-family="sans-serif" font-size="10">{q1:g}</text>')
    for i, q in enumerate(qs):
        out.append(f'<text x="{MARGIN["left"] - 6}" y="{MARGIN["top"] + plot_h - (i + 0.5) * ch + 4:.2f}" '
                   f'text-anchor="end" font-family="sans-serif" font-size="10">{q:g}</text>')
    out.append(f'<text x="{MARGIN["left"] + plot_w / 2}" y="{HEIGHT - 15}" text-anchor="middle" font-family="sans-serif" font-size="14">q1</text>')
    out.append(f'<text x="18" y="{MARGIN["top"] + plot_h / 2}" text-anchor="middle" font-family="sans-serif" font-size="14" '
               f'transform="rotate(-90 18 {MARGIN["top"] + plot_h / 2})">q</text>')
    lx = WIDTH - MARGIN["right"] + 30
    for k in range(11):
        t = k / 10
        y = MARGIN["top"] + plot_h - (k + 1) * plot_h / 11
        out.append(f'<rect x="{lx}" y="{y:.2f}" width="20" height="{plot_h / 11:.2f}" fill="{_shade(t)}"/>')
        out.append(f'<text x="{lx + 26}" y="{y + plot_h / 22 + 4:.2f}" font-family="sans-serif" font-size="10">{lo + t * span:.3g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_text(path: str | Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path
