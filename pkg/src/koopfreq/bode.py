"""Frequency sweeps, Bode tables, and deterministic CSV/SVG emitters.

Tables are plain rows of (omega, H, gain, phase, method, err, status).
Gain is 20*log10|H| with -inf as the sentinel for an exactly zero response;
such rows (and failed rows) render as gaps. Phase is unwrapped along
increasing omega over the plottable rows. Output is byte-deterministic for
a given table: fixed float formats, no environment-dependent content.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import expr as ex
from . import response as rsp
from .sim import NonFiniteState, integrate, detect_steady_state
from .system import PlantSpec, SkewSystem

__all__ = ["GridSpec", "BodeRow", "BodeTable", "sweep",
           "emit_csv", "read_csv", "emit_svg"]

CSV_HEADER = "omega,re_H,im_H,gain_db,phase_deg,method,err,status"

_PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
            "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"]

GAIN_FLOOR_DB = -200.0


@dataclass(frozen=True)
class GridSpec:
    """Frequency grid, log-spaced by default."""

    omega_min: float
    omega_max: float
    points: int
    spacing: str = "log"

    def __post_init__(self):
        if not (0 < self.omega_min < self.omega_max):
            raise ValueError("need 0 < omega_min < omega_max")
        if self.points < 2:
            raise ValueError("need at least 2 grid points")
        if self.spacing not in ("log", "linear"):
            raise ValueError(f"bad spacing {self.spacing!r}")

    def omegas(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.omega_min, self.omega_max, self.points)
        return np.linspace(self.omega_min, self.omega_max, self.points)


@dataclass
class BodeRow:
    omega: float
    value: complex | None
    gain_db: float
    phase_deg: float
    method: str
    err: float
    status: str  # ok | not_steady | diverged | cross_check_failed

    @classmethod
    def ok(cls, omega: float, value: complex, method: str, err: float,
           status: str = "ok") -> "BodeRow":
        mag = abs(value)
        gain = 20 * math.log10(mag) if mag > 0 else -math.inf
        phase = math.degrees(math.atan2(value.imag, value.real)) if mag > 0 else 0.0
        return cls(omega, value, gain, phase, method, err, status)

    @classmethod
    def failed(cls, omega: float, status: str, method: str = "") -> "BodeRow":
        return cls(omega, None, math.nan, math.nan, method, math.nan, status)


@dataclass
class BodeTable:
    plant_name: str
    observable_label: str
    order: rsp.OrderTag
    rows: list[BodeRow] = field(default_factory=list)

    @property
    def label(self) -> str:
        return f"{self.order.label}({self.observable_label})"

    def finish(self) -> "BodeTable":
        """Sort by omega and unwrap phase across the plottable rows."""
        self.rows.sort(key=lambda r: r.omega)
        plot = [r for r in self.rows if r.status == "ok" and r.value is not None
                and abs(r.value) > 0]
        if len(plot) > 1:
            unwrapped = np.degrees(np.unwrap(np.radians([r.phase_deg for r in plot])))
            for r, p in zip(plot, unwrapped):
                r.phase_deg = float(p)
        return self


def sweep(plant: PlantSpec, orders: Sequence[rsp.OrderTag], grid: GridSpec,
          u0: complex = 1.0, methods: Sequence[str] = ("harm", "abel"),
          observable: ex.Expr | None = None,
          horizon_periods: float = 60.0, min_horizon: float = 0.0,
          dt: float | None = None, window: int = 8, tol: float = 1e-7,
          cross_tol: float = 1e-2, dmd_delay: int = 8) -> list[BodeTable]:
    """Sweep the grid and build one table per requested order.

    Each point integrates once and feeds every order/estimator. The first
    requested method provides the tabulated value; any further methods are
    cross-checked against it and disagreement beyond cross_tol marks the
    row cross_check_failed (the value is still recorded).
    """
    if not methods:
        raise ValueError("need at least one method")
    g_label = str(observable if observable is not None else plant.observable)
    tables = {o: BodeTable(plant.name, g_label, o) for o in orders}

    for omega in grid.omegas():
        sysw = SkewSystem(plant, float(omega), u0)
        T = max(horizon_periods * sysw.period, min_horizon)
        step = dt if dt is not None else sysw.period / 256
        step = min(step, sysw.period / 64)
        try:
            traj = integrate(sysw, [0.0] * plant.dim, T, step, observable)
        except NonFiniteState:
            for o in orders:
                tables[o].rows.append(BodeRow.failed(float(omega), "diverged"))
            continue
        steady = detect_steady_state(traj, tol)
        for o in orders:
            try:
                results = rsp.estimate(traj, o, methods, window, tol,
                                       dmd_delay=dmd_delay, steady=steady)
            except rsp.NotSteady:
                tables[o].rows.append(BodeRow.failed(float(omega), "not_steady"))
                continue
            primary = results[methods[0]]
            status = "ok"
            err = primary.err_estimate
            for m in methods[1:]:
                ok, rep = rsp.cross_check(primary, results[m], cross_tol)
                err = max(err, results[m].err_estimate, rep.gap)
                if not ok:
                    status = "cross_check_failed"
            tables[o].rows.append(BodeRow.ok(float(omega), primary.value,
                                             methods[0], err, status))

    return [tables[o].finish() for o in orders]


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    if x != x:  # nan -> empty field
        return ""
    if x == -math.inf:
        return ""
    return f"{x:.15g}"


def emit_csv(table: BodeTable, path) -> None:
    """Write the table; 15 significant digits, LF endings, fixed header."""
    with open(path, "w", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in table.rows:
            re_s = _fmt(r.value.real) if r.value is not None else ""
            im_s = _fmt(r.value.imag) if r.value is not None else ""
            fh.write(",".join([
                _fmt(r.omega), re_s, im_s, _fmt(r.gain_db), _fmt(r.phase_deg),
                r.method, _fmt(r.err), r.status]) + "\n")


def read_csv(path, order: rsp.OrderTag | None = None,
             plant_name: str = "", observable_label: str = "") -> BodeTable:
    """Parse a table written by emit_csv back into memory."""
    table = BodeTable(plant_name, observable_label,
                      order if order is not None else rsp.OrderTag.harmonic(1))
    with open(path, "r", newline="") as fh:
        header = fh.readline().rstrip("\n")
        if header != CSV_HEADER:
            raise ValueError(f"unexpected header {header!r}")
        for line in fh:
            parts = line.rstrip("\n").split(",")
            if len(parts) != 8:
                raise ValueError(f"bad row {line!r}")
            omega = float(parts[0])
            value = complex(float(parts[1]), float(parts[2])) if parts[1] else None
            gain = float(parts[3]) if parts[3] else -math.inf
            phase = float(parts[4]) if parts[4] else math.nan
            err = float(parts[6]) if parts[6] else math.nan
            if value is None and parts[7] != "ok":
                gain = math.nan
                phase = math.nan
            table.rows.append(BodeRow(omega, value, gain, phase,
                                      parts[5], err, parts[7]))
    return table


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------

_W, _H = 860, 640
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 30, 40, 45
_GAP = 50


def _ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / target
    mag = 10 ** math.floor(math.log10(raw))
    for mult in (1, 2, 5, 10):
        if raw <= mult * mag:
            step = mult * mag
            break
    first = math.ceil(lo / step) * step
    out = []
    v = first
    while v <= hi + 1e-9 * span:
        out.append(round(v, 12))
        v += step
    return out


class _Panel:
    def __init__(self, x0, y0, w, h, wmin, wmax, ymin, ymax):
        self.x0, self.y0, self.w, self.h = x0, y0, w, h
        self.lwmin, self.lwmax = math.log10(wmin), math.log10(wmax)
        self.ymin, self.ymax = ymin, ymax

    def px(self, omega: float) -> float:
        f = (math.log10(omega) - self.lwmin) / (self.lwmax - self.lwmin)
        return self.x0 + f * self.w

    def py(self, y: float) -> float:
        f = (y - self.ymin) / (self.ymax - self.ymin)
        return self.y0 + self.h - f * self.h

    def frame(self, out: list, ylabel: str):
        out.append(f'<rect x="{self.x0:.2f}" y="{self.y0:.2f}" width="{self.w:.2f}" '
                   f'height="{self.h:.2f}" fill="none" stroke="#333" stroke-width="1"/>')
        k0 = math.ceil(self.lwmin - 1e-9)
        k1 = math.floor(self.lwmax + 1e-9)
        for k in range(k0, k1 + 1):
            x = self.px(10.0 ** k)
            out.append(f'<line x1="{x:.2f}" y1="{self.y0:.2f}" x2="{x:.2f}" '
                       f'y2="{self.y0 + self.h:.2f}" stroke="#ddd" stroke-width="1"/>')
            label = f"1e{k}" if k not in (0, 1) else ("1" if k == 0 else "10")
            out.append(f'<text x="{x:.2f}" y="{self.y0 + self.h + 16:.2f}" '
                       f'font-size="11" text-anchor="middle">{label}</text>')
        for tv in _ticks(self.ymin, self.ymax):
            yy = self.py(tv)
            out.append(f'<line x1="{self.x0:.2f}" y1="{yy:.2f}" '
                       f'x2="{self.x0 + self.w:.2f}" y2="{yy:.2f}" '
                       f'stroke="#eee" stroke-width="1"/>')
            out.append(f'<text x="{self.x0 - 6:.2f}" y="{yy + 4:.2f}" font-size="11" '
                       f'text-anchor="end">{tv:g}</text>')
        out.append(f'<text x="{self.x0 - 52:.2f}" y="{self.y0 + self.h / 2:.2f}" '
                   f'font-size="12" text-anchor="middle" '
                   f'transform="rotate(-90 {self.x0 - 52:.2f} {self.y0 + self.h / 2:.2f})"'
                   f'>{ylabel}</text>')

    def path(self, pts: list[tuple[float, float, bool]], color: str) -> str:
        d = []
        pen_up = True
        for omega, y, good in pts:
            if not good:
                pen_up = True
                continue
            cmd = "M" if pen_up else "L"
            d.append(f"{cmd}{self.px(omega):.2f} {self.py(y):.2f}")
            pen_up = False
        return (f'<path d="{" ".join(d)}" fill="none" stroke="{color}" '
                f'stroke-width="1.5"/>') if d else ""


def emit_svg(tables: Sequence[BodeTable], path, title: str | None = None) -> None:
    """Self-contained two-panel Bode figure: gain on top, phase below.

    One path element per table per panel, colored from a fixed palette in
    table order; rows that failed or have zero response break the line.
    """
    if not tables:
        raise ValueError("need at least one table")
    wmin = min(r.omega for t in tables for r in t.rows)
    wmax = max(r.omega for t in tables for r in t.rows)
    if not 0 < wmin < wmax:
        raise ValueError("tables must span a positive frequency range")

    def plottable(r: BodeRow) -> bool:
        return (r.status == "ok" and r.value is not None and abs(r.value) > 0
                and r.gain_db >= GAIN_FLOOR_DB)

    gains = [r.gain_db for t in tables for r in t.rows if plottable(r)]
    phases = [r.phase_deg for t in tables for r in t.rows if plottable(r)]
    if not gains:
        gains, phases = [0.0], [0.0]
    gpad = max(3.0, 0.06 * (max(gains) - min(gains)))
    ppad = max(5.0, 0.06 * (max(phases) - min(phases)))

    panel_w = _W - _MARGIN_L - _MARGIN_R
    panel_h = (_H - _MARGIN_T - _MARGIN_B - _GAP) / 2
    top = _Panel(_MARGIN_L, _MARGIN_T, panel_w, panel_h, wmin, wmax,
                 min(gains) - gpad, max(gains) + gpad)
    bot = _Panel(_MARGIN_L, _MARGIN_T + panel_h + _GAP, panel_w, panel_h,
                 wmin, wmax, min(phases) - ppad, max(phases) + ppad)

    out: list[str] = []
    out.append(f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
               f'viewBox="0 0 {_W} {_H}">')
    out.append(f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>')
    if title is None:
        title = f"{tables[0].plant_name}: frequency response"
    out.append(f'<text x="{_W / 2:.2f}" y="24" font-size="15" '
               f'text-anchor="middle">{title}</text>')

    top.frame(out, "gain (dB)")
    bot.frame(out, "phase (deg)")
    out.append(f'<text x="{_MARGIN_L + panel_w / 2:.2f}" y="{_H - 10:.2f}" '
               f'font-size="12" text-anchor="middle">omega (rad/s)</text>')

    for i, t in enumerate(tables):
        color = _PALETTE[i % len(_PALETTE)]
        gpts = [(r.omega, r.gain_db, plottable(r)) for r in t.rows]
        ppts = [(r.omega, r.phase_deg, plottable(r)) for r in t.rows]
        p1 = top.path(gpts, color)
        p2 = bot.path(ppts, color)
        if p1:
            out.append(p1)
        if p2:
            out.append(p2)
        ly = _MARGIN_T + 16 + 16 * i
        lx = _MARGIN_L + panel_w - 150
        out.append(f'<line x1="{lx:.2f}" y1="{ly - 4:.2f}" x2="{lx + 22:.2f}" '
                   f'y2="{ly - 4:.2f}" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{lx + 28:.2f}" y="{ly:.2f}" font-size="12">{t.label}</text>')

    out.append("</svg>")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(out) + "\n")
