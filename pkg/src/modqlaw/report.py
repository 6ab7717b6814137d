"""Trajectory CSV files and SVG diagnostic plots.

CSV columns, in order (angles in degrees, booleans as 0/1):

    t_s, a_km, e, i_deg, raan_deg, argp_deg, theta_deg, mass_kg, thrust_on,
    alpha_deg, beta_deg, V, Vdot, eta_r, eclipse, r_p_km
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .astro import EARTH, position_eci
from .propagator import DAY, TRAJECTORY_COLUMNS, Trajectory

_DEGREES = {"i", "raan", "argp", "theta", "alpha", "beta"}
_BOOLS = {"thrust_on", "eclipse"}
_UNITS = {"t": "s", "a": "km", "r_p": "km", "mass": "kg"}


def csv_header() -> list:
    out = []
    for name in TRAJECTORY_COLUMNS:
        unit = "deg" if name in _DEGREES else _UNITS.get(name)
        out.append(f"{name}_{unit}" if unit else name)
    return out


CSV_HEADER = tuple(csv_header())


def write_csv(traj: Trajectory, path) -> None:
    cols = []
    for name in TRAJECTORY_COLUMNS:
        col = traj[name]
        if name in _BOOLS:
            col = col.astype(int)
        elif name in _DEGREES:
            col = np.degrees(col)
        cols.append(col)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for row in zip(*cols):
            w.writerow([repr(int(v)) if isinstance(v, (np.integer, int)) else repr(float(v)) for v in row])


def read_csv(path) -> Trajectory:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"{path}: header does not match the trajectory format")
    data = np.array(rows[1:], dtype=float).reshape(-1, len(CSV_HEADER))
    cols = {}
    for k, name in enumerate(TRAJECTORY_COLUMNS):
        col = data[:, k]
        if name in _BOOLS:
            col = col.astype(bool)
        elif name in _DEGREES:
            col = np.radians(col)
        cols[name] = col
    return Trajectory(cols)


# plotting

_W, _H = 720, 260
_MARGIN = (70, 20, 30, 45)          # left, right, top, bottom
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")
_MAX_POINTS = 4000


def _ticks(lo: float, hi: float, n: int = 5) -> list:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 5, 10) if s * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    return [start + k * step for k in range(int((hi - start) / step + 1e-9) + 1)]


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def _thin(x, y):
    if len(x) <= _MAX_POINTS:
        return x, y
    idx = np.linspace(0, len(x) - 1, _MAX_POINTS).astype(int)
    return x[idx], y[idx]


def _panel(y0: float, title: str, xlabel: str, ylabel: str, series, logy=False, equal=False,
           height=_H) -> list:
    """SVG elements for one axes box whose top edge sits at y0."""
    left, right, top, bottom = _MARGIN
    pw, ph = _W - left - right, height - top - bottom
    xs = np.concatenate([s[1] for s in series])
    ys = np.concatenate([s[2] for s in series])
    if logy:
        ys = ys[ys > 0]
        ys = np.log10(ys) if len(ys) else np.array([0.0])
    finite = np.isfinite(ys)
    xlo, xhi = float(np.min(xs)), float(np.max(xs))
    ylo, yhi = (float(np.min(ys[finite])), float(np.max(ys[finite]))) if finite.any() else (0.0, 1.0)
    if xhi == xlo:
        xhi = xlo + 1.0
    if yhi == ylo:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    if equal:
        span = max(xhi - xlo, (yhi - ylo) * pw / ph)
        xc, yc = 0.5 * (xlo + xhi), 0.5 * (ylo + yhi)
        xlo, xhi = xc - span / 2, xc + span / 2
        ylo, yhi = yc - span * ph / pw / 2, yc + span * ph / pw / 2

    def px(x):
        return left + (x - xlo) / (xhi - xlo) * pw

    def py(y):
        return y0 + top + (yhi - y) / (yhi - ylo) * ph

    out = [f'<rect x="{left}" y="{y0 + top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
           f'<text x="{_W / 2}" y="{y0 + top - 8}" text-anchor="middle" font-size="13">{escape(title)}</text>',
           f'<text x="{left + pw / 2}" y="{y0 + height - 8}" text-anchor="middle" font-size="11">'
           f'{escape(xlabel)}</text>',
           f'<text x="14" y="{y0 + top + ph / 2}" font-size="11" text-anchor="middle" '
           f'transform="rotate(-90 14 {y0 + top + ph / 2})">{escape(ylabel)}</text>']
    for t in _ticks(xlo, xhi):
        out.append(f'<text x="{px(t):.1f}" y="{y0 + top + ph + 14}" font-size="10" '
                   f'text-anchor="middle">{_fmt(t)}</text>')
    for t in _ticks(ylo, yhi, 4):
        label = _fmt(10.0 ** t) if logy else _fmt(t)
        out.append(f'<line x1="{left}" x2="{left + pw}" y1="{py(t):.1f}" y2="{py(t):.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{left - 4}" y="{py(t) + 3:.1f}" font-size="10" text-anchor="end">{label}</text>')
    for k, (label, x, y) in enumerate(series):
        x, y = _thin(np.asarray(x, float), np.asarray(y, float))
        if logy:
            with np.errstate(divide="ignore", invalid="ignore"):
                y = np.where(y > 0, np.log10(np.where(y > 0, y, 1.0)), np.nan)
        pts, path = [], []
        for xv, yv in zip(x, y):
            if np.isfinite(yv):
                pts.append(f"{px(xv):.1f},{py(yv):.1f}")
            elif pts:
                path.append(pts)
                pts = []
        if pts:
            path.append(pts)
        color = _COLORS[k % len(_COLORS)]
        for seg in path:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1" points="{" ".join(seg)}"/>')
        if len(series) > 1:
            out.append(f'<text x="{left + pw - 6}" y="{y0 + top + 14 + 13 * k}" font-size="11" '
                       f'text-anchor="end" fill="{color}">{escape(label)}</text>')
    return out


def _figure(panels: list, height=_H) -> str:
    total = height * len(panels)
    body = []
    for k, p in enumerate(panels):
        body += _panel(k * height, height=height, **p)
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{total}" '
            f'viewBox="0 0 {_W} {total}" font-family="sans-serif">\n'
            f'<rect width="100%" height="100%" fill="white"/>\n' + "\n".join(body) + "\n</svg>\n")


def element_plot(traj: Trajectory) -> str:
    d = traj["t"] / DAY
    return _figure([
        dict(title="Semi-major axis", xlabel="time [days]", ylabel="a [km]", series=[("a", d, traj["a"])]),
        dict(title="Eccentricity", xlabel="time [days]", ylabel="e", series=[("e", d, traj["e"])]),
        dict(title="Inclination", xlabel="time [days]", ylabel="i [deg]",
             series=[("i", d, np.degrees(traj["i"]))]),
        dict(title="Argument of periapsis and RAAN", xlabel="time [days]", ylabel="[deg]",
             series=[("argp", d, np.degrees(np.unwrap(traj["argp"]))),
                     ("raan", d, np.degrees(np.unwrap(traj["raan"])))]),
    ])


def lyapunov_plot(traj: Trajectory) -> str:
    d = traj["t"] / DAY
    on = traj["thrust_on"]
    vdot = np.where(on, traj["Vdot"], np.nan)
    return _figure([
        dict(title="Lyapunov function", xlabel="time [days]", ylabel="V", logy=True, series=[("V", d, traj["V"])]),
        dict(title="Rate of change while thrusting", xlabel="time [days]", ylabel="dV/dt [1/s]",
             series=[("Vdot", d, vdot)]),
    ])


def effectivity_plot(traj: Trajectory) -> str:
    d = traj["t"] / DAY
    return _figure([dict(title="Relative effectivity", xlabel="time [days]", ylabel="eta_r",
                         series=[("eta_r", d, traj["eta_r"]),
                                 ("thrust on", d, traj["thrust_on"].astype(float))])])


def equatorial_plot(traj: Trajectory, r_earth: float = EARTH.r_earth) -> str:
    pos = np.array([position_eci(*row) for row in zip(traj["a"], traj["e"], traj["i"], traj["raan"],
                                                       traj["argp"], traj["theta"])])
    x, y = pos[:, 0] / r_earth, pos[:, 1] / r_earth
    ring = np.linspace(0, 2 * math.pi, 181)
    return _figure([dict(title="Trajectory projected in the equatorial plane (Earth radii)",
                         xlabel="x / R_e", ylabel="y / R_e", equal=True,
                         series=[("trajectory", x, y), ("Earth", np.cos(ring), np.sin(ring))])],
                   height=640)


PLOTS = {
    "elements.svg": element_plot,
    "lyapunov.svg": lyapunov_plot,
    "effectivity.svg": effectivity_plot,
    "equatorial.svg": equatorial_plot,
}


def write_plots(traj: Trajectory, out_dir) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, fn in PLOTS.items():
        p = out / name
        p.write_text(fn(traj))
        paths.append(p)
    return paths
