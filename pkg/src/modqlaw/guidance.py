"""Closed-loop guidance: law selection, relative effectivity, eclipse coasting, convergence."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .astro import EARTH, ELEMENT_NAMES, OrbitalElements, TargetSpec, angular_distance
from .classic import ClassicConfig, NullDirectionError, q_eval, thrust_direction
from .dynamics import SpacecraftParams, SpacecraftState, gauss_matrix
from .modified import ModifiedConfig, v_tilde_eval

log = logging.getLogger(__name__)

LAWS = ("classic", "modified")


@dataclass(frozen=True)
class CoastPolicy:
    eta_threshold: float = 0.0
    n_theta: int = 100
    eclipse_coast: bool = True

    def __post_init__(self):
        if not 0.0 <= self.eta_threshold < 1.0:
            raise ValueError("eta_threshold must lie in [0, 1)")
        if self.n_theta < 16:
            raise ValueError("n_theta must be at least 16")


@dataclass(frozen=True)
class ControllerConfig:
    law: str = "modified"
    classic: ClassicConfig = field(default_factory=ClassicConfig)
    modified: ModifiedConfig = field(default_factory=ModifiedConfig)
    coast: CoastPolicy = field(default_factory=CoastPolicy)

    def __post_init__(self):
        if self.law not in LAWS:
            raise ValueError(f"law must be one of {LAWS}, got {self.law!r}")


@dataclass(frozen=True)
class GuidanceCommand:
    thrust_on: bool
    direction: np.ndarray    # unit RTN; zeros when no descent direction exists
    alpha: float             # in-plane angle from the tangential axis toward radial
    beta: float              # out-of-plane elevation
    eta_r: float
    vdot: float              # V rate with the optimal direction at full thrust
    value: float             # V (or Q)
    converged: bool = False
    stationary: bool = False


def lyapunov_eval(el: OrbitalElements, target: TargetSpec, cfg: ControllerConfig, f: float,
                  mu: float = EARTH.mu) -> tuple[float, np.ndarray]:
    """(V, gradient over the five slow elements) of the selected law."""
    if cfg.law == "modified":
        ev = v_tilde_eval(el, target, f, cfg.modified, mu)
    else:
        ev = q_eval(el, target, cfg.classic, f, mu)
    return ev.value, ev.gradient


def _vdot_trig(el: OrbitalElements, g: np.ndarray, f: float, ct: np.ndarray, st: np.ndarray,
               mu: float) -> np.ndarray:
    a, e, i, argp = el.a, el.e, el.i, el.argp
    g0, g1, g2, g3, g4 = (float(x) for x in g)
    p = a * (1.0 - e * e)
    h = math.sqrt(mu * p)
    k = 2.0 * a * a / h
    eh = e * h
    r = p / (1.0 + e * ct)
    cw, sw = math.cos(argp), math.sin(argp)
    # components of Phi^T grad, grouped by trigonometric factor
    c1 = g0 * k * e + g1 * p / h
    col_r = c1 * st - (g4 * p / eh) * ct
    col_t = c1 * ct + g0 * k + (g1 / h) * r * (ct + e) + (g4 / eh) * (p + r) * st
    cn = g2 / h
    sn = (g3 - g4 * math.cos(i)) / (h * math.sin(i))
    # cos(theta + argp) and sin(theta + argp) expanded
    col_n = r * ((cn * cw + sn * sw) * ct + (sn * cw - cn * sw) * st)
    return -f * np.sqrt(col_r * col_r + col_t * col_t + col_n * col_n)


def _vdot_at(el: OrbitalElements, g: np.ndarray, f: float, th: np.ndarray, mu: float) -> np.ndarray:
    return _vdot_trig(el, g, f, np.cos(th), np.sin(th), mu)


@lru_cache(maxsize=8)
def _uniform_grid(n_theta: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    th = np.linspace(0.0, 2.0 * math.pi, n_theta, endpoint=False)
    return th, np.cos(th), np.sin(th)


def vdot_samples(el: OrbitalElements, grad, f: float, n_theta: int = 100,
                 mu: float = EARTH.mu) -> np.ndarray:
    """-f |Phi(Z, theta')^T grad| on n_theta uniform true anomalies of the osculating orbit."""
    _, ct, st = _uniform_grid(n_theta)
    return _vdot_trig(el, np.asarray(grad, dtype=float), f, ct, st, mu)


ZOOM_PASSES = 2
ZOOM_OFFSETS = np.linspace(-1.0, 1.0, 17)


def vdot_extrema(el: OrbitalElements, grad, f: float, n_theta: int = 100,
                 mu: float = EARTH.mu) -> tuple[float, float]:
    """(min, max) of the optimal V rate around the osculating orbit, gradient held fixed.

    The uniform sweep is refined by two zoom passes around each sampled extremum:
    the worst point is often a V-shaped near-zero of |Phi^T grad| that a coarse
    grid overshoots by a grid step times the slope.
    """
    g = np.asarray(grad, dtype=float)
    th, ct, st = _uniform_grid(n_theta)
    v = _vdot_trig(el, g, f, ct, st, mu)
    lo, hi = int(v.argmin()), int(v.argmax())
    vmin, vmax = float(v[lo]), float(v[hi])
    c_lo, c_hi = th[lo], th[hi]
    half = th[1] - th[0]
    n = len(ZOOM_OFFSETS)
    for _ in range(ZOOM_PASSES):
        grid = np.concatenate((c_lo + half * ZOOM_OFFSETS, c_hi + half * ZOOM_OFFSETS))
        vals = _vdot_at(el, g, f, grid, mu)
        klo, khi = int(vals[:n].argmin()), n + int(vals[n:].argmax())
        vmin, vmax = min(vmin, float(vals[klo])), max(vmax, float(vals[khi]))
        c_lo, c_hi = grid[klo], grid[khi]
        half *= 2.0 / (n - 1)
    return vmin, vmax


def effectivity(vdot_n: float, vdot_nn: float, vdot_nx: float) -> float:
    """Relative effectivity: 1 at the best point of the orbit, 0 at the worst."""
    span = vdot_nn - vdot_nx
    if span == 0.0:
        return 1.0
    return min(1.0, max(0.0, (vdot_n - vdot_nx) / span))


def check_convergence(el: OrbitalElements, target: TargetSpec) -> bool:
    for name, z, zt in zip(ELEMENT_NAMES, el.slow, target.values):
        if zt is None:
            continue
        if abs(angular_distance(z, zt, name)) > target.tolerance(name):
            return False
    return True


def guidance_step(state: SpacecraftState, target: TargetSpec, cfg: ControllerConfig,
                  sc: SpacecraftParams, eclipsed: bool = False, mu: float = EARTH.mu) -> GuidanceCommand:
    """One guidance evaluation at the current osculating state and mass."""
    el = state.elements
    f = sc.accel(state.mass)
    converged = check_convergence(el, target)
    value, grad = lyapunov_eval(el, target, cfg, f, mu)
    phi = gauss_matrix(el, mu)
    try:
        u = thrust_direction(grad, phi)
    except NullDirectionError:
        log.info("stationary point at a=%.3f e=%.6f i=%.6f: coasting", el.a, el.e, el.i)
        return GuidanceCommand(False, np.zeros(3), 0.0, 0.0, 1.0, 0.0, value,
                               converged, stationary=True)
    vdot = f * float(grad @ (phi @ u))
    vnn, vnx = vdot_extrema(el, grad, f, cfg.coast.n_theta, mu)
    # the current point may beat the sampled grid slightly
    eta = effectivity(vdot, min(vnn, vdot), max(vnx, vdot))
    thrust_on = (
        not converged
        and not (eclipsed and cfg.coast.eclipse_coast)
        and eta >= cfg.coast.eta_threshold
    )
    alpha = math.atan2(u[0], u[1])
    beta = math.asin(max(-1.0, min(1.0, u[2])))
    return GuidanceCommand(thrust_on, u, alpha, beta, eta, vdot, value, converged)
