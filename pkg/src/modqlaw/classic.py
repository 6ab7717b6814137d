"""Classical Q-law: best-case element rates, the Q function and its thrust direction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .astro import EARTH, ELEMENT_NAMES, OrbitalElements, TargetSpec, angular_distance

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
DIRECTION_FLOOR = 1e-300


class NullDirectionError(ArithmeticError):
    """Phi^T grad vanished; there is no descent direction (converged or stationary)."""


@dataclass(frozen=True)
class ClassicConfig:
    weights: tuple = (1.0, 1.0, 1.0, 1.0, 1.0)   # W_a, W_e, W_i, W_raan, W_argp
    w_p: float = 1.0
    m: float = 3.0
    n: float = 4.0
    r_exp: float = 2.0
    k: float = 100.0
    rp_min: float = EARTH.r_earth + 200.0
    b: float = 0.0
    penalty: bool = True

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.weights) != 5:
            raise ValueError("classic law needs five weights (a, e, i, raan, argp)")
        if any(w < 0.0 for w in self.weights):
            raise ValueError("weights must be non-negative")
        for name in ("w_p", "m", "n", "k", "rp_min", "b"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")
        if self.r_exp == 0.0:
            raise ValueError("r_exp must be non-zero")


@dataclass
class LyapunovEval:
    value: float
    gradient: np.ndarray
    contributions: dict = field(default_factory=dict)


def _golden_max(fun, lo: float, hi: float, tol: float = 1e-12, maxiter: int = 200) -> float:
    c = hi - GOLDEN * (hi - lo)
    d = lo + GOLDEN * (hi - lo)
    fc, fd = fun(c), fun(d)
    for _ in range(maxiter):
        if hi - lo < tol:
            break
        if fc > fd:
            hi, d, fd = d, c, fc
            c = hi - GOLDEN * (hi - lo)
            fc = fun(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + GOLDEN * (hi - lo)
            fd = fun(d)
    return max(fc, fd)


def _max_over_theta(fun, n_grid: int = 256) -> float:
    """Max of a periodic function of true anomaly: grid scan + golden refinement."""
    grid = np.linspace(0.0, 2.0 * math.pi, n_grid, endpoint=False)
    vals = fun(grid)
    k = int(np.argmax(vals))
    step = grid[1] - grid[0]
    return max(float(vals[k]), _golden_max(lambda x: float(fun(np.array([x]))[0]),
                                           grid[k] - step, grid[k] + step))


def max_rate(element: str, el: OrbitalElements, f: float, b: float = 0.0, mu: float = EARTH.mu) -> float:
    """Best-case rate of one element over true anomaly and thrust direction."""
    a, e, i, argp = el.a, el.e, el.i, el.argp
    p = a * (1.0 - e * e)
    h = math.sqrt(mu * p)
    if element == "a":
        return 2.0 * f * math.sqrt(a ** 3 * (1.0 + e) / (mu * (1.0 - e)))
    if element == "e":
        return 2.0 * f * p / h
    if element == "i":
        fi = math.sqrt(1.0 - (e * math.sin(argp)) ** 2) - e * abs(math.cos(argp))
        return f * p / h / fi
    si, ci = math.sin(i), math.cos(i)

    def radius(th):
        return p / (1.0 + e * np.cos(th))

    if element == "raan":
        return f * _max_over_theta(lambda th: np.abs(radius(th) * np.sin(th + argp))) / (h * si)
    if element == "argp":
        inplane = _max_over_theta(
            lambda th: np.hypot(p * np.cos(th), (p + radius(th)) * np.sin(th))) / (e * h)
        outplane = _max_over_theta(
            lambda th: np.abs(radius(th) * np.sin(th + argp))) * abs(ci) / (h * si)
        return f * (inplane + b * outplane) / (1.0 + b)
    raise ValueError(f"unknown element {element!r}")


def scaling_a(a: float, a_target: float, cfg: ClassicConfig) -> float:
    # |.| keeps S_a >= 1 for odd n as well
    return (1.0 + abs((a - a_target) / (cfg.m * a_target)) ** cfg.n) ** (1.0 / cfg.r_exp)


def penalty(el: OrbitalElements, cfg: ClassicConfig) -> float:
    return math.exp(cfg.k * (1.0 - el.rp / cfg.rp_min))


def q_terms(el: OrbitalElements, target: TargetSpec, cfg: ClassicConfig, f: float,
            mu: float = EARTH.mu) -> dict:
    """Unpenalized weighted summands W_z S_z (d/zdot_xx)^2 of targeted elements."""
    terms = {}
    for name, z, zt, w in zip(ELEMENT_NAMES, el.slow, target.values, cfg.weights):
        if zt is None or w == 0.0:
            continue
        d = angular_distance(z, zt, name)
        s = scaling_a(el.a, zt, cfg) if name == "a" else 1.0
        terms[name] = w * s * (d / max_rate(name, el, f, cfg.b, mu)) ** 2
    return terms


def q_value(el: OrbitalElements, target: TargetSpec, cfg: ClassicConfig, f: float,
            mu: float = EARTH.mu) -> float:
    total = sum(q_terms(el, target, cfg, f, mu).values())
    if cfg.penalty:
        total *= 1.0 + cfg.w_p * penalty(el, cfg)
    return total


def fd_steps(el: OrbitalElements, target: TargetSpec) -> tuple[float, ...]:
    a_ref = target.a if target.a is not None else el.a
    return (1e-6 * a_ref, 1e-7, 1e-7, 1e-7, 1e-7)


def _shifted(el: OrbitalElements, k: int, dz: float) -> OrbitalElements:
    z = list(el.slow)
    z[k] += dz
    return el.with_slow(z)


def q_gradient(el: OrbitalElements, target: TargetSpec, cfg: ClassicConfig, f: float,
               mu: float = EARTH.mu) -> np.ndarray:
    """Central differences of the full Q (through zdot_xx, S and P)."""
    grad = np.zeros(5)
    steps = fd_steps(el, target)
    active = _active_elements(target, cfg)
    for k in range(5):
        if not active[k]:
            continue
        hk = steps[k]
        grad[k] = (q_value(_shifted(el, k, hk), target, cfg, f, mu)
                   - q_value(_shifted(el, k, -hk), target, cfg, f, mu)) / (2.0 * hk)
    return grad


def _active_elements(target: TargetSpec, cfg: ClassicConfig) -> list[bool]:
    """Which partials can be non-zero given the targeted, weighted terms."""
    on = [zt is not None and w > 0.0 for zt, w in zip(target.values, cfg.weights)]
    active = [False] * 5
    # zdot_xx of a, e couple a and e; i couples a, e, argp; raan, argp couple a, e, i, argp
    if on[0] or on[1]:
        active[0] = active[1] = True
    if on[2]:
        active[0] = active[1] = active[2] = active[4] = True
    if on[3]:
        active[0] = active[1] = active[2] = active[3] = active[4] = True
    if on[4]:
        active[0] = active[1] = active[2] = active[4] = True
    if cfg.penalty and any(on):
        active[0] = active[1] = True
    return active


def q_eval(el: OrbitalElements, target: TargetSpec, cfg: ClassicConfig, f: float,
           mu: float = EARTH.mu) -> LyapunovEval:
    terms = q_terms(el, target, cfg, f, mu)
    value = sum(terms.values())
    if cfg.penalty:
        value *= 1.0 + cfg.w_p * penalty(el, cfg)
    return LyapunovEval(value, q_gradient(el, target, cfg, f, mu), terms)


def thrust_direction(grad, phi: np.ndarray) -> np.ndarray:
    """Unit RTN direction minimizing grad^T Phi u."""
    g = phi.T @ np.asarray(grad, dtype=float)
    norm = math.sqrt(float(g @ g))
    if not norm > DIRECTION_FLOOR or not math.isfinite(norm):
        raise NullDirectionError("Phi^T grad is null")
    return -g / norm
