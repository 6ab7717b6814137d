"""Lyapunov-stable modified Q-law for semi-major axis, eccentricity and inclination.

Each term is V_z = K_z (z - z_T)^2 where K_z = 1 / zdot_xx^2 is built from a
best-case rate whose dependence on a is frozen beyond a* = zeta * a_T and whose
1/(1 - e^2) growth is frozen beyond e = 1 - delta_e. Gradients are analytic and
gated by indicators; two partials are deliberately dropped (dV_a/de below the
periapsis floor, and dK_i/de everywhere).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .astro import EARTH, OrbitalElements, TargetSpec
from .classic import thrust_direction


@dataclass(frozen=True)
class ModifiedConfig:
    weights: tuple = (1.0, 1.0, 1.0)   # W_a, W_e, W_i
    zeta: float = 2.0
    delta_e: float = 0.05
    rp_min: float = EARTH.r_earth + 200.0
    # the classical (1 + W_p P) factor; off by default
    penalty: bool = False
    w_p: float = 1.0
    k: float = 100.0

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.weights) != 3:
            raise ValueError("modified law needs three weights (a, e, i)")
        if any(w < 0.0 for w in self.weights):
            raise ValueError("weights must be non-negative")
        if not 1.0 < self.zeta < 3.0:
            raise ValueError(f"zeta must lie in (1, 3), got {self.zeta}")
        if not 0.0 < self.delta_e < 1.0:
            raise ValueError(f"delta_e must lie in (0, 1), got {self.delta_e}")
        if not self.rp_min > EARTH.r_earth:
            raise ValueError("rp_min must exceed the Earth radius")


@dataclass
class ModifiedEval:
    value: float
    gradient: np.ndarray                        # over (a, e, i, raan, argp)
    terms: dict = field(default_factory=dict)   # V_a, V_e, V_i
    coefficients: dict = field(default_factory=dict)   # K_a, K_e, K_i


def _a_star(a_target: float, cfg: ModifiedConfig) -> float:
    return cfg.zeta * a_target


def k_a_tilde(el: OrbitalElements, f: float, a_target: float, cfg: ModifiedConfig,
              mu: float = EARTH.mu) -> tuple[float, float, float]:
    """(K_a, dK_a/da, dK_a/de)."""
    c = mu / (f * f)
    a, e = el.a, el.e
    a_star = _a_star(a_target, cfg)
    below = a < a_star
    ac = a if below else a_star
    k = c / (4.0 * ac ** 3) * (1.0 - e) / (1.0 + e)
    dk_da = -3.0 * k / a if below else 0.0
    dk_de = -c / (2.0 * ac ** 3 * (1.0 + e) ** 2)
    return k, dk_da, dk_de


def v_a_gradient(el: OrbitalElements, target: TargetSpec, f: float, cfg: ModifiedConfig,
                 mu: float = EARTH.mu) -> tuple[float, float, float]:
    """(V_a, dV_a/da, dV_a/de); the e-partial is dropped when r_p <= r_p,min."""
    k, dk_da, dk_de = k_a_tilde(el, f, target.a, cfg, mu)
    d = el.a - target.a
    dv_de = d * d * dk_de if el.rp > cfg.rp_min else 0.0
    return k * d * d, 2.0 * k * d + d * d * dk_da, dv_de


def k_e_tilde(el: OrbitalElements, f: float, a_target: float, cfg: ModifiedConfig,
              mu: float = EARTH.mu) -> tuple[float, float, float]:
    """(K_e, dK_e/da, dK_e/de)."""
    c = mu / (f * f)
    a, e = el.a, el.e
    a_star = _a_star(a_target, cfg)
    e_cap = 1.0 - cfg.delta_e
    below_a = a < a_star
    below_e = e < e_cap
    ac = a if below_a else a_star
    ec = e if below_e else e_cap
    k = c / (4.0 * ac * (1.0 - ec * ec))
    dk_de = 2.0 * k * e / (1.0 - e * e) if below_e else 0.0
    dk_da = -k / a if below_a else 0.0
    return k, dk_da, dk_de


def v_e_gradient(el: OrbitalElements, target: TargetSpec, f: float, cfg: ModifiedConfig,
                 mu: float = EARTH.mu) -> tuple[float, float, float]:
    """(V_e, dV_e/da, dV_e/de)."""
    k, dk_da, dk_de = k_e_tilde(el, f, target.a, cfg, mu)
    d = el.e - target.e
    return k * d * d, d * d * dk_da, d * d * dk_de + 2.0 * k * d


def f_i_approx(e: float, argp: float) -> tuple[float, float]:
    """First-order inclination-rate shape factor and its argp derivative."""
    s, c = math.sin(argp), math.cos(argp)
    fi = 1.0 - 0.5 * e * e * s * s - e * abs(c)
    sgn = 1.0 if c > 0.0 else (-1.0 if c < 0.0 else 0.0)
    return fi, -e * e * s * c + e * sgn * s


def f_i_exact(e: float, argp: float) -> float:
    return math.sqrt(1.0 - (e * math.sin(argp)) ** 2) - e * abs(math.cos(argp))


def k_i_tilde(el: OrbitalElements, f: float, a_target: float, cfg: ModifiedConfig,
              mu: float = EARTH.mu) -> tuple[float, float, float]:
    """(K_i, dK_i/da, dK_i/dargp); dK_i/de is dropped by design."""
    c = mu / (f * f)
    a, e = el.a, el.e
    a_star = _a_star(a_target, cfg)
    below_a = a < a_star
    ac = a if below_a else a_star
    ec = min(e, 1.0 - cfg.delta_e)
    fi, dfi = f_i_approx(ec, el.argp)
    base = c / (ac * (1.0 - ec * ec))
    k = base * fi * fi
    dk_da = -k / a if below_a else 0.0
    return k, dk_da, base * 2.0 * fi * dfi


def v_tilde_eval(el: OrbitalElements, target: TargetSpec, f: float, cfg: ModifiedConfig,
                 mu: float = EARTH.mu) -> ModifiedEval:
    """Weighted sum of the targeted a, e, i terms with its gradient."""
    if target.a is None:
        raise ValueError("the modified law needs a semi-major-axis target to place a*")
    wa, we, wi = cfg.weights
    wa = wa if target.a is not None else 0.0
    we = we if target.e is not None else 0.0
    wi = wi if target.i is not None else 0.0
    if wa == 0.0 and we == 0.0 and wi == 0.0:
        raise ValueError("at least one targeted a, e, i term needs a positive weight")

    grad = np.zeros(5)
    terms, coeffs = {}, {}
    value = 0.0
    if wa > 0.0:
        va, dva_da, dva_de = v_a_gradient(el, target, f, cfg, mu)
        terms["a"] = va
        coeffs["a"] = k_a_tilde(el, f, target.a, cfg, mu)[0]
        value += wa * va
        grad[0] += wa * dva_da
        grad[1] += wa * dva_de
    if we > 0.0:
        ve, dve_da, dve_de = v_e_gradient(el, target, f, cfg, mu)
        terms["e"] = ve
        coeffs["e"] = k_e_tilde(el, f, target.a, cfg, mu)[0]
        value += we * ve
        grad[0] += we * dve_da
        grad[1] += we * dve_de
    if wi > 0.0:
        ki, dki_da, dki_dw = k_i_tilde(el, f, target.a, cfg, mu)
        d = el.i - target.i
        terms["i"] = ki * d * d
        coeffs["i"] = ki
        value += wi * ki * d * d
        grad[0] += wi * d * d * dki_da
        grad[2] += wi * 2.0 * ki * d
        grad[4] += wi * d * d * dki_dw

    if cfg.penalty:
        pen = 1.0 + cfg.w_p * math.exp(cfg.k * (1.0 - el.rp / cfg.rp_min))
        # product rule through r_p = a (1 - e)
        dpen = (pen - 1.0) * (-cfg.k / cfg.rp_min)
        grad = grad * pen
        grad[0] += value * dpen * (1.0 - el.e)
        grad[1] += value * dpen * (-el.a)
        value *= pen
    return ModifiedEval(value, grad, terms, coeffs)


def modified_thrust_direction(ev: ModifiedEval, phi: np.ndarray) -> np.ndarray:
    return thrust_direction(ev.gradient, phi)
