"""Gauss variational equations, environment accelerations in RTN, and mass flow."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .astro import (
    E_FLOOR,
    EARTH,
    I_FLOOR,
    OrbitalElements,
    PhysicalConstants,
    SunModel,
    rtn_basis,
    sun_direction,
)


class SingularElementsError(ValueError):
    """Raised when e or sin(i) is too small for the Gauss equations."""


class RtnAcceleration(NamedTuple):
    f_r: float = 0.0
    f_t: float = 0.0
    f_n: float = 0.0

    def __add__(self, other):
        return RtnAcceleration(self.f_r + other[0], self.f_t + other[1], self.f_n + other[2])

    @property
    def magnitude(self) -> float:
        return math.sqrt(self.f_r ** 2 + self.f_t ** 2 + self.f_n ** 2)


@dataclass(frozen=True)
class SpacecraftParams:
    mass: float     # kg, wet
    thrust: float   # N
    isp: float      # s

    def __post_init__(self):
        if not self.mass > 0.0:
            raise ValueError("mass must be positive")
        if not self.thrust >= 0.0:
            raise ValueError("thrust must be non-negative")
        if not self.isp > 0.0:
            raise ValueError("specific impulse must be positive")

    def accel(self, mass: float | None = None) -> float:
        """Thrust acceleration magnitude in km/s^2."""
        m = self.mass if mass is None else mass
        return self.thrust / m * 1e-3


@dataclass(frozen=True)
class PerturbationToggles:
    j2: bool = False
    third_body: bool = False
    srp: bool = False


@dataclass(frozen=True)
class SpacecraftState:
    elements: OrbitalElements
    mass: float
    t: float = 0.0   # s since scenario epoch


def _check_singular(e: float, i: float) -> None:
    # allow a little slack under the floors for values that were clamped
    if e < 0.5 * E_FLOOR or math.sin(i) < 0.5 * math.sin(I_FLOOR):
        raise SingularElementsError(f"singular elements e={e:.3g}, i={i:.3g}")


def gauss_matrix(el: OrbitalElements, mu: float = EARTH.mu) -> np.ndarray:
    """5x3 map from RTN acceleration to rates of (a, e, i, raan, argp)."""
    a, e, i, argp, th = el.a, el.e, el.i, el.argp, el.theta
    _check_singular(e, i)
    p = a * (1.0 - e * e)
    h = math.sqrt(mu * p)
    ct, st = math.cos(th), math.sin(th)
    r = p / (1.0 + e * ct)
    su, cu = math.sin(th + argp), math.cos(th + argp)
    si, ci = math.sin(i), math.cos(i)
    k = 2.0 * a * a / h
    return np.array([
        [k * e * st, k * p / r, 0.0],
        [p * st / h, ((p + r) * ct + r * e) / h, 0.0],
        [0.0, 0.0, r * cu / h],
        [0.0, 0.0, r * su / (h * si)],
        [-p * ct / (e * h), (p + r) * st / (e * h), -r * su * ci / (h * si)],
    ])


def gauss_rates(a, e, i, raan, argp, theta, fr, ft, fn, mu):
    """Scalar Gauss equations: (da, de, di, draan, dargp, dtheta) per second."""
    p = a * (1.0 - e * e)
    h = math.sqrt(mu * p)
    ct, st = math.cos(theta), math.sin(theta)
    r = p / (1.0 + e * ct)
    u = theta + argp
    su, cu = math.sin(u), math.cos(u)
    si = math.sin(i)
    eh = e * h
    da = 2.0 * a * a / h * (e * st * fr + p / r * ft)
    de = (p * st * fr + ((p + r) * ct + r * e) * ft) / h
    di = r * cu / h * fn
    draan = r * su / (h * si) * fn
    inplane_w = (-p * ct * fr + (p + r) * st * ft) / eh
    dargp = inplane_w - r * su * math.cos(i) / (h * si) * fn
    dtheta = h / (r * r) - inplane_w
    return da, de, di, draan, dargp, dtheta


def state_rates(el: OrbitalElements, u, mu: float = EARTH.mu):
    """Returns (dZ/dt as a 5-tuple, dtheta/dt)."""
    _check_singular(el.e, el.i)
    fr, ft, fn = u
    rates = gauss_rates(el.a, el.e, el.i, el.raan, el.argp, el.theta, fr, ft, fn, mu)
    return rates[:5], rates[5]


def j2_accel_scalar(a, e, i, argp, theta, c: PhysicalConstants = EARTH):
    p = a * (1.0 - e * e)
    r = p / (1.0 + e * math.cos(theta))
    k = -1.5 * c.j2 * c.mu * c.r_earth ** 2 / r ** 4
    u = argp + theta
    su = math.sin(u)
    si = math.sin(i)
    return (
        k * (1.0 - 3.0 * si * si * su * su),
        k * si * si * math.sin(2.0 * u),
        k * math.sin(2.0 * i) * su,
    )


def j2_accel_rtn(el: OrbitalElements, constants: PhysicalConstants = EARTH) -> RtnAcceleration:
    """Oblateness acceleration resolved in the RTN frame."""
    return RtnAcceleration(*j2_accel_scalar(el.a, el.e, el.i, el.argp, el.theta, constants))


def third_body_accel_rtn(el: OrbitalElements, t: float, sun: SunModel = SunModel(),
                         constants: PhysicalConstants = EARTH) -> RtnAcceleration:
    """Point-mass solar tide. Stub: not validated, excluded from acceptance runs."""
    from .astro import coe_to_cartesian

    r = coe_to_cartesian(el, constants.mu).position
    s = constants.au * np.asarray(sun_direction(t, sun))
    d = s - r
    acc = constants.mu_sun * (d / np.linalg.norm(d) ** 3 - s / np.linalg.norm(s) ** 3)
    return RtnAcceleration(*(rtn_basis(el) @ acc))


SOLAR_PRESSURE = 4.56e-6   # N/m^2 at 1 AU


def srp_accel_rtn(el: OrbitalElements, t: float, area_to_mass: float = 0.01, cr: float = 1.5,
                  sun: SunModel = SunModel()) -> RtnAcceleration:
    """Cannonball radiation pressure, no shadowing. Stub: not validated."""
    s_hat = np.asarray(sun_direction(t, sun))
    acc = -SOLAR_PRESSURE * cr * area_to_mass * 1e-3 * s_hat
    return RtnAcceleration(*(rtn_basis(el) @ acc))


def perturbation_accel(el: OrbitalElements, t: float, toggles: PerturbationToggles,
                       constants: PhysicalConstants = EARTH, sun: SunModel = SunModel()) -> RtnAcceleration:
    acc = RtnAcceleration()
    if toggles.j2:
        acc = acc + j2_accel_rtn(el, constants)
    if toggles.third_body:
        acc = acc + third_body_accel_rtn(el, t, sun, constants)
    if toggles.srp:
        acc = acc + srp_accel_rtn(el, t, sun=sun)
    return acc


def mass_rate(sc: SpacecraftParams, thrust_on: bool, g0: float = EARTH.g0) -> float:
    """Propellant flow in kg/s (negative while thrusting)."""
    if not thrust_on:
        return 0.0
    # thrust N = kg m/s^2, g0 in km/s^2
    return -sc.thrust / (sc.isp * g0 * 1e3)
