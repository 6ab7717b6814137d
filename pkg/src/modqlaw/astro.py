"""Classical orbital elements, Cartesian conversions, sun direction and eclipse geometry.

Units are km, s and rad throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

TWO_PI = 2.0 * math.pi

# classical elements are singular at e = 0 and i = 0 (or pi)
E_FLOOR = 1e-4
I_FLOOR = 1e-4

ELEMENT_NAMES = ("a", "e", "i", "raan", "argp")
ANGLE_ELEMENTS = frozenset({"raan", "argp"})


class DegenerateOrbitError(ValueError):
    """Raised when a state cannot be represented by classical elements."""


@dataclass(frozen=True)
class PhysicalConstants:
    mu: float = 398600.4418            # km^3/s^2
    r_earth: float = 6378.137          # km
    j2: float = 1.08263e-3
    g0: float = 9.80665e-3             # km/s^2
    au: float = 149597870.7            # km
    mu_sun: float = 1.32712440018e11   # km^3/s^2
    sun_rate: float = TWO_PI / (365.256363004 * 86400.0)  # rad/s, sidereal year

    def __post_init__(self):
        for name in ("mu", "r_earth", "j2", "g0", "au", "mu_sun", "sun_rate"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"physical constant {name} must be positive")


EARTH = PhysicalConstants()


def wrap_angle(x: float) -> float:
    """Wrap an angle to [0, 2pi)."""
    x = math.fmod(x, TWO_PI)
    if x < 0.0:
        x += TWO_PI
    # fmod can return exactly 2pi after the shift for tiny negative x
    return 0.0 if x >= TWO_PI else x


def wrap_signed(x: float) -> float:
    """Wrap an angle difference to (-pi, pi]."""
    x = math.fmod(x, TWO_PI)
    if x > math.pi:
        x -= TWO_PI
    elif x <= -math.pi:
        x += TWO_PI
    return x


@dataclass(frozen=True)
class OrbitalElements:
    """Osculating classical elements (a, e, i, raan, argp) plus true anomaly.

    Angles are normalized to [0, 2pi) on construction. Only elliptic orbits are
    representable.
    """

    a: float
    e: float
    i: float
    raan: float = 0.0
    argp: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        vals = (self.a, self.e, self.i, self.raan, self.argp, self.theta)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite orbital element in {vals}")
        if self.a <= 0.0:
            raise ValueError(f"semi-major axis must be positive, got {self.a}")
        if not 0.0 <= self.e < 1.0:
            raise ValueError(f"eccentricity must be in [0, 1), got {self.e}")
        if not 0.0 <= self.i <= math.pi:
            raise ValueError(f"inclination must be in [0, pi], got {self.i}")
        object.__setattr__(self, "raan", wrap_angle(self.raan))
        object.__setattr__(self, "argp", wrap_angle(self.argp))
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    @property
    def p(self) -> float:
        return self.a * (1.0 - self.e * self.e)

    @property
    def rp(self) -> float:
        return self.a * (1.0 - self.e)

    @property
    def ra(self) -> float:
        return self.a * (1.0 + self.e)

    @property
    def radius(self) -> float:
        return self.p / (1.0 + self.e * math.cos(self.theta))

    def h(self, mu: float = EARTH.mu) -> float:
        return math.sqrt(mu * self.p)

    @property
    def slow(self) -> tuple[float, float, float, float, float]:
        """The five slowly varying elements (a, e, i, raan, argp)."""
        return (self.a, self.e, self.i, self.raan, self.argp)

    def replace(self, **changes) -> "OrbitalElements":
        return replace(self, **changes)

    def with_slow(self, z) -> "OrbitalElements":
        return OrbitalElements(z[0], z[1], z[2], z[3], z[4], self.theta)

    def clamped(self) -> "OrbitalElements":
        """Copy with e and i pushed off their singular values."""
        e = max(self.e, E_FLOOR)
        i = min(max(self.i, I_FLOOR), math.pi - I_FLOOR)
        if e == self.e and i == self.i:
            return self
        return replace(self, e=e, i=i)


@dataclass(frozen=True)
class CartesianState:
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.position, dtype=float).reshape(3)
        v = np.asarray(self.velocity, dtype=float).reshape(3)
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(v))):
            raise ValueError("non-finite Cartesian state")
        if not np.linalg.norm(r) > 0.0:
            raise ValueError("position must be non-zero")
        object.__setattr__(self, "position", r)
        object.__setattr__(self, "velocity", v)


_DEFAULT_TOL = {
    "a": 10.0,
    "e": 1e-3,
    "i": math.radians(0.01),
    "raan": math.radians(0.01),
    "argp": math.radians(0.01),
}


@dataclass(frozen=True)
class TargetSpec:
    """Target elements; ``None`` marks an element as free (not targeted)."""

    a: Optional[float] = None
    e: Optional[float] = None
    i: Optional[float] = None
    raan: Optional[float] = None
    argp: Optional[float] = None
    tolerances: dict = field(default_factory=lambda: dict(_DEFAULT_TOL))

    def __post_init__(self):
        tol = dict(_DEFAULT_TOL)
        tol.update(self.tolerances or {})
        unknown = set(tol) - set(ELEMENT_NAMES)
        if unknown:
            raise ValueError(f"unknown tolerance keys {sorted(unknown)}")
        if any(not v > 0.0 for v in tol.values()):
            raise ValueError("tolerances must be positive")
        object.__setattr__(self, "tolerances", tol)
        if not any(self.targeted):
            raise ValueError("at least one element must be targeted")
        if self.a is not None and self.a <= 0.0:
            raise ValueError("target semi-major axis must be positive")
        if self.e is not None and not 0.0 <= self.e < 1.0:
            raise ValueError("target eccentricity must be in [0, 1)")
        if self.i is not None and not 0.0 <= self.i <= math.pi:
            raise ValueError("target inclination must be in [0, pi]")

    @property
    def values(self) -> tuple:
        return (self.a, self.e, self.i, self.raan, self.argp)

    @property
    def targeted(self) -> tuple[bool, ...]:
        return tuple(v is not None for v in self.values)

    def tolerance(self, name: str) -> float:
        return self.tolerances[name]


def angular_distance(z: float, z_target: float, kind: str = "a") -> float:
    """Signed distance d(z, z_T); wrapped to (-pi, pi] for raan and argp."""
    if kind in ANGLE_ELEMENTS:
        return wrap_signed(z - z_target)
    return z - z_target


def distances(el: OrbitalElements, target: TargetSpec) -> tuple[float, ...]:
    """Per-element signed distances, 0.0 for free elements."""
    out = []
    for name, z, zt in zip(ELEMENT_NAMES, el.slow, target.values):
        out.append(0.0 if zt is None else angular_distance(z, zt, name))
    return tuple(out)


def perifocal_basis(i: float, raan: float, argp: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inertial unit vectors of periapsis direction, its in-plane normal, and orbit normal."""
    cO, sO = math.cos(raan), math.sin(raan)
    cw, sw = math.cos(argp), math.sin(argp)
    ci, si = math.cos(i), math.sin(i)
    P = np.array([cO * cw - sO * sw * ci, sO * cw + cO * sw * ci, sw * si])
    Q = np.array([-cO * sw - sO * cw * ci, -sO * sw + cO * cw * ci, cw * si])
    W = np.array([sO * si, -cO * si, ci])
    return P, Q, W


def rtn_basis(el: OrbitalElements) -> np.ndarray:
    """Rows are the inertial radial, tangential and normal unit vectors."""
    P, Q, W = perifocal_basis(el.i, el.raan, el.argp)
    c, s = math.cos(el.theta), math.sin(el.theta)
    r_hat = c * P + s * Q
    t_hat = -s * P + c * Q
    return np.vstack((r_hat, t_hat, W))


def position_eci(a: float, e: float, i: float, raan: float, argp: float, theta: float) -> tuple[float, float, float]:
    """Inertial position from scalar elements, without building arrays."""
    p = a * (1.0 - e * e)
    r = p / (1.0 + e * math.cos(theta))
    u = argp + theta
    cu, su = math.cos(u), math.sin(u)
    cO, sO = math.cos(raan), math.sin(raan)
    ci, si = math.cos(i), math.sin(i)
    return (
        r * (cO * cu - sO * su * ci),
        r * (sO * cu + cO * su * ci),
        r * su * si,
    )


def coe_to_cartesian(el: OrbitalElements, mu: float = EARTH.mu) -> CartesianState:
    p = el.p
    ct, st = math.cos(el.theta), math.sin(el.theta)
    r = p / (1.0 + el.e * ct)
    sq = math.sqrt(mu / p)
    P, Q, _ = perifocal_basis(el.i, el.raan, el.argp)
    pos = r * (ct * P + st * Q)
    vel = sq * (-st * P + (el.e + ct) * Q)
    return CartesianState(pos, vel)


def cartesian_to_coe(state: CartesianState, mu: float = EARTH.mu) -> OrbitalElements:
    """Classical elements of an elliptic state.

    Raises DegenerateOrbitError for rectilinear or non-elliptic states and for
    states whose e or i fall below the representability floors, where argp or
    raan are undefined.
    """
    r_vec, v_vec = state.position, state.velocity
    r = float(np.linalg.norm(r_vec))
    v2 = float(v_vec @ v_vec)
    h_vec = np.cross(r_vec, v_vec)
    h = float(np.linalg.norm(h_vec))
    if h <= 1e-12 * r * math.sqrt(v2 + mu / r):
        raise DegenerateOrbitError("rectilinear state (zero angular momentum)")
    energy = 0.5 * v2 - mu / r
    if energy >= 0.0:
        raise DegenerateOrbitError("state is not elliptic")
    a = -mu / (2.0 * energy)
    e_vec = np.cross(v_vec, h_vec) / mu - r_vec / r
    e = float(np.linalg.norm(e_vec))
    i = math.atan2(math.hypot(h_vec[0], h_vec[1]), h_vec[2])
    if e < E_FLOOR:
        raise DegenerateOrbitError(f"eccentricity {e:.3g} below floor {E_FLOOR}")
    if i < I_FLOOR or i > math.pi - I_FLOOR:
        raise DegenerateOrbitError(f"inclination {i:.3g} rad within {I_FLOOR} of a pole")
    h_hat = h_vec / h
    n_vec = np.array([-h_vec[1], h_vec[0], 0.0])
    raan = math.atan2(n_vec[1], n_vec[0])
    # atan2 forms stay well conditioned near 0 and pi
    argp = math.atan2(float(np.cross(n_vec, e_vec) @ h_hat), float(n_vec @ e_vec))
    theta = math.atan2(float(np.cross(e_vec, r_vec) @ h_hat), float(e_vec @ r_vec))
    return OrbitalElements(a, e, i, raan, argp, theta)


@dataclass(frozen=True)
class SunModel:
    """Sun on a uniform circular path in a fixed ecliptic plane.

    ``epoch_longitude`` is the ecliptic longitude at t = 0; the default puts the
    sun along +X.
    """

    epoch_longitude: float = 0.0
    obliquity: float = math.radians(23.44)
    rate: float = EARTH.sun_rate


def sun_direction(t: float, model: SunModel = SunModel()) -> tuple[float, float, float]:
    lam = model.epoch_longitude + model.rate * t
    cl, sl = math.cos(lam), math.sin(lam)
    return (cl, sl * math.cos(model.obliquity), sl * math.sin(model.obliquity))


def is_eclipsed(position, sun_dir, r_earth: float = EARTH.r_earth) -> bool:
    """Cylindrical umbra test; the terminator itself counts as sunlit."""
    x, y, z = position
    sx, sy, sz = sun_dir
    proj = x * sx + y * sy + z * sz
    if proj >= 0.0:
        return False
    px, py, pz = x - proj * sx, y - proj * sy, z - proj * sz
    return px * px + py * py + pz * pz < r_earth * r_earth
