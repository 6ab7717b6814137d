"""Closed-loop propagation of the Gauss equations with guidance, mass flow and eclipses."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .astro import (
    E_FLOOR,
    EARTH,
    ELEMENT_NAMES,
    I_FLOOR,
    TWO_PI,
    OrbitalElements,
    PhysicalConstants,
    SunModel,
    TargetSpec,
    distances,
    is_eclipsed,
    position_eci,
    sun_direction,
    wrap_angle,
)
from .dynamics import (
    PerturbationToggles,
    SpacecraftParams,
    SpacecraftState,
    gauss_rates,
    j2_accel_scalar,
    mass_rate,
    perturbation_accel,
)
from . import kernel
from .guidance import ControllerConfig, guidance_step

log = logging.getLogger(__name__)

DAY = 86400.0

TRAJECTORY_COLUMNS = (
    "t", "a", "e", "i", "raan", "argp", "theta", "mass", "thrust_on",
    "alpha", "beta", "V", "Vdot", "eta_r", "eclipse", "r_p",
)


class IntegrationFault(ArithmeticError):
    """Non-finite or non-elliptic state produced by a step."""


@dataclass(frozen=True)
class IntegratorSettings:
    step_s: float = 60.0
    record_every: int = 1
    # periapsis below r_earth + crash_altitude aborts the run
    crash_altitude: float = 100.0
    min_mass_fraction: float = 0.05

    def __post_init__(self):
        if not self.step_s > 0.0:
            raise ValueError("step_s must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


@dataclass(frozen=True)
class Scenario:
    initial: OrbitalElements
    target: TargetSpec
    spacecraft: SpacecraftParams
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    perturbations: PerturbationToggles = field(default_factory=PerturbationToggles)
    sun: SunModel = field(default_factory=SunModel)
    epoch_s: float = 0.0
    integrator: IntegratorSettings = field(default_factory=IntegratorSettings)
    max_days: float = 365.0
    constants: PhysicalConstants = EARTH
    name: str = ""

    def __post_init__(self):
        if not self.max_days > 0.0:
            raise ValueError("max_days must be positive")


@dataclass
class Trajectory:
    """Columnar record; angles in radians, time in seconds, mass in kg."""

    columns: dict

    def __len__(self) -> int:
        return len(self.columns["t"])

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def rows(self):
        cols = [self.columns[c] for c in TRAJECTORY_COLUMNS]
        return zip(*cols)


@dataclass
class RunSummary:
    converged: bool
    termination: str
    transfer_days: float
    propellant_kg: float
    revolutions: float
    min_periapsis_km: float
    max_sma_km: float
    thrust_time_s: float
    steps: int
    final: OrbitalElements
    final_mass: float
    residuals: dict
    min_theta_rate: float

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "termination": self.termination,
            "transfer_days": self.transfer_days,
            "propellant_kg": self.propellant_kg,
            "revolutions": self.revolutions,
            "min_periapsis_km": self.min_periapsis_km,
            "max_sma_km": self.max_sma_km,
            "thrust_time_s": self.thrust_time_s,
            "steps": self.steps,
            "final_mass_kg": self.final_mass,
            "final_elements": {
                "a_km": self.final.a,
                "e": self.final.e,
                "i_deg": math.degrees(self.final.i),
                "raan_deg": math.degrees(self.final.raan),
                "argp_deg": math.degrees(self.final.argp),
                "theta_deg": math.degrees(self.final.theta),
            },
            "residuals": self.residuals,
            "min_theta_rate": self.min_theta_rate,
        }


def integrate_step(y: Sequence[float], rates: Callable, h: float, t: float = 0.0) -> list[float]:
    """One classical RK4 step of y' = rates(t, y)."""
    n = len(y)
    k1 = rates(t, y)
    y2 = [y[j] + 0.5 * h * k1[j] for j in range(n)]
    k2 = rates(t + 0.5 * h, y2)
    y3 = [y[j] + 0.5 * h * k2[j] for j in range(n)]
    k3 = rates(t + 0.5 * h, y3)
    y4 = [y[j] + h * k3[j] for j in range(n)]
    k4 = rates(t + h, y4)
    out = [y[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) for j in range(n)]
    if not all(math.isfinite(v) for v in out):
        raise IntegrationFault("non-finite state after RK4 step")
    return out


def _regularize(y: list[float]) -> list[float]:
    """Map an RK4 output back into the classical-element domain."""
    a, e, i, raan, argp, theta = y[:6]
    if e < 0.0:
        # same ellipse with periapsis on the other side
        e, argp, theta = -e, argp + math.pi, theta - math.pi
    if i < 0.0:
        i, raan, argp = -i, raan + math.pi, argp + math.pi
    elif i > math.pi:
        i, raan, argp = TWO_PI - i, raan + math.pi, argp + math.pi
    e = max(e, E_FLOOR)
    i = min(max(i, I_FLOOR), math.pi - I_FLOOR)
    return [a, e, i, wrap_angle(raan), wrap_angle(argp), theta] + list(y[6:])


def _clamp_stage(e: float, i: float) -> tuple[float, float]:
    return max(abs(e), E_FLOOR), min(max(abs(i), I_FLOOR), math.pi - I_FLOOR)


def make_rates(sc: SpacecraftParams, direction, thrust_on: bool, toggles: PerturbationToggles,
               constants: PhysicalConstants, sun: SunModel, epoch_s: float, t0: float,
               theta_rates: list | None = None) -> Callable:
    """Right-hand side for (a, e, i, raan, argp, theta, mass) with a held command."""
    mu = constants.mu
    ur, ut, un = (float(direction[0]), float(direction[1]), float(direction[2]))
    mdot = mass_rate(sc, thrust_on, constants.g0)
    thrust = sc.thrust * 1e-3 if thrust_on else 0.0
    extra = toggles.third_body or toggles.srp

    def rates(tau, y):
        a, e, i, raan, argp, theta, m = y
        if not (a > 0.0 and e < 1.0 and m > 0.0):
            raise IntegrationFault(f"state left the elliptic domain: a={a}, e={e}, m={m}")
        e, i = _clamp_stage(e, i)
        f = thrust / m
        fr, ft, fn = f * ur, f * ut, f * un
        if toggles.j2:
            jr, jt, jn = j2_accel_scalar(a, e, i, argp, theta, constants)
            fr, ft, fn = fr + jr, ft + jt, fn + jn
        if extra:
            el = OrbitalElements(a, e, i, raan, argp, theta)
            pr, pt, pn = perturbation_accel(el, epoch_s + t0 + tau,
                                            PerturbationToggles(False, toggles.third_body, toggles.srp),
                                            constants, sun)
            fr, ft, fn = fr + pr, ft + pt, fn + pn
        da, de, di, draan, dargp, dth = gauss_rates(a, e, i, raan, argp, theta, fr, ft, fn, mu)
        if theta_rates is not None:
            theta_rates.append(dth)
        return (da, de, di, draan, dargp, dth, mdot)

    return rates


ENGINES = ("auto", "compiled", "python")


def compiled_supported(scn: Scenario) -> bool:
    """The compiled loop covers everything except third-body and SRP forces."""
    return not (scn.perturbations.third_body or scn.perturbations.srp)


def propagate(scn: Scenario, engine: str = "auto") -> tuple[Trajectory, RunSummary]:
    """Run the closed loop until convergence, timeout, or a failure event.

    ``engine`` picks the compiled loop ("compiled"), the pure-Python reference
    ("python"), or the compiled loop whenever the scenario allows it ("auto").
    """
    if engine not in ENGINES:
        raise ValueError(f"engine must be one of {ENGINES}, got {engine!r}")
    if scn.controller.law == "modified" and scn.target.a is None:
        raise ValueError("the modified law needs a semi-major-axis target to place a*")
    if engine == "compiled" and not compiled_supported(scn):
        raise ValueError("the compiled engine does not model third-body or SRP forces")
    if engine != "python" and compiled_supported(scn):
        return _propagate_compiled(scn)
    return _propagate_python(scn)


def _summary(scn: Scenario, y, t, converged, termination, step, thrust_time, theta_travel,
             min_rp, max_a, min_theta_rate) -> RunSummary:
    final = OrbitalElements(*y[:6])
    res = distances(final, scn.target)
    return RunSummary(
        converged=converged,
        termination=termination,
        transfer_days=t / DAY,
        propellant_kg=scn.spacecraft.mass - y[6],
        revolutions=theta_travel / TWO_PI,
        min_periapsis_km=min_rp,
        max_sma_km=max_a,
        thrust_time_s=thrust_time,
        steps=step,
        final=final,
        final_mass=y[6],
        residuals={name: d for name, d, on in zip(ELEMENT_NAMES, res, scn.target.targeted) if on},
        min_theta_rate=min_theta_rate,
    )


CHUNK_ROWS = 65536


def _kernel_arguments(scn: Scenario) -> dict:
    c, sc, ctl = scn.constants, scn.spacecraft, scn.controller
    tgt = np.array([0.0 if v is None else float(v) for v in scn.target.values])
    tmask = np.array(scn.target.targeted, dtype=np.bool_)
    tol = np.array([scn.target.tolerance(n) for n in ELEMENT_NAMES])
    md, cl = ctl.modified, ctl.classic
    mp = np.array(list(md.weights) + [md.zeta, md.delta_e, md.rp_min, float(md.penalty), md.w_p, md.k])
    cp = np.array(list(cl.weights) + [cl.w_p, cl.m, cl.n, cl.r_exp, cl.k, cl.rp_min, cl.b, float(cl.penalty)])
    n = ctl.coast.n_theta
    grid = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    return dict(
        h=scn.integrator.step_s, t_max=scn.max_days * DAY,
        rp_crash=c.r_earth + scn.integrator.crash_altitude,
        m_floor=scn.integrator.min_mass_fraction * sc.mass, every=scn.integrator.record_every,
        mu=c.mu, r_earth=c.r_earth, j2=c.j2, g0=c.g0, use_j2=scn.perturbations.j2,
        thrust_n=sc.thrust, isp=sc.isp, tgt=tgt, tmask=tmask, tol=tol,
        law=kernel.LAW_MODIFIED if ctl.law == "modified" else kernel.LAW_CLASSIC, mp=mp, cp=cp,
        eta_thr=ctl.coast.eta_threshold, eclipse_coast=ctl.coast.eclipse_coast,
        grid_th=grid, grid_c=np.cos(grid), grid_s=np.sin(grid),
        sun_lon0=scn.sun.epoch_longitude, sun_obl=scn.sun.obliquity, sun_rate=scn.sun.rate,
        epoch_s=scn.epoch_s,
    )


def _propagate_compiled(scn: Scenario) -> tuple[Trajectory, RunSummary]:
    el0 = scn.initial.clamped()
    y = np.array([el0.a, el0.e, el0.i, el0.raan, el0.argp, el0.theta, scn.spacecraft.mass])
    acc = np.array([0.0, 0.0, 0.0, 0.0, math.inf, -math.inf, math.inf])
    args = _kernel_arguments(scn)
    chunks = []
    while True:
        rec = np.empty((CHUNK_ROWS, kernel.N_COLUMNS))
        code, rows = kernel.run_chunk(y, acc, rec, CHUNK_ROWS, **args)
        chunks.append(rec[:rows])
        if code != kernel.RUNNING:
            break
    termination = kernel.TERMINATIONS[code]
    if code == kernel.FAULT:
        log.warning("integration fault at t=%.0f s", acc[kernel.ACC_T])
    data = np.concatenate(chunks) if chunks else np.empty((0, kernel.N_COLUMNS))
    traj = Trajectory({name: (data[:, k] != 0.0) if name in ("thrust_on", "eclipse") else data[:, k].copy()
                       for k, name in enumerate(TRAJECTORY_COLUMNS)})
    summary = _summary(scn, [float(v) for v in y], float(acc[kernel.ACC_T]), code == kernel.CONVERGED,
                       termination, int(acc[kernel.ACC_STEP]), float(acc[kernel.ACC_THRUST]),
                       float(acc[kernel.ACC_TRAVEL]), float(acc[kernel.ACC_MIN_RP]),
                       float(acc[kernel.ACC_MAX_A]), float(acc[kernel.ACC_MIN_THDOT]))
    return traj, summary


def _propagate_python(scn: Scenario) -> tuple[Trajectory, RunSummary]:
    c = scn.constants
    sc = scn.spacecraft
    h = scn.integrator.step_s
    t_max = scn.max_days * DAY
    rp_crash = c.r_earth + scn.integrator.crash_altitude
    m_floor = scn.integrator.min_mass_fraction * sc.mass
    every = scn.integrator.record_every

    el0 = scn.initial.clamped()
    y = [el0.a, el0.e, el0.i, el0.raan, el0.argp, el0.theta, sc.mass]
    t = 0.0
    rec = {name: [] for name in TRAJECTORY_COLUMNS}
    thrust_time = 0.0
    theta_travel = 0.0
    min_rp = math.inf
    max_a = -math.inf
    min_theta_rate = math.inf
    step = 0
    termination = "max-duration"
    converged = False

    while True:
        a, e, i, raan, argp, theta, m = y
        el = OrbitalElements(a, e, i, raan, argp, theta)
        rp = el.rp
        min_rp = min(min_rp, rp)
        max_a = max(max_a, a)
        pos = position_eci(a, e, i, raan, argp, theta)
        eclipsed = is_eclipsed(pos, sun_direction(scn.epoch_s + t, scn.sun), c.r_earth)
        cmd = guidance_step(SpacecraftState(el, m, t), scn.target, scn.controller, sc, eclipsed, c.mu)

        stop = None
        if cmd.converged:
            stop, converged = "converged", True
        elif rp < rp_crash:
            stop = "periapsis-violation"
        elif m <= m_floor:
            stop = "mass-floor"
        elif t >= t_max - 1e-9:
            stop = "max-duration"
        thrust_on = cmd.thrust_on and stop is None

        if step % every == 0 or stop is not None:
            row = (t, a, e, i, raan, argp, theta, m, thrust_on, cmd.alpha, cmd.beta,
                   cmd.value, cmd.vdot, cmd.eta_r, eclipsed, rp)
            for name, v in zip(TRAJECTORY_COLUMNS, row):
                rec[name].append(v)
        if stop is not None:
            termination = stop
            break

        theta_rates: list = []
        rates = make_rates(sc, cmd.direction, thrust_on, scn.perturbations, c, scn.sun,
                           scn.epoch_s, t, theta_rates)
        try:
            y_new = integrate_step(y, rates, h)
        except IntegrationFault as exc:
            log.warning("integration fault at t=%.0f s: %s", t, exc)
            termination = "integration-fault"
            break
        min_theta_rate = min(min_theta_rate, min(theta_rates))
        if not (y_new[0] > 0.0 and y_new[1] < 1.0):
            termination = "integration-fault"
            break
        theta_travel += y_new[5] - theta
        y = _regularize(y_new)
        y[5] = wrap_angle(y[5])
        if thrust_on:
            thrust_time += h
        t += h
        step += 1

    traj = Trajectory({k: np.asarray(v, dtype=bool if k in ("thrust_on", "eclipse") else float)
                       for k, v in rec.items()})
    summary = _summary(scn, y, t, converged, termination, step, thrust_time, theta_travel,
                       min_rp, max_a, min_theta_rate)
    return traj, summary
