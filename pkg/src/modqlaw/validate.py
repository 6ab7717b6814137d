"""Self-contained invariant and oracle checks behind ``modqlaw validate``.

Each suite compares the library against an independent computation (finite
differences, brute-force sampling, Cartesian integration) and reports one
pass/fail line. Sizes are modest so the whole set runs in well under a minute.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .astro import EARTH, CartesianState, OrbitalElements, TargetSpec, cartesian_to_coe, coe_to_cartesian
from .classic import ClassicConfig, max_rate, q_eval
from .dynamics import gauss_matrix, gauss_rates
from .modified import ModifiedConfig, f_i_approx, f_i_exact, v_tilde_eval
from .propagator import integrate_step, propagate
from .scenario import PRESETS, parse_scenario, preset, scenario_to_dict

MU = EARTH.mu
F = 1e-6    # km/s^2, a representative low-thrust acceleration


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name:<22} {self.detail} ({self.seconds:.1f} s)"


def _modified_state(rng, a_t: float, cfg: ModifiedConfig) -> OrbitalElements:
    """Random state clear of the law's switch surfaces (a*, 1 - delta_e, cos(argp) = 0, r_p,min)."""
    while True:
        a = rng.uniform(7000.0, 0.95 * cfg.zeta * a_t)
        e = rng.uniform(0.01, 0.9 * (1.0 - cfg.delta_e))
        w = rng.uniform(0.0, 2 * math.pi)
        if abs(math.cos(w)) > 0.05 and a * (1 - e) > 1.05 * cfg.rp_min:
            return OrbitalElements(a, e, rng.uniform(0.05, 3.0), rng.uniform(0, 2 * math.pi), w, 0.0)


def gradient_suite(n: int = 300, seed: int = 0) -> SuiteResult:
    """Analytic partials of the modified function against 4th-order central differences."""
    rng = np.random.default_rng(seed)
    cfg = ModifiedConfig()
    target = TargetSpec(a=42164.0, e=0.01, i=0.01)
    ae_only = dataclasses.replace(cfg, weights=(1.0, 1.0, 0.0))
    worst, ok = 0.0, True
    for _ in range(n):
        el = _modified_state(rng, target.a, cfg)
        grad = v_tilde_eval(el, target, F, cfg).gradient
        z = np.array(el.slow)
        for k in (0, 1, 2, 4):
            # the inclination coefficient's e-dependence is dropped by design
            c = ae_only if k == 1 else cfg
            h = 1e-4 * z[0] if k == 0 else 1e-5

            def v(dz, k=k, c=c):
                zz = z.copy()
                zz[k] += dz
                return v_tilde_eval(el.with_slow(zz), target, F, c).value

            fd = (-v(2 * h) + 8 * v(h) - 8 * v(-h) + v(-2 * h)) / (12 * h)
            an = grad[k] if k != 1 else v_tilde_eval(el, target, F, ae_only).gradient[1]
            noise = 64 * np.finfo(float).eps * abs(v(0.0)) / h
            ok &= abs(an - fd) <= 1e-6 * abs(an) + noise
            worst = max(worst, abs(an - fd) / max(abs(an), noise, 1e-300))
    return SuiteResult("gradient", ok, f"{n} states, worst relative error {worst:.1e}")


def direction_suite(n: int = 2000, n_dir: int = 200, seed: int = 1) -> SuiteResult:
    """The commanded direction beats random unit directions for both laws."""
    rng = np.random.default_rng(seed)
    target = TargetSpec(a=42164.0, e=0.01, i=0.01)
    mcfg, ccfg = ModifiedConfig(), ClassicConfig()
    bad = 0
    for k in range(n):
        el = _modified_state(rng, target.a, mcfg).replace(theta=rng.uniform(0, 2 * math.pi))
        phi = gauss_matrix(el)
        g = v_tilde_eval(el, target, F, mcfg).gradient if k % 10 else q_eval(el, target, ccfg, F).gradient
        gp = phi.T @ g
        best = -math.sqrt(gp @ gp)
        dirs = rng.normal(size=(n_dir, 3))
        dirs /= np.linalg.norm(dirs, axis=1)[:, None]
        bad += int(np.any(dirs @ gp < best - 1e-12 * abs(best)))
    return SuiteResult("direction", bad == 0, f"{n} states x {n_dir} directions, {bad} violations")


def _brute_max(row: int, el: OrbitalElements, n_theta: int = 7200) -> float:
    """max over anomaly and direction of one Gauss row; the best direction is the row itself."""
    th = np.linspace(0.0, 2 * math.pi, n_theta, endpoint=False)

    def best(ths):
        return max(np.linalg.norm(gauss_matrix(el.replace(theta=t))[row]) for t in ths)

    vals = [np.linalg.norm(gauss_matrix(el.replace(theta=t))[row]) for t in th]
    k = int(np.argmax(vals))
    step = th[1] - th[0]
    return F * max(vals[k], best(np.linspace(th[k] - step, th[k] + step, 201)))


def rate_max_suite(n: int = 30, seed: int = 2) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        el = OrbitalElements(rng.uniform(7000, 60000), rng.uniform(0.01, 0.8), rng.uniform(0.05, 3.0),
                             0.0, rng.uniform(0, 2 * math.pi))
        for row, name in enumerate(("a", "e", "i")):
            ref = _brute_max(row, el, 720)
            worst = max(worst, abs(max_rate(name, el, F) - ref) / ref)
    return SuiteResult("rate maxima", worst <= 5e-3, f"{n} states, worst relative gap {worst:.1e}")


def inclination_bound_suite() -> SuiteResult:
    """First-order inclination factor never exceeds the exact one."""
    worst = math.inf
    for e in np.linspace(0.0, 0.99, 100):
        for w in np.linspace(0.0, 2 * math.pi, 360, endpoint=False):
            worst = min(worst, f_i_approx(e, w)[0] - f_i_exact(e, w))
    return SuiteResult("inclination bound", worst >= 0.0, f"360x100 grid, min margin {worst:.2e}")


def _cartesian_rk4(el: OrbitalElements, u_rtn, t_end: float, n_steps: int) -> OrbitalElements:
    s = coe_to_cartesian(el, MU)
    y = np.concatenate((s.position, s.velocity))
    u = np.asarray(u_rtn, dtype=float)

    def rhs(y):
        r, v = y[:3], y[3:]
        rn = np.linalg.norm(r)
        rh = r / rn
        nh = np.cross(r, v)
        nh /= np.linalg.norm(nh)
        acc = u[0] * rh + u[1] * np.cross(nh, rh) + u[2] * nh
        return np.concatenate((v, -MU * r / rn ** 3 + acc))

    h = t_end / n_steps
    for _ in range(n_steps):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return cartesian_to_coe(CartesianState(y[:3], y[3:]), MU)


def _gauss_rk4(el: OrbitalElements, u_rtn, t_end: float, n_steps: int) -> OrbitalElements:
    def rates(_t, y):
        return gauss_rates(*y, *u_rtn, MU)

    y = [el.a, el.e, el.i, el.raan, el.argp, el.theta]
    h = t_end / n_steps
    for _ in range(n_steps):
        y = integrate_step(y, rates, h)
    return OrbitalElements(y[0], y[1], y[2], y[3] % (2 * math.pi), y[4] % (2 * math.pi), y[5] % (2 * math.pi))


def dynamics_suite() -> SuiteResult:
    """Gauss equations against Cartesian two-body motion under the same RTN thrust."""
    el = OrbitalElements(12000.0, 0.2, 0.5, 0.3, 0.7, 0.1)
    period = 2 * math.pi * math.sqrt(el.a ** 3 / MU)
    u = (2e-7, 5e-7, -3e-7)
    g = _gauss_rk4(el, u, 2 * period, 8000)
    c = _cartesian_rk4(el, u, 2 * period, 8000)
    err = max(abs(g.a - c.a) / c.a, abs(g.e - c.e), abs(g.i - c.i),
              abs(math.remainder(g.raan - c.raan, 2 * math.pi)), abs(math.remainder(g.argp - c.argp, 2 * math.pi)))
    free = _gauss_rk4(el, (0.0, 0.0, 0.0), period, 4000)
    drift = max(abs(x - x0) / max(abs(x0), 1.0) for x, x0 in zip(free.slow, el.slow))
    ok = err <= 1e-6 and drift <= 1e-9
    return SuiteResult("dynamics", ok, f"thrust-arc element gap {err:.1e}, coast drift {drift:.1e}")


def roundtrip_suite(days: float = 2.0) -> SuiteResult:
    """Echoed configuration parses back and reproduces the trajectory bit for bit."""
    mismatched = []
    for name in PRESETS:
        scn = dataclasses.replace(preset(name), max_days=days)
        again = parse_scenario(scenario_to_dict(scn))
        t1, _ = propagate(scn)
        t2, _ = propagate(again)
        if scenario_to_dict(again) != scenario_to_dict(scn) or any(
                not np.array_equal(t1[c], t2[c]) for c in t1.columns):
            mismatched.append(name)
    return SuiteResult("config round trip", not mismatched,
                       f"{len(PRESETS)} presets" + (f", mismatched: {mismatched}" if mismatched else ""))


SUITES: dict = {
    "gradient": gradient_suite,
    "direction": direction_suite,
    "rate-maxima": rate_max_suite,
    "inclination-bound": inclination_bound_suite,
    "dynamics": dynamics_suite,
    "round-trip": roundtrip_suite,
}


def run_suites(names=None, report: Callable[[str], None] | None = print) -> list:
    results = []
    for name in names or SUITES:
        start = time.perf_counter()
        try:
            res = SUITES[name]()
        except Exception as exc:     # a crash is a failed suite, not a crashed validator
            res = SuiteResult(name, False, f"raised {type(exc).__name__}: {exc}")
        res.seconds = time.perf_counter() - start
        results.append(res)
        if report:
            report(res.line())
    return results
