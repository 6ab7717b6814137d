import dataclasses
import math

import numpy as np
import pytest

from modqlaw.astro import EARTH, OrbitalElements, TargetSpec
from modqlaw.dynamics import PerturbationToggles, SpacecraftParams, mass_rate
from modqlaw.guidance import CoastPolicy, ControllerConfig
from modqlaw.propagator import (
    DAY,
    TRAJECTORY_COLUMNS,
    IntegratorSettings,
    Scenario,
    _regularize,
    integrate_step,
    make_rates,
    propagate,
)
from modqlaw.scenario import preset

MU = EARTH.mu


def with_law(scn, law, **coast):
    ctl = scn.controller
    if coast:
        ctl = dataclasses.replace(ctl, coast=dataclasses.replace(ctl.coast, **coast))
    return dataclasses.replace(scn, controller=dataclasses.replace(ctl, law=law))


def short(scn, days):
    return dataclasses.replace(scn, max_days=days)


class TestIntegrator:
    def test_frozen_system(self):
        y = [1.0, 2.0, 3.0]
        assert integrate_step(y, lambda t, y: (0.0, 0.0, 0.0), 60.0) == y

    def test_coast_conserves_elements(self):
        el = OrbitalElements(7000.0, 0.01, math.radians(0.05), 0.0, 0.0, 0.0)
        sc = SpacecraftParams(300.0, 1.0, 3100.0)
        rates = make_rates(sc, (0.0, 1.0, 0.0), False, PerturbationToggles(), EARTH, None, 0.0, 0.0)
        period = 2 * math.pi * math.sqrt(el.a ** 3 / MU)
        y = [el.a, el.e, el.i, el.raan, el.argp, el.theta, sc.mass]
        n = 360
        for k in range(10 * n):
            y = integrate_step(y, rates, period / n)
        for z, z0 in zip(y[:5], el.slow):
            assert z == pytest.approx(z0, rel=1e-9)
        assert y[5] == pytest.approx(20 * math.pi, rel=1e-9)
        assert y[6] == sc.mass

    def test_regularize_negative_e(self):
        y = _regularize([8000.0, -0.01, 0.3, 0.1, 0.2, 1.0, 100.0])
        assert y[1] == 0.01
        assert y[4] == pytest.approx(0.2 + math.pi)
        assert y[5] == pytest.approx(1.0 - math.pi)

    def test_regularize_negative_i(self):
        y = _regularize([8000.0, 0.1, -0.2, 0.1, 0.2, 1.0, 100.0])
        assert y[2] == 0.2
        assert y[3] == pytest.approx(0.1 + math.pi)

    def test_regularize_floors(self):
        y = _regularize([8000.0, 1e-9, 1e-9, 0.0, 0.0, 0.0, 100.0])
        assert y[1] == 1e-4 and y[2] == 1e-4


class TestEngines:
    @pytest.mark.parametrize("case, law, days, coast", [
        ("caseA", "modified", 2.0, {}),
        ("caseA", "classic", 2.0, {}),
        ("caseB", "modified", 2.0, {}),
        ("caseC", "modified", 3.0, {"eta_threshold": 0.3}),
        ("caseC", "classic", 1.0, {"eta_threshold": 0.2}),
    ])
    def test_compiled_matches_python(self, case, law, days, coast):
        scn = short(with_law(preset(case), law, **coast), days)
        tc, sc = propagate(scn, "compiled")
        tp, sp = propagate(scn, "python")
        assert len(tc) == len(tp)
        assert sc.termination == sp.termination
        assert np.array_equal(tc["thrust_on"], tp["thrust_on"])
        assert np.array_equal(tc["eclipse"], tp["eclipse"])
        for name in ("a", "e", "i", "mass", "V"):
            np.testing.assert_allclose(tc[name], tp[name], rtol=1e-9)
        np.testing.assert_allclose(tc["eta_r"], tp["eta_r"], atol=1e-6)
        assert sc.propellant_kg == pytest.approx(sp.propellant_kg, rel=1e-12)

    def test_unsupported_forces_use_python(self):
        scn = short(preset("caseA"), 0.05)
        scn = dataclasses.replace(scn, perturbations=PerturbationToggles(j2=True, third_body=True))
        with pytest.raises(ValueError):
            propagate(scn, "compiled")
        _, s = propagate(scn)
        assert s.steps == 72

    def test_unknown_engine(self):
        with pytest.raises(ValueError):
            propagate(preset("caseA"), "fortran")


class TestTermination:
    def test_already_converged(self):
        scn = preset("caseA")
        scn = dataclasses.replace(scn, initial=scn.initial.replace(a=42000.0))
        traj, s = propagate(scn)
        assert s.converged and s.termination == "converged" and s.steps == 0
        assert len(traj) == 1 and not traj["thrust_on"][0]

    def test_periapsis_violation(self):
        scn = preset("caseA")
        scn = dataclasses.replace(scn, initial=OrbitalElements(6800.0, 0.05, 0.1))
        _, s = propagate(scn)
        assert s.termination == "periapsis-violation" and not s.converged

    def test_mass_floor(self):
        scn = dataclasses.replace(preset("caseA"), integrator=IntegratorSettings(min_mass_fraction=0.999))
        _, s = propagate(scn)
        assert s.termination == "mass-floor"
        assert s.final_mass <= 0.999 * 300.0

    def test_max_duration(self):
        traj, s = propagate(short(preset("caseA"), 0.5))
        assert s.termination == "max-duration"
        assert s.transfer_days == pytest.approx(0.5)
        assert len(traj) == 721

    def test_record_every(self):
        scn = dataclasses.replace(short(preset("caseA"), 0.5), integrator=IntegratorSettings(record_every=7))
        traj, s = propagate(scn)
        # every 7th step plus the terminal row
        assert len(traj) == len(range(0, s.steps, 7)) + 1
        assert np.all(np.diff(traj["t"]) > 0)

    def test_columns(self):
        traj, _ = propagate(short(preset("caseA"), 0.1))
        assert tuple(traj.columns) == TRAJECTORY_COLUMNS
        assert traj["thrust_on"].dtype == bool


class TestClosedLoop:
    def test_mass_accounting_case_c(self):
        scn = with_law(preset("caseC"), "modified", eta_threshold=0.3)
        scn = short(scn, 20.0)
        traj, s = propagate(scn)
        flow = -mass_rate(scn.spacecraft, True)
        assert s.propellant_kg == pytest.approx(flow * s.thrust_time_s, rel=1e-9)
        assert s.thrust_time_s < s.transfer_days * DAY

    def test_full_duty_cycle_without_eclipse(self):
        scn = short(with_law(preset("caseA"), "modified", eclipse_coast=False), 3.0)
        traj, _ = propagate(scn)
        assert traj["thrust_on"][:-1].all()

    def test_eclipse_coasting(self):
        traj, _ = propagate(short(preset("caseC"), 5.0))
        ecl = traj["eclipse"]
        assert ecl.any()
        assert not traj["thrust_on"][ecl].any()

    def test_case_a_modified_converges_with_nonpositive_vdot(self):
        traj, s = propagate(preset("caseA"))
        assert s.converged
        on = traj["thrust_on"]
        assert np.all(traj["Vdot"][on] <= 1e-15)

    def test_case_b_modified_bounded_overshoot(self):
        scn = preset("caseB")
        traj, s = propagate(scn)
        assert s.converged
        assert abs(math.degrees(s.final.i) - 90.0) <= 0.01
        assert s.max_sma_km <= scn.target.a * (scn.controller.modified.zeta + 0.15)
        assert s.min_theta_rate > 0.0

    def test_case_c_anomaly_rate_positive(self):
        _, s = propagate(preset("caseC"))
        assert s.converged
        assert s.min_theta_rate > 0.0

    def test_step_halving(self):
        scn = preset("caseA")
        _, s60 = propagate(scn)
        _, s30 = propagate(dataclasses.replace(scn, integrator=IntegratorSettings(step_s=30.0)))
        assert s30.transfer_days == pytest.approx(s60.transfer_days, rel=0.01)
        assert s30.propellant_kg == pytest.approx(s60.propellant_kg, rel=0.01)

    def test_orbit_sampling_doubling(self):
        scn = with_law(preset("caseC"), "modified", eta_threshold=0.3)
        _, s100 = propagate(scn)
        _, s200 = propagate(with_law(scn, "modified", n_theta=200))
        assert s200.transfer_days == pytest.approx(s100.transfer_days, rel=0.01)

    def test_deterministic(self):
        scn = short(preset("caseC"), 4.0)
        t1, _ = propagate(scn)
        t2, _ = propagate(scn)
        for name in TRAJECTORY_COLUMNS:
            assert np.array_equal(t1[name], t2[name])


class TestScenarioValidation:
    def test_max_days_positive(self):
        scn = preset("caseA")
        with pytest.raises(ValueError):
            dataclasses.replace(scn, max_days=0.0)

    def test_modified_needs_a_target(self):
        scn = dataclasses.replace(preset("caseA"), target=TargetSpec(e=0.01))
        with pytest.raises(ValueError):
            propagate(scn)

    def test_step_positive(self):
        with pytest.raises(ValueError):
            IntegratorSettings(step_s=0.0)
