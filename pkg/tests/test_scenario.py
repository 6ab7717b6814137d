import copy
import dataclasses
import json
import math

import numpy as np
import pytest

from modqlaw.astro import EARTH
from modqlaw.propagator import TRAJECTORY_COLUMNS, propagate
from modqlaw.scenario import PRESETS, ScenarioError, load_scenario, parse_scenario, preset, scenario_to_dict

MINIMAL = {
    "spacecraft": {"mass_kg": 300.0, "thrust_N": 1.0, "isp_s": 3100.0},
    "initial_orbit": {"a_km": 7000.0, "e": 0.01, "i_deg": 0.05},
    "target": {"a_km": 42000.0, "e": 0.01},
}


def doc(**changes):
    d = copy.deepcopy(MINIMAL)
    for path, val in changes.items():
        section, key = path.split("__")
        d.setdefault(section, {})[key] = val
    return d


class TestPresets:
    def test_case_a(self):
        s = preset("caseA")
        assert (s.spacecraft.mass, s.spacecraft.thrust, s.spacecraft.isp) == (300.0, 1.0, 3100.0)
        assert (s.initial.a, s.initial.e) == (7000.0, 0.01)
        assert math.degrees(s.initial.i) == pytest.approx(0.05)
        assert (s.target.a, s.target.e, s.target.i) == (42000.0, 0.01, None)

    def test_case_b(self):
        s = preset("caseB")
        assert s.initial.a == s.target.a == 10000.0
        assert math.degrees(s.target.i) == pytest.approx(90.0)
        assert s.max_days == 730.0

    def test_case_c(self):
        s = preset("caseC")
        assert (s.spacecraft.mass, s.spacecraft.thrust, s.spacecraft.isp) == (1200.0, 0.312, 1800.0)
        assert (s.initial.a, s.initial.e) == (24363.9, 0.73)
        assert math.degrees(s.initial.i) == pytest.approx(28.5)
        assert math.degrees(s.initial.argp) == pytest.approx(178.0)
        assert (s.target.a, s.target.e) == (42164.0, 0.01)
        assert math.degrees(s.target.i) == pytest.approx(0.01)

    def test_preset_by_filename(self):
        assert load_scenario("caseC.json") == preset("caseC")


class TestDefaults:
    def test_documented_defaults(self):
        s = parse_scenario(MINIMAL)
        ctl = s.controller
        assert ctl.law == "modified" and ctl.coast.eta_threshold == 0.0
        assert ctl.coast.eclipse_coast and ctl.coast.n_theta == 100
        assert ctl.modified.zeta == 2.0 and ctl.modified.delta_e == 0.05
        assert ctl.modified.rp_min == EARTH.r_earth + 200.0
        assert ctl.classic.weights == (1.0,) * 5
        assert s.perturbations.j2 and not s.perturbations.third_body and not s.perturbations.srp
        assert s.integrator.step_s == 60.0 and s.max_days == 365.0
        assert s.initial.theta == 0.0

    def test_omitted_targets_free(self):
        assert parse_scenario(MINIMAL).target.targeted == (True, True, False, False, False)


class TestRejection:
    @pytest.mark.parametrize("bad, key", [
        ({"colour": "red"}, "colour"),
        (doc(spacecraft__colour=1), "spacecraft.colour"),
        (doc(controller__gain=1), "controller.gain"),
        (doc(controller__weights={"q": 1.0}), "controller.weights.q"),
        (doc(controller__hyperparameters={"zeta": 5.0}), "controller"),
        (doc(controller__law="pid"), "controller.law"),
        (doc(spacecraft__mass_kg="heavy"), "spacecraft.mass_kg"),
        (doc(spacecraft__mass_kg=-1.0), "spacecraft"),
        (doc(initial_orbit__e=0.0), "initial_orbit.e"),
        (doc(initial_orbit__i_deg=0.0), "initial_orbit.i_deg"),
        (doc(dynamics__max_days=0.0), "dynamics.max_days"),
        (doc(dynamics__j2="yes"), "dynamics.j2"),
        (doc(target__tolerances={"b_km": 1.0}), "target.tolerances.b_km"),
        (doc(integrator__step_s=0.0), "integrator"),
    ])
    def test_error_names_key(self, bad, key):
        with pytest.raises(ScenarioError) as info:
            parse_scenario(bad)
        assert info.value.key == key

    @pytest.mark.parametrize("section", ["spacecraft", "initial_orbit", "target"])
    def test_missing_section(self, section):
        d = copy.deepcopy(MINIMAL)
        del d[section]
        with pytest.raises(ScenarioError) as info:
            parse_scenario(d)
        assert info.value.key == section

    def test_missing_required_key(self):
        d = copy.deepcopy(MINIMAL)
        del d["spacecraft"]["isp_s"]
        with pytest.raises(ScenarioError) as info:
            parse_scenario(d)
        assert info.value.key == "spacecraft.isp_s"

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "s.json"
        p.write_text("{not json")
        with pytest.raises(ScenarioError):
            load_scenario(p)

    def test_missing_file(self):
        with pytest.raises(FileNotFoundError):
            load_scenario("no-such-scenario.json")


class TestRoundTrip:
    @pytest.mark.parametrize("name", PRESETS)
    def test_echo_parses_to_same_scenario(self, name):
        scn = preset(name)
        echo = scenario_to_dict(scn)
        assert parse_scenario(json.loads(json.dumps(echo))) == scn

    def test_echo_fixed_point(self):
        d = doc(initial_orbit__theta_deg=33.3, target__i_deg=12.345, controller__eta_threshold=0.25)
        once = scenario_to_dict(parse_scenario(d))
        assert scenario_to_dict(parse_scenario(once)) == once

    def test_echo_spells_out_defaults(self):
        echo = scenario_to_dict(parse_scenario(MINIMAL))
        assert echo["controller"]["hyperparameters"]["zeta"] == 2.0
        assert echo["integrator"]["step_s"] == 60.0
        assert set(echo["target"]["tolerances"]) == {"a_km", "e", "i_deg", "raan_deg", "argp_deg"}

    @pytest.mark.parametrize("name, law", [("caseA", "classic"), ("caseC", "modified")])
    def test_echo_reproduces_trajectory(self, name, law):
        scn = dataclasses.replace(preset(name), max_days=2.0)
        scn = dataclasses.replace(scn, controller=dataclasses.replace(scn.controller, law=law))
        again = parse_scenario(json.loads(json.dumps(scenario_to_dict(scn))))
        t1, s1 = propagate(scn)
        t2, s2 = propagate(again)
        for col in TRAJECTORY_COLUMNS:
            assert np.array_equal(t1[col], t2[col])
        assert s1.to_dict() == s2.to_dict()
