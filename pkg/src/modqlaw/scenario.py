"""JSON scenario files: strict parsing, defaults, and a resolved-config echo.

Angles are degrees in files and radians in memory. The echo produced by
``scenario_to_dict`` parses back to an identical ``Scenario``.
"""

from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path

from .astro import EARTH, OrbitalElements, SunModel, TargetSpec
from .classic import ClassicConfig
from .dynamics import PerturbationToggles, SpacecraftParams
from .guidance import CoastPolicy, ControllerConfig
from .modified import ModifiedConfig
from .propagator import IntegratorSettings, Scenario

PRESETS = ("caseA", "caseB", "caseC")

_SCHEMA = {
    "name": None,
    "spacecraft": {"mass_kg", "thrust_N", "isp_s"},
    "initial_orbit": {"a_km", "e", "i_deg", "raan_deg", "argp_deg", "theta_deg"},
    "target": {"a_km", "e", "i_deg", "raan_deg", "argp_deg", "tolerances"},
    "controller": {"law", "weights", "hyperparameters", "eta_threshold", "n_theta", "eclipse_coast"},
    "dynamics": {"j2", "third_body", "srp", "epoch_s", "sun_longitude_deg", "max_days"},
    "integrator": {"step_s", "record_every", "crash_altitude_km", "min_mass_fraction"},
}
_TOLERANCE_KEYS = {"a_km": "a", "e": "e", "i_deg": "i", "raan_deg": "raan", "argp_deg": "argp"}
_WEIGHT_KEYS = ("a", "e", "i", "raan", "argp")
_HYPER_KEYS = {"zeta", "delta_e", "rp_min_km", "m", "n", "r", "k", "w_p", "b",
               "penalty", "modified_penalty"}


class ScenarioError(ValueError):
    """Invalid scenario document; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _deg(x: float) -> float:
    """Degrees whose conversion back to radians reproduces x exactly."""
    d = math.degrees(x)
    if math.radians(d) == x:
        return d
    lo = hi = d
    for _ in range(64):
        lo, hi = math.nextafter(lo, -math.inf), math.nextafter(hi, math.inf)
        for cand in (lo, hi):
            if math.radians(cand) == x:
                return cand
    return d


def _check_keys(section: str, got: dict, allowed) -> None:
    if not isinstance(got, dict):
        raise ScenarioError(section, "expected an object")
    for key in got:
        if key not in allowed:
            raise ScenarioError(f"{section}.{key}", "unknown key")


def _num(section: str, key: str, doc: dict, default=None, required=False) -> float:
    if key not in doc:
        if required:
            raise ScenarioError(f"{section}.{key}", "missing required key")
        return default
    val = doc[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
        raise ScenarioError(f"{section}.{key}", f"expected a finite number, got {val!r}")
    return float(val)


def _flag(section: str, key: str, doc: dict, default: bool) -> bool:
    val = doc.get(key, default)
    if not isinstance(val, bool):
        raise ScenarioError(f"{section}.{key}", f"expected true/false, got {val!r}")
    return val


def parse_scenario(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario", "expected an object")
    for key in doc:
        if key not in _SCHEMA:
            raise ScenarioError(key, "unknown key")
    for section in ("spacecraft", "initial_orbit", "target"):
        if section not in doc:
            raise ScenarioError(section, "missing required section")
    for section, allowed in _SCHEMA.items():
        if allowed is not None and section in doc:
            _check_keys(section, doc[section], allowed)

    s = doc["spacecraft"]
    try:
        spacecraft = SpacecraftParams(
            _num("spacecraft", "mass_kg", s, required=True),
            _num("spacecraft", "thrust_N", s, required=True),
            _num("spacecraft", "isp_s", s, required=True),
        )
    except ValueError as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError("spacecraft", str(exc)) from None

    o = doc["initial_orbit"]
    vals = dict(
        a=_num("initial_orbit", "a_km", o, required=True),
        e=_num("initial_orbit", "e", o, required=True),
        i=math.radians(_num("initial_orbit", "i_deg", o, required=True)),
        raan=math.radians(_num("initial_orbit", "raan_deg", o, 0.0)),
        argp=math.radians(_num("initial_orbit", "argp_deg", o, 0.0)),
        theta=math.radians(_num("initial_orbit", "theta_deg", o, 0.0)),
    )
    if vals["e"] < 1e-4:
        raise ScenarioError("initial_orbit.e", "below the 1e-4 singularity floor")
    if vals["i"] < 1e-4 or vals["i"] > math.pi - 1e-4:
        raise ScenarioError("initial_orbit.i_deg", "within 1e-4 rad of an equatorial singularity")
    try:
        initial = OrbitalElements(**vals)
    except ValueError as exc:
        raise ScenarioError("initial_orbit", str(exc)) from None

    tg = doc["target"]
    tol_doc = tg.get("tolerances", {})
    _check_keys("target.tolerances", tol_doc, _TOLERANCE_KEYS)
    tolerances = {}
    for key, name in _TOLERANCE_KEYS.items():
        v = _num("target.tolerances", key, tol_doc)
        if v is not None:
            tolerances[name] = math.radians(v) if key.endswith("_deg") else v

    def angle(key):
        v = _num("target", key, tg)
        return None if v is None else math.radians(v)

    try:
        target = TargetSpec(
            a=_num("target", "a_km", tg), e=_num("target", "e", tg), i=angle("i_deg"),
            raan=angle("raan_deg"), argp=angle("argp_deg"), tolerances=tolerances,
        )
    except ValueError as exc:
        raise ScenarioError("target", str(exc)) from None

    c = doc.get("controller", {})
    law = c.get("law", "modified")
    if law not in ("classic", "modified"):
        raise ScenarioError("controller.law", f"expected 'classic' or 'modified', got {law!r}")
    w_doc = c.get("weights", {})
    _check_keys("controller.weights", w_doc, _WEIGHT_KEYS)
    weights = [_num("controller.weights", k, w_doc, 1.0) for k in _WEIGHT_KEYS]
    hp = c.get("hyperparameters", {})
    _check_keys("controller.hyperparameters", hp, _HYPER_KEYS)
    sec = "controller.hyperparameters"
    rp_min = _num(sec, "rp_min_km", hp, EARTH.r_earth + 200.0)
    try:
        classic = ClassicConfig(
            weights=weights, w_p=_num(sec, "w_p", hp, 1.0), m=_num(sec, "m", hp, 3.0),
            n=_num(sec, "n", hp, 4.0), r_exp=_num(sec, "r", hp, 2.0), k=_num(sec, "k", hp, 100.0),
            rp_min=rp_min, b=_num(sec, "b", hp, 0.0), penalty=_flag(sec, "penalty", hp, True),
        )
        modified = ModifiedConfig(
            weights=weights[:3], zeta=_num(sec, "zeta", hp, 2.0),
            delta_e=_num(sec, "delta_e", hp, 0.05), rp_min=rp_min,
            penalty=_flag(sec, "modified_penalty", hp, False), w_p=classic.w_p, k=classic.k,
        )
        coast = CoastPolicy(
            eta_threshold=_num("controller", "eta_threshold", c, 0.0),
            n_theta=int(_num("controller", "n_theta", c, 100)),
            eclipse_coast=_flag("controller", "eclipse_coast", c, True),
        )
    except ValueError as exc:
        raise ScenarioError("controller", str(exc)) from None
    controller = ControllerConfig(law, classic, modified, coast)

    d = doc.get("dynamics", {})
    perturbations = PerturbationToggles(
        j2=_flag("dynamics", "j2", d, True),
        third_body=_flag("dynamics", "third_body", d, False),
        srp=_flag("dynamics", "srp", d, False),
    )
    sun = SunModel(epoch_longitude=math.radians(_num("dynamics", "sun_longitude_deg", d, 0.0)))
    max_days = _num("dynamics", "max_days", d, 365.0)
    if not max_days > 0.0:
        raise ScenarioError("dynamics.max_days", "must be positive")

    g = doc.get("integrator", {})
    try:
        integrator = IntegratorSettings(
            step_s=_num("integrator", "step_s", g, 60.0),
            record_every=int(_num("integrator", "record_every", g, 1)),
            crash_altitude=_num("integrator", "crash_altitude_km", g, 100.0),
            min_mass_fraction=_num("integrator", "min_mass_fraction", g, 0.05),
        )
    except ValueError as exc:
        raise ScenarioError("integrator", str(exc)) from None

    name = doc.get("name", "")
    if not isinstance(name, str):
        raise ScenarioError("name", "expected a string")
    return Scenario(
        initial=initial, target=target, spacecraft=spacecraft, controller=controller,
        perturbations=perturbations, sun=sun, epoch_s=_num("dynamics", "epoch_s", d, 0.0),
        integrator=integrator, max_days=max_days, name=name,
    )


def scenario_to_dict(scn: Scenario) -> dict:
    """Fully resolved document, every default spelled out."""
    el, tg, ctl = scn.initial, scn.target, scn.controller
    cl, md = ctl.classic, ctl.modified
    target = {}
    for key, val in (("a_km", tg.a), ("e", tg.e)):
        if val is not None:
            target[key] = val
    for key, val in (("i_deg", tg.i), ("raan_deg", tg.raan), ("argp_deg", tg.argp)):
        if val is not None:
            target[key] = _deg(val)
    target["tolerances"] = {
        key: (_deg(tg.tolerances[name]) if key.endswith("_deg") else tg.tolerances[name])
        for key, name in _TOLERANCE_KEYS.items()
    }
    # one weight set per file: the active law's
    weights = dict(zip(_WEIGHT_KEYS, cl.weights))
    if ctl.law == "modified":
        weights.update(zip(_WEIGHT_KEYS[:3], md.weights))
    return {
        "name": scn.name,
        "spacecraft": {"mass_kg": scn.spacecraft.mass, "thrust_N": scn.spacecraft.thrust,
                       "isp_s": scn.spacecraft.isp},
        "initial_orbit": {"a_km": el.a, "e": el.e, "i_deg": _deg(el.i), "raan_deg": _deg(el.raan),
                          "argp_deg": _deg(el.argp), "theta_deg": _deg(el.theta)},
        "target": target,
        "controller": {
            "law": ctl.law,
            "weights": weights,
            "hyperparameters": {
                "zeta": md.zeta, "delta_e": md.delta_e, "rp_min_km": md.rp_min,
                "m": cl.m, "n": cl.n, "r": cl.r_exp, "k": cl.k, "w_p": cl.w_p, "b": cl.b,
                "penalty": cl.penalty, "modified_penalty": md.penalty,
            },
            "eta_threshold": ctl.coast.eta_threshold,
            "n_theta": ctl.coast.n_theta,
            "eclipse_coast": ctl.coast.eclipse_coast,
        },
        "dynamics": {
            "j2": scn.perturbations.j2, "third_body": scn.perturbations.third_body,
            "srp": scn.perturbations.srp, "epoch_s": scn.epoch_s,
            "sun_longitude_deg": _deg(scn.sun.epoch_longitude), "max_days": scn.max_days,
        },
        "integrator": {
            "step_s": scn.integrator.step_s, "record_every": scn.integrator.record_every,
            "crash_altitude_km": scn.integrator.crash_altitude,
            "min_mass_fraction": scn.integrator.min_mass_fraction,
        },
    }


def load_scenario(path) -> Scenario:
    """Load a scenario from a path or a preset name (caseA, caseB, caseC)."""
    text = None
    p = Path(path)
    if p.exists():
        text = p.read_text()
    else:
        stem = p.name[:-5] if p.name.endswith(".json") else p.name
        if stem in PRESETS:
            text = resources.files("modqlaw.presets").joinpath(f"{stem}.json").read_text()
    if text is None:
        raise FileNotFoundError(f"no scenario file or preset named {path}")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError("scenario", f"invalid JSON: {exc}") from None
    return parse_scenario(doc)


def preset(name: str) -> Scenario:
    return load_scenario(name)
