import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from modqlaw.astro import (
    EARTH,
    CartesianState,
    DegenerateOrbitError,
    OrbitalElements,
    SunModel,
    TargetSpec,
    angular_distance,
    cartesian_to_coe,
    coe_to_cartesian,
    is_eclipsed,
    position_eci,
    sun_direction,
)

MU = EARTH.mu
CASE_A_INITIAL = OrbitalElements(7000.0, 0.01, math.radians(0.05), 0.0, 0.0, 0.0)


def random_elements(rng, n):
    for _ in range(n):
        yield OrbitalElements(
            a=rng.uniform(6600.0, 60000.0),
            e=rng.uniform(1e-4, 0.95),
            i=rng.uniform(1e-4, math.pi - 1e-4),
            raan=rng.uniform(0.0, 2 * math.pi),
            argp=rng.uniform(0.0, 2 * math.pi),
            theta=rng.uniform(0.0, 2 * math.pi),
        )


def element_error(x: OrbitalElements, y: OrbitalElements) -> float:
    """Max relative error; angles compared by wrapped difference relative to 2pi."""
    errs = [abs(x.a - y.a) / y.a, abs(x.e - y.e) / max(y.e, 1e-12), abs(x.i - y.i) / y.i]
    for u, v in ((x.raan, y.raan), (x.argp, y.argp), (x.theta, y.theta)):
        errs.append(abs(angular_distance(u, v, "raan")) / (2 * math.pi))
    return max(errs)


class TestElements:
    def test_angles_normalized(self):
        el = OrbitalElements(7000.0, 0.1, 0.5, -0.1, 7.0, 2 * math.pi)
        assert 0.0 <= el.raan < 2 * math.pi
        assert el.argp == pytest.approx(7.0 - 2 * math.pi)
        assert el.theta == 0.0

    @pytest.mark.parametrize("kwargs", [
        dict(a=-1.0, e=0.1, i=0.1),
        dict(a=7000.0, e=1.0, i=0.1),
        dict(a=7000.0, e=-0.1, i=0.1),
        dict(a=7000.0, e=0.1, i=4.0),
        dict(a=float("nan"), e=0.1, i=0.1),
    ])
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ValueError):
            OrbitalElements(**kwargs)

    def test_derived_quantities(self):
        el = OrbitalElements(24363.9, 0.73, math.radians(28.5), 0.0, math.radians(178.0), 0.0)
        assert el.rp == pytest.approx(24363.9 * 0.27)
        assert el.ra == pytest.approx(24363.9 * 1.73)
        assert el.p == pytest.approx(24363.9 * (1 - 0.73 ** 2))
        assert el.radius == pytest.approx(el.rp)

    def test_clamped(self):
        el = OrbitalElements(7000.0, 0.0, 0.0).clamped()
        assert el.e == 1e-4 and el.i == 1e-4


class TestCartesian:
    def test_circular_equatorial(self):
        st_ = coe_to_cartesian(OrbitalElements(7000.0, 0.0, 0.0), MU)
        np.testing.assert_allclose(st_.position, [7000.0, 0.0, 0.0], atol=1e-9)
        np.testing.assert_allclose(st_.velocity, [0.0, math.sqrt(MU / 7000.0), 0.0], atol=1e-12)

    def test_apoapsis_radius(self):
        el = OrbitalElements(20000.0, 0.4, 0.7, 1.0, 2.0, math.pi)
        assert np.linalg.norm(coe_to_cartesian(el).position) == pytest.approx(28000.0, rel=1e-14)

    def test_case_c_periapsis(self):
        el = OrbitalElements(24363.9, 0.73, math.radians(28.5), 0.0, math.radians(178.0), 0.0)
        r = np.linalg.norm(coe_to_cartesian(el).position)
        assert r == pytest.approx(24363.9 * (1 - 0.73), rel=1e-13)

    def test_angular_momentum_and_energy(self):
        rng = np.random.default_rng(1)
        for el in random_elements(rng, 500):
            s = coe_to_cartesian(el, MU)
            h = np.linalg.norm(np.cross(s.position, s.velocity))
            assert h == pytest.approx(math.sqrt(MU * el.p), rel=1e-12)
            energy = 0.5 * s.velocity @ s.velocity - MU / np.linalg.norm(s.position)
            assert energy == pytest.approx(-MU / (2 * el.a), rel=1e-10)

    def test_case_a_round_trip(self):
        back = cartesian_to_coe(coe_to_cartesian(CASE_A_INITIAL, MU), MU)
        assert element_error(back, CASE_A_INITIAL) < 1e-9

    def test_random_round_trip(self):
        rng = np.random.default_rng(20240601)
        worst = max(element_error(cartesian_to_coe(coe_to_cartesian(el, MU), MU), el)
                    for el in random_elements(rng, 10_000))
        assert worst < 1e-9

    def test_rectilinear_is_degenerate(self):
        st_ = CartesianState(np.array([7000.0, 0.0, 0.0]), np.array([1.0, 0.0, 0.0]))
        with pytest.raises(DegenerateOrbitError):
            cartesian_to_coe(st_, MU)

    def test_hyperbolic_is_degenerate(self):
        st_ = CartesianState(np.array([7000.0, 0.0, 0.0]), np.array([0.0, 12.0, 0.1]))
        with pytest.raises(DegenerateOrbitError):
            cartesian_to_coe(st_, MU)

    def test_below_floor_is_degenerate(self):
        st_ = coe_to_cartesian(OrbitalElements(7000.0, 0.0, 0.3), MU)
        with pytest.raises(DegenerateOrbitError):
            cartesian_to_coe(st_, MU)

    def test_scalar_position_matches(self):
        rng = np.random.default_rng(3)
        for el in random_elements(rng, 50):
            np.testing.assert_allclose(position_eci(el.a, el.e, el.i, el.raan, el.argp, el.theta),
                                       coe_to_cartesian(el).position, rtol=1e-12, atol=1e-8)


class TestDistance:
    def test_zero(self):
        assert angular_distance(42000.0, 42000.0, "a") == 0.0

    def test_wraparound(self):
        assert angular_distance(0.1, 2 * math.pi - 0.1, "argp") == pytest.approx(0.2)

    def test_case_c_inclination(self):
        d = angular_distance(math.radians(28.5), math.radians(0.01), "i")
        assert d == pytest.approx(math.radians(28.49))

    @given(st.floats(-20, 20), st.floats(-20, 20), st.sampled_from(["a", "e", "i", "raan", "argp"]))
    def test_antisymmetric(self, x, y, kind):
        # exactly half a turn apart is the one point where (-pi, pi] breaks symmetry
        assume(abs(abs(math.remainder(x - y, 2 * math.pi)) - math.pi) > 1e-9)
        assert angular_distance(x, y, kind) == pytest.approx(-angular_distance(y, x, kind), abs=1e-12)

    def test_angles_wrapped_into_half_open_interval(self):
        assert angular_distance(math.pi, 0.0, "raan") == pytest.approx(math.pi)
        assert -math.pi < angular_distance(0.0, math.pi, "raan") <= math.pi


class TestTarget:
    def test_needs_one_target(self):
        with pytest.raises(ValueError):
            TargetSpec()

    def test_negative_tolerance(self):
        with pytest.raises(ValueError):
            TargetSpec(a=42000.0, tolerances={"a": -1.0})

    def test_flags(self):
        t = TargetSpec(a=42000.0, e=0.01)
        assert t.targeted == (True, True, False, False, False)


class TestSun:
    def test_reference_direction(self):
        np.testing.assert_allclose(sun_direction(0.0), [1.0, 0.0, 0.0])

    def test_quarter_year(self):
        model = SunModel()
        quarter = 0.5 * math.pi / model.rate
        s = np.array(sun_direction(quarter, model))
        assert abs(s @ [1.0, 0.0, 0.0]) < 1e-12
        ecliptic_normal = np.array([0.0, -math.sin(model.obliquity), math.cos(model.obliquity)])
        assert abs(s @ ecliptic_normal) < 1e-12

    def test_unit_norm(self):
        for t in np.linspace(0.0, 4e7, 97):
            assert np.linalg.norm(sun_direction(t)) == pytest.approx(1.0, abs=1e-14)


class TestEclipse:
    def test_deep_shadow(self):
        assert is_eclipsed((-7000.0, 0.0, 0.0), (1.0, 0.0, 0.0))

    def test_sunlit(self):
        assert not is_eclipsed((7000.0, 0.0, 0.0), (1.0, 0.0, 0.0))

    @pytest.mark.parametrize("radius", [6400.0, 7000.0, 42164.0])
    def test_terminator(self, radius):
        assert not is_eclipsed((0.0, radius, 0.0), (1.0, 0.0, 0.0))

    def test_rotation_invariance(self):
        rng = np.random.default_rng(7)
        for _ in range(2000):
            q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
            pos = rng.normal(size=3)
            pos *= rng.uniform(6500.0, 50000.0) / np.linalg.norm(pos)
            sun = rng.normal(size=3)
            sun /= np.linalg.norm(sun)
            assert is_eclipsed(pos, sun) == is_eclipsed(q @ pos, q @ sun)
