"""Cone geometry over a base space: distance, geodesics, mass lifts."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uot.cone import ConePoint, ConeTangent, cone_distance, cone_exp, lift_masses
from uot.errors import BranchCutError, DegenerateInputError, InvalidInputError
from uot.manifold import circle, sphere

C = circle()


def cp(theta, r):
    return ConePoint(C, [theta], r)


# ---------------------------------------------------------------------------
# cone_distance
# ---------------------------------------------------------------------------


def test_distance_same_point_is_zero():
    d, d2 = cone_distance(cp(0.3, 1.7), cp(0.3, 1.7))
    assert d == 0.0 and d2 == 0.0


def test_distance_radial_segment():
    d, d2 = cone_distance(cp(0.0, 1.0), cp(0.0, 2.0))
    assert d == pytest.approx(1.0, abs=1e-15)
    assert d2 == pytest.approx(1.0, abs=1e-15)


def test_distance_right_angle():
    # base points a quarter turn apart: the cosine term vanishes
    d, d2 = cone_distance(cp(0.0, 1.0), cp(np.pi / 2, 1.0))
    assert d2 == pytest.approx(2.0, abs=1e-12)
    assert d == pytest.approx(np.sqrt(2.0), abs=1e-12)


def test_distance_to_apex_is_radius():
    d, d2 = cone_distance(cp(1.2, 0.0), cp(4.0, 0.8))
    assert d == pytest.approx(0.8)
    assert d2 == pytest.approx(0.64)


def test_all_apexes_coincide():
    d, _ = cone_distance(cp(0.0, 0.0), cp(3.0, 0.0))
    assert d == 0.0


def test_distance_clamps_beyond_quarter_turn():
    # any base separation >= pi/2 gives the same (Pythagorean) value
    for gap in (np.pi / 2, 2.0, np.pi):
        _, d2 = cone_distance(cp(0.0, 1.3), cp(gap, 0.7))
        assert d2 == pytest.approx(1.3**2 + 0.7**2, abs=1e-12)


def test_distance_symmetry_random():
    rng = np.random.default_rng(5)
    for _ in range(300):
        a = cp(rng.uniform(0, 2 * np.pi), rng.uniform(0, 3))
        b = cp(rng.uniform(0, 2 * np.pi), rng.uniform(0, 3))
        dab = cone_distance(a, b)
        dba = cone_distance(b, a)
        assert dab[0] == pytest.approx(dba[0], abs=1e-12)
        assert dab[1] >= 0.0


def test_distance_rejects_space_mismatch():
    p = ConePoint(C, [0.0], 1.0)
    q = ConePoint(sphere(2, 1.0), [1.0, 0.0, 0.0], 1.0)
    with pytest.raises(InvalidInputError):
        cone_distance(p, q)


def test_cone_point_rejects_negative_radius():
    with pytest.raises(InvalidInputError):
        ConePoint(C, [0.0], -0.1)


# ---------------------------------------------------------------------------
# cone_exp
# ---------------------------------------------------------------------------


def test_exp_radial_motion():
    out = cone_exp(cp(0.0, 1.0), 1.0, ConeTangent(v_theta=0.0, v_r=1.0))
    assert out.r == pytest.approx(2.0, abs=1e-14)
    assert out.base[0] == pytest.approx(0.0, abs=1e-14)


def test_exp_angular_motion():
    out = cone_exp(cp(0.0, 1.0), 1.0, ConeTangent(v_theta=1.0, v_r=0.0))
    assert out.r == pytest.approx(np.sqrt(2.0), abs=1e-14)
    assert out.base[0] == pytest.approx(np.pi / 4, abs=1e-14)


def test_exp_from_apex_is_degenerate():
    with pytest.raises(DegenerateInputError):
        cone_exp(cp(0.0, 0.0), 0.5, ConeTangent(v_theta=0.0, v_r=1.0))


def test_exp_hits_branch_cut():
    with pytest.raises(BranchCutError):
        cone_exp(cp(0.0, 1.0), 1.0, ConeTangent(v_theta=0.0, v_r=-1.0))


def test_exp_runs_at_metric_speed():
    rng = np.random.default_rng(17)
    for _ in range(100):
        start = cp(rng.uniform(0, 2 * np.pi), rng.uniform(0.2, 2.0))
        vt = ConeTangent(v_theta=rng.uniform(-1, 1), v_r=rng.uniform(-0.1, 1.0))
        speed = np.hypot(vt.v_r, start.r * vt.v_theta)
        t = rng.uniform(0.0, 0.5)
        end = cone_exp(start, t, vt)
        d, _ = cone_distance(start, end)
        assert d == pytest.approx(t * speed, abs=1e-8)


def test_exp_on_sphere_base():
    s = sphere(2, 1.0)
    start = ConePoint(s, [1.0, 0.0, 0.0], 1.0)
    vt = ConeTangent(v_theta=1.0, v_r=0.0, direction=[0.0, 1.0, 0.0])
    end = cone_exp(start, 1.0, vt)
    assert end.r == pytest.approx(np.sqrt(2.0), abs=1e-12)
    expected = [np.cos(np.pi / 4), np.sin(np.pi / 4), 0.0]
    assert end.base == pytest.approx(expected, abs=1e-12)


# ---------------------------------------------------------------------------
# lift_masses
# ---------------------------------------------------------------------------


def test_lift_equals_squared_cone_distance():
    rng = np.random.default_rng(23)
    for _ in range(200):
        x, y = rng.uniform(0, 2 * np.pi, size=2)
        a, b = rng.uniform(0, 4, size=2)
        sigma = lift_masses(C, [x], a, [y], b)
        _, d2 = cone_distance(cp(x, np.sqrt(a)), cp(y, np.sqrt(b)))
        assert sigma == pytest.approx(d2, abs=1e-12)


@pytest.mark.parametrize("lam", [0.1, 1.0, 7.0])
def test_lift_is_one_homogeneous(lam):
    rng = np.random.default_rng(31)
    for _ in range(50):
        x, y = rng.uniform(0, 2 * np.pi, size=2)
        a, b = rng.uniform(0.01, 4, size=2)
        assert lift_masses(C, [x], lam * a, [y], lam * b) == pytest.approx(
            lam * lift_masses(C, [x], a, [y], b), rel=1e-12)


def test_lift_clamps_to_mass_sum():
    assert lift_masses(C, [0.0], 1.5, [3.0], 0.25) == pytest.approx(1.75, abs=1e-14)


def test_lift_vanishing_mass():
    assert lift_masses(C, [0.0], 0.0, [1.0], 0.7) == pytest.approx(0.7)
    assert lift_masses(C, [0.0], 0.0, [1.0], 0.0) == 0.0


def test_lift_rejects_negative_mass():
    with pytest.raises(InvalidInputError):
        lift_masses(C, [0.0], -1.0, [1.0], 1.0)


@given(
    st.floats(min_value=0.0, max_value=10.0),
    st.floats(min_value=0.0, max_value=10.0),
    st.floats(min_value=0.0, max_value=6.28),
)
def test_lift_nonnegative(a, b, gap):
    sigma = lift_masses(C, [0.0], a, [gap], b)
    assert sigma >= 0.0
    assert sigma <= a + b + 1e-12
