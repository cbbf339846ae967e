"""Tests for radial cost profiles, curvature coefficients, and the
fourth-order regularity tensor."""

import numpy as np
import pytest

from uot.errors import DomainError, InvalidInputError
from uot.manifold import euclidean, hyperbolic, sphere
from uot.mtw import (
    j_orthogonalize,
    lee_li_derivatives,
    lee_li_functions,
    mtw_coefficients,
    mtw_condition_check,
    mtw_decomposed,
    mtw_fd_tensor,
    quadratic_radial_cost,
    wfr_radial_cost,
)


def sphere_frame(rng):
    """A random unit base point with an orthonormal tangent pair."""
    x = rng.normal(size=3)
    x /= np.linalg.norm(x)
    r = rng.normal(size=3)
    e1 = r - np.dot(r, x) * x
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(x, e1)
    return x, e1, e2


def hyperbolic_frame(rng):
    """A random hyperboloid point with a Minkowski-orthonormal tangent pair."""
    t = rng.uniform(0.2, 0.8)
    ang = rng.uniform(0, 2 * np.pi)
    d = np.array([np.cos(ang), np.sin(ang)])
    x = np.array([np.cosh(t), np.sinh(t) * d[0], np.sinh(t) * d[1]])

    def mdot(a, b):
        return -a[0] * b[0] + a[1] * b[1] + a[2] * b[2]

    def project(a):
        return a + mdot(x, a) * x

    e1 = project(rng.normal(size=3))
    e1 /= np.sqrt(mdot(e1, e1))
    e2 = project(rng.normal(size=3))
    e2 -= mdot(e1, e2) * e1
    e2 /= np.sqrt(mdot(e2, e2))
    return x, e1, e2


# ---------------------------------------------------------------------------
# cost profiles
# ---------------------------------------------------------------------------


def test_profile_values_unit_radius():
    cost = wfr_radial_cost("sphere", 1.0)
    assert cost.l(np.pi / 4) == pytest.approx(np.log(2.0), abs=1e-14)
    assert cost.l_prime(np.pi / 4) == pytest.approx(2.0, abs=1e-14)
    assert cost.h(2.0) == pytest.approx(np.pi / 4, abs=1e-14)
    assert cost.h_prime(2.0) == pytest.approx(0.25, abs=1e-15)


def test_quadratic_profile_values():
    cost = quadratic_radial_cost()
    assert cost.l(3.0) == 4.5
    assert cost.l_prime(3.0) == 3.0
    assert cost.h(2.5) == 2.5
    assert cost.s_max == 10.0


@pytest.mark.parametrize("kind,radius", [
    ("sphere", 0.5), ("sphere", 1.0), ("sphere", 2.0),
    ("euclidean", 1.0), ("hyperbolic", 1.0),
])
def test_h_inverts_l_prime(kind, radius):
    cost = wfr_radial_cost(kind, radius)
    R = cost.radius
    d_top = min(np.pi if kind == "sphere" else np.inf, 0.5 * np.pi / R) - 1e-6
    rng = np.random.default_rng(3)
    for d in rng.uniform(0.05 * d_top, 0.95 * d_top, size=100):
        assert cost.h(cost.l_prime(d)) == pytest.approx(d, abs=1e-10)


def test_s_max_follows_the_usable_range():
    # the parameter range ends at l' of the smaller of diameter and cutoff
    half = wfr_radial_cost("sphere", 0.5)
    assert half.s_max == pytest.approx(half.l_prime(np.pi - 1e-6))
    unit = wfr_radial_cost("sphere", 1.0)
    assert unit.s_max == pytest.approx(unit.l_prime(0.5 * np.pi - 1e-6))
    capped = wfr_radial_cost("sphere", 1.0, s_max=3.0)
    assert capped.s_max == 3.0
    windowed = wfr_radial_cost("euclidean", d_max=1.0)
    assert windowed.s_max == pytest.approx(2.0 * np.tan(1.0 - 1e-6))


def test_profile_rejects_bad_arguments():
    with pytest.raises(InvalidInputError):
        wfr_radial_cost("torus")
    with pytest.raises(InvalidInputError):
        wfr_radial_cost("sphere", -1.0)


# ---------------------------------------------------------------------------
# comparison functions
# ---------------------------------------------------------------------------


def test_comparison_pair_unit_sphere():
    fns = lee_li_functions(wfr_radial_cost("sphere", 1.0))
    assert fns["A"](2.0) == pytest.approx(4.0, abs=1e-14)
    assert fns["B"](2.0) == pytest.approx(2.0, abs=1e-14)


def test_comparison_pair_half_sphere():
    fns = lee_li_functions(wfr_radial_cost("sphere", 0.5))
    # h(1) = pi/2, where the cotangent vanishes
    assert fns["A"](1.0) == pytest.approx(1.0, abs=1e-14)
    assert abs(fns["B"](1.0)) < 1e-15


def test_comparison_pair_flat_and_negative_curvature():
    fe = lee_li_functions(wfr_radial_cost("euclidean"))
    s = 1.3
    assert fe["B"](s) == pytest.approx(s / np.arctan(s / 2), abs=1e-14)
    fh = lee_li_functions(wfr_radial_cost("hyperbolic"))
    assert fh["B"](s) == pytest.approx(s / np.tanh(np.arctan(s / 2)), abs=1e-13)


def test_comparison_pair_guards_domain():
    fns = lee_li_functions(wfr_radial_cost("sphere", 1.0, s_max=4.0))
    for bad in (0.0, -1.0, 4.0, 5.0):
        with pytest.raises(DomainError):
            fns["A"](bad)


@pytest.mark.parametrize("label,cost", [
    ("sphere-half", wfr_radial_cost("sphere", 0.5, s_max=5.0)),
    ("sphere-unit", wfr_radial_cost("sphere", 1.0, s_max=5.0)),
    ("sphere-double", wfr_radial_cost("sphere", 2.0, s_max=5.0)),
    ("euclidean", wfr_radial_cost("euclidean", d_max=1.4, s_max=5.0)),
    ("hyperbolic", wfr_radial_cost("hyperbolic", d_max=1.4, s_max=5.0)),
    ("quadratic", quadratic_radial_cost()),
])
def test_closed_derivatives_match_stencils(label, cost):
    for s in np.geomspace(1e-2 * cost.s_max, 0.9 * cost.s_max, 15):
        closed = np.array(lee_li_derivatives(cost, float(s), "closed"))
        numeric = np.array(lee_li_derivatives(cost, float(s), "numeric"))
        scale = np.maximum(np.abs(closed), 1.0)
        assert np.max(np.abs(closed - numeric) / scale) < 1e-8


def test_derivatives_reject_unknown_method():
    with pytest.raises(InvalidInputError):
        lee_li_derivatives(quadratic_radial_cost(), 1.0, "autodiff")


# ---------------------------------------------------------------------------
# coefficient sweeps
# ---------------------------------------------------------------------------


def test_half_radius_coefficients_are_minus_one():
    report = mtw_condition_check(wfr_radial_cost("sphere", 0.5))
    coefs = np.array([row[1:5] for row in report["rows"]])
    assert np.max(np.abs(coefs + 1.0)) < 1e-8
    assert report["weak"] and report["strong"]


def test_unit_radius_coefficients_vanish():
    report = mtw_condition_check(wfr_radial_cost("sphere", 1.0))
    coefs = np.array([row[1:5] for row in report["rows"]])
    assert np.max(np.abs(coefs)) < 1e-8
    assert report["weak"]
    assert not report["strong"]


def test_double_radius_breaks_the_condition():
    cost = wfr_radial_cost("sphere", 2.0)
    report = mtw_condition_check(cost)
    assert not report["weak"]
    assert report["violations"]
    assert mtw_coefficients(cost, 0.0).beta == pytest.approx(0.25, abs=1e-4)


def test_flat_and_hyperbolic_limits():
    flat = mtw_coefficients(wfr_radial_cost("euclidean"), 0.0)
    assert flat.beta == pytest.approx(1.0 / 3.0, abs=1e-4)
    neg = mtw_coefficients(wfr_radial_cost("hyperbolic"), 0.0)
    assert neg.beta == pytest.approx(2.0 / 3.0, abs=1e-4)


def test_quadratic_cost_coefficients_vanish():
    report = mtw_condition_check(quadratic_radial_cost())
    coefs = np.array([row[1:5] for row in report["rows"]])
    assert np.max(np.abs(coefs)) < 1e-12
    assert report["weak"]
    assert not report["strong"]


def test_sweep_structure():
    report = mtw_condition_check(wfr_radial_cost("sphere", 1.0), n_samples=60)
    rows = report["rows"]
    assert len(rows) == 61
    assert rows[0][0] == 0.0
    assert all(len(row) == 6 for row in rows)
    with pytest.raises(InvalidInputError):
        mtw_condition_check(wfr_radial_cost("sphere", 1.0), n_samples=49)


# ---------------------------------------------------------------------------
# fourth-order tensor
# ---------------------------------------------------------------------------


def test_tensor_vanishes_for_zero_u():
    cost = wfr_radial_cost("sphere", 0.5)
    x, e1, e2 = np.eye(3)
    val = mtw_fd_tensor(sphere(2, 1.0), cost, x, np.zeros(3),
                        0.6 * e1, 1.1 * e2)
    assert abs(val) < 1e-6


def test_tensor_vanishes_for_quadratic_cost():
    space = euclidean(2)
    cost = quadratic_radial_cost()
    rng = np.random.default_rng(7)
    for _ in range(5):
        x = rng.normal(size=2)
        u, v, w = rng.normal(size=(3, 2))
        v *= 0.8 / np.linalg.norm(v)
        assert abs(mtw_fd_tensor(space, cost, x, u, v, w)) < 1e-4


def test_anchor_value_half_radius():
    # all four coefficients equal -1, so the tensor is 1.5 |u|^2 |w|^2
    cost = wfr_radial_cost("sphere", 0.5)
    x, e1, e2 = np.eye(3)
    u, v, w = 0.8 * e1, 0.6 * e1, 1.1 * e2
    dec = mtw_decomposed(sphere(2, 1.0), cost, x, u, v, w)
    assert dec == pytest.approx(1.5 * 0.64 * 1.21, abs=1e-6)
    fd = mtw_fd_tensor(sphere(2, 1.0), cost, x, u, v, w)
    assert fd == pytest.approx(dec, rel=2e-3)


@pytest.mark.parametrize("radius", [0.5, 1.0])
def test_stencil_matches_decomposition_on_model_spheres(radius):
    cost = wfr_radial_cost("sphere", radius)
    space = sphere(2, 1.0)
    rng = np.random.default_rng(42)
    for _ in range(6):
        x, e1, e2 = sphere_frame(rng)
        v = rng.uniform(0.3, 1.8) * e1
        a, b, c, d = rng.uniform(0.4, 1.2, size=4)
        u = a * e1 + b * e2
        w = j_orthogonalize(space, cost, x, v, u, c * e1 + d * e2)
        fd = mtw_fd_tensor(space, cost, x, u, v, w)
        dec = mtw_decomposed(space, cost, x, u, v, w)
        assert fd == pytest.approx(dec, rel=2e-3, abs=5e-3)


def test_stencil_matches_decomposition_hyperbolic():
    cost = wfr_radial_cost("hyperbolic")
    space = hyperbolic(2)
    rng = np.random.default_rng(11)
    for _ in range(4):
        x, e1, e2 = hyperbolic_frame(rng)
        v = rng.uniform(0.4, 1.2) * e1
        a, b, c, d = rng.uniform(0.4, 1.0, size=4)
        u = a * e1 + b * e2
        w = j_orthogonalize(space, cost, x, v, u, c * e1 + d * e2)
        fd = mtw_fd_tensor(space, cost, x, u, v, w)
        dec = mtw_decomposed(space, cost, x, u, v, w)
        assert fd == pytest.approx(dec, rel=5e-3, abs=5e-3)


def test_decomposition_needs_nonzero_v():
    cost = wfr_radial_cost("sphere", 1.0)
    x, e1, e2 = np.eye(3)
    with pytest.raises(DomainError):
        mtw_decomposed(sphere(2, 1.0), cost, x, e1, 1e-4 * e1, e2)


def test_tensor_guards_the_cost_singularity():
    cost = wfr_radial_cost("sphere", 1.0)
    x, e1, e2 = np.eye(3)
    with pytest.raises(DomainError):
        mtw_fd_tensor(sphere(2, 1.0), cost, x, e1, 1e6 * e1, e2)


def test_tensor_checks_space_kind():
    cost = wfr_radial_cost("sphere", 1.0)
    with pytest.raises(InvalidInputError):
        mtw_fd_tensor(euclidean(2), cost, np.zeros(2),
                      np.ones(2), np.ones(2), np.ones(2))


# ---------------------------------------------------------------------------
# removing Hessian mixing
# ---------------------------------------------------------------------------


def test_orthogonalize_leaves_clean_vectors_alone():
    # u along v and w perpendicular cannot mix for a radial cost
    cost = wfr_radial_cost("sphere", 1.0)
    x, e1, e2 = np.eye(3)
    w = 1.1 * e2
    out = j_orthogonalize(sphere(2, 1.0), cost, x, 0.6 * e1, 0.7 * e1, w)
    assert np.array_equal(out, w)


def test_orthogonalize_is_invariant_under_u_scaling():
    cost = wfr_radial_cost("sphere", 0.5)
    space = sphere(2, 1.0)
    rng = np.random.default_rng(9)
    x, e1, e2 = sphere_frame(rng)
    v = 0.9 * e1
    u = 0.8 * e1 + 0.5 * e2
    w = 0.7 * e1 + 0.6 * e2
    out1 = j_orthogonalize(space, cost, x, v, u, w)
    out3 = j_orthogonalize(space, cost, x, v, 3.0 * u, w)
    assert out3 == pytest.approx(out1, abs=1e-8)


def test_orthogonalize_requires_nonzero_u_and_v():
    cost = wfr_radial_cost("sphere", 1.0)
    x, e1, e2 = np.eye(3)
    with pytest.raises(DomainError):
        j_orthogonalize(sphere(2, 1.0), cost, x, 0.6 * e1, np.zeros(3), e2)
    with pytest.raises(DomainError):
        j_orthogonalize(sphere(2, 1.0), cost, x, np.zeros(3), e1, e2)
