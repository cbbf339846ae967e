"""Tests for transport couples, pushforwards, and the residual equation."""

import numpy as np
import pytest

from uot.errors import InvalidInputError, SingularityError
from uot.manifold import TWO_PI, GridDensity, circle, geodesic_distance
from uot.monge import (
    TransportCouple,
    c_exp,
    ma_residual,
    monge_couple_from_potential,
    monge_objective,
    pushforward,
)
from uot.solver import CostSpec, cost_value


def bumpy(n, base=1.0, amp=0.3):
    theta = TWO_PI * np.arange(n) / n
    return GridDensity.on_circle(base + amp * np.cos(theta))


# ---------------------------------------------------------------------------
# c-exponential
# ---------------------------------------------------------------------------


def test_c_exp_zero_vector_is_identity():
    out = c_exp(circle(), [1.3], [0.0])
    assert out == pytest.approx([1.3], abs=0.0)


def test_c_exp_norm_two_moves_quarter_pi():
    # arctan(2/2) = pi/4
    out = c_exp(circle(), [1.0], [2.0])
    assert out[0] == pytest.approx(1.0 + np.pi / 4, abs=1e-15)


def test_c_exp_inverts_cost_gradient():
    # y = c-exp_x(p) is the point where -grad_x c(x, y) equals p
    spec = CostSpec("wfr")
    x, p = 0.7, 0.9
    y = float(c_exp(circle(), [x], [p])[0])
    h = 1e-6
    c_plus = cost_value(spec, geodesic_distance(circle(), [x + h], [y]))
    c_minus = cost_value(spec, geodesic_distance(circle(), [x - h], [y]))
    assert -(c_plus - c_minus) / (2 * h) == pytest.approx(p, abs=1e-6)


def test_c_exp_displacement_stays_below_half_pi():
    out = c_exp(circle(), [0.0], [1e6])
    d = geodesic_distance(circle(), [0.0], out)
    assert d < np.pi / 2
    assert np.isfinite(out).all()


def test_c_exp_rejects_nonfinite_vector():
    with pytest.raises(InvalidInputError):
        c_exp(circle(), [0.0], [np.inf])


# ---------------------------------------------------------------------------
# couples induced by a potential
# ---------------------------------------------------------------------------


def test_zero_potential_gives_identity_couple():
    rho = bumpy(64)
    tc = monge_couple_from_potential(np.zeros(64), rho)
    assert np.array_equal(tc.phi, rho.nodes)
    assert np.array_equal(tc.lam, np.ones(64))


def test_constant_potential_scales_mass_only():
    rho = bumpy(48)
    kappa = 0.35
    tc = monge_couple_from_potential(np.full(48, kappa), rho)
    assert np.array_equal(tc.phi, rho.nodes)
    assert tc.lam == pytest.approx(np.full(48, np.exp(-kappa)), abs=1e-15)


def test_couple_requires_matching_lengths():
    with pytest.raises(InvalidInputError):
        TransportCouple(circle(), np.zeros(8), np.zeros(8), np.ones(7))


def test_couple_requires_positive_lam():
    grid = TWO_PI * np.arange(8) / 8
    lam = np.ones(8)
    lam[3] = 0.0
    with pytest.raises(InvalidInputError):
        TransportCouple(circle(), grid, grid.copy(), lam)


def test_potential_must_match_grid():
    rho = bumpy(32)
    with pytest.raises(InvalidInputError):
        monge_couple_from_potential(np.zeros(31), rho)
    with pytest.raises(InvalidInputError):
        monge_couple_from_potential(np.array([0.0, np.nan] + [0.0] * 30), rho)


# ---------------------------------------------------------------------------
# pushforward
# ---------------------------------------------------------------------------


def test_pushforward_of_identity_couple_is_the_density():
    rho = bumpy(128)
    tc = monge_couple_from_potential(np.zeros(128), rho)
    particles, rebinned = pushforward(tc, rho)
    assert rebinned.values == pytest.approx(rho.values, abs=1e-14)
    assert particles.masses.sum() == pytest.approx(rho.total_mass, abs=1e-13)


def test_pushforward_of_constant_scaling():
    rho = bumpy(96)
    kappa = 0.4
    tc = monge_couple_from_potential(np.full(96, kappa), rho)
    _, rebinned = pushforward(tc, rho)
    assert rebinned.values == pytest.approx(
        np.exp(-2 * kappa) * rho.values, abs=1e-14)


def test_pushforward_of_rotation_is_an_exact_shift():
    n, shift = 80, 7
    rho = bumpy(n)
    phi = np.mod(rho.nodes + shift * rho.spacing, TWO_PI)
    tc = TransportCouple(circle(), rho.nodes, phi, np.ones(n))
    _, rebinned = pushforward(tc, rho)
    assert np.array_equal(rebinned.values, np.roll(rho.values, shift))


def test_pushforward_conserves_mass_off_grid():
    n = 200
    rho = bumpy(n)
    theta = rho.nodes
    z = 0.1 * np.sin(theta) + 0.07 * np.cos(2 * theta)
    tc = monge_couple_from_potential(z, rho)
    particles, rebinned = pushforward(tc, rho)
    expected = float(np.sum(tc.lam**2 * rho.values) * rho.spacing)
    assert particles.masses.sum() == pytest.approx(expected, rel=1e-13)
    assert rebinned.total_mass == pytest.approx(expected, rel=1e-13)


def test_pushforward_grid_mismatch_raises():
    rho = bumpy(64)
    tc = monge_couple_from_potential(np.zeros(64), rho)
    with pytest.raises(InvalidInputError):
        pushforward(tc, bumpy(65))


# ---------------------------------------------------------------------------
# transport objective
# ---------------------------------------------------------------------------


def test_objective_of_identity_couple_is_zero():
    rho = bumpy(64)
    tc = monge_couple_from_potential(np.zeros(64), rho)
    assert monge_objective(tc, rho) == 0.0


def test_objective_of_pure_scaling_on_unit_mass():
    # (Id, e^-kappa) on |rho| = 1 costs (1 - e^-kappa)^2
    n, kappa = 64, 0.6
    rho = GridDensity.uniform_circle(n, 1.0 / TWO_PI)
    tc = monge_couple_from_potential(np.full(n, kappa), rho)
    expected = (1.0 - np.exp(-kappa)) ** 2
    assert monge_objective(tc, rho) == pytest.approx(expected, abs=1e-14)


def test_objective_dominates_transport_value():
    # the couple (Id, s) transports uniform rho0 onto s^2 rho0; its cost
    # can be at most the discretized transport value plus solver slack
    from uot.entropy import DiscreteMeasure
    from uot.solver import Schedule, cost_matrix, solve_entropic

    n, s = 40, 0.7
    rho = GridDensity.uniform_circle(n, 1.0 / TWO_PI)
    tc = TransportCouple(circle(), rho.nodes, rho.nodes.copy(), np.full(n, s))
    mo = monge_objective(tc, rho)

    sp = circle()
    mu = DiscreteMeasure(sp, rho.nodes[:, None], rho.values * rho.spacing)
    nu = DiscreteMeasure(sp, rho.nodes[:, None],
                         s**2 * rho.values * rho.spacing)
    C = cost_matrix(sp, CostSpec("wfr"), mu.points, nu.points)
    sol = solve_entropic(mu, nu, C, schedule=Schedule(eps_final=1e-4))
    assert mo >= sol.primal_value - 2e-2
    # scaling a uniform density is optimal in place, so here they agree
    assert mo == pytest.approx(sol.primal_value, abs=2e-2)


# ---------------------------------------------------------------------------
# residual of the transport equation
# ---------------------------------------------------------------------------


def test_residual_zero_for_zero_potential_matched_densities():
    f = bumpy(128)
    res = ma_residual(np.zeros(128), f, f)
    assert np.max(np.abs(res)) < 1e-13


def test_residual_zero_for_constant_potential():
    n, kappa = 96, 0.5
    f = bumpy(n)
    g = GridDensity.on_circle(np.exp(-2 * kappa) * f.values)
    res = ma_residual(np.full(n, kappa), f, g)
    assert np.max(np.abs(res)) < 1e-12


def test_residual_invariant_under_matched_shift():
    # z -> z + kappa with g -> e^{-2 kappa} g leaves the residual unchanged
    n, kappa = 128, 0.3
    theta = TWO_PI * np.arange(n) / n
    z = 0.05 * np.sin(theta)
    f = bumpy(n)
    g = bumpy(n, base=0.9, amp=0.2)
    res1 = ma_residual(z, f, g)
    res2 = ma_residual(z + kappa,
                       f, GridDensity.on_circle(np.exp(-2 * kappa) * g.values))
    assert res2 == pytest.approx(res1, abs=1e-12)


def test_residual_raises_on_vanishing_target():
    f = bumpy(64)
    g = GridDensity.on_circle(np.full(64, 1e-13))
    with pytest.raises(SingularityError):
        ma_residual(np.zeros(64), f, g)


def test_residual_shape_checks():
    f = bumpy(64)
    with pytest.raises(InvalidInputError):
        ma_residual(np.zeros(63), f, f)
