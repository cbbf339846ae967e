"""Monge couples on the circle grid.

A transport couple (phi, lam) moves the point x to phi(x) and scales its
mass by lam(x)^2; the couple induced by a potential z is

    phi = c-exp_x(-grad z),      lam = e^{-z} sqrt(1 + |grad z|^2 / 4),

and its pushforward phi_*(lam^2 rho0) is the target marginal. The residual
of the associated Monge-Ampere equation measures how exactly a given z
transports a density f onto a density g.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cone import HALF_PI
from .entropy import DiscreteMeasure
from .errors import InvalidInputError, SingularityError
from .manifold import (
    TWO_PI,
    GridDensity,
    Space,
    exp_map,
    grid_gradient,
    grid_laplacian_1d,
    interp_periodic,
    wrap_angle,
)

# positions this close to a grid node (relative to spacing) bin wholly onto
# it, so node-to-node maps like rotations are exact index permutations
_SNAP = 1e-9


@dataclass(frozen=True)
class TransportCouple:
    """A map phi with mass reweighting lam on a fixed sample grid."""

    space: Space
    grid: np.ndarray
    phi: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float).reshape(-1)
        phi = np.asarray(self.phi, dtype=float).reshape(-1)
        lam = np.asarray(self.lam, dtype=float).reshape(-1)
        if not (grid.size == phi.size == lam.size):
            raise InvalidInputError("grid, phi, lam must have equal length")
        if not np.all(np.isfinite(phi)) or not np.all(np.isfinite(lam)):
            raise InvalidInputError("phi and lam must be finite")
        if np.any(lam <= 0):
            raise InvalidInputError("lam must be strictly positive")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "lam", lam)

    @property
    def n(self) -> int:
        return self.grid.size


def c_exp(space: Space, x, p) -> np.ndarray:
    """c-exponential for the WFR cost: exp_x(arctan(|p|/2) * p/|p|).

    Extended by continuity to x at p=0. The displacement is arctan(|p|/2),
    strictly below pi/2 for every finite p.
    """
    p = np.asarray(p, dtype=float).reshape(-1)
    x = np.asarray(x, dtype=float).reshape(-1)
    if not np.all(np.isfinite(p)):
        raise InvalidInputError("c_exp needs a finite tangent vector")
    norm = float(np.linalg.norm(p))
    if norm == 0.0:
        return x.copy()
    v = (np.arctan(0.5 * norm) / norm) * p
    return exp_map(space, x, v)


def monge_couple_from_potential(z, rho0: GridDensity) -> TransportCouple:
    """Couple (c-exp_x(-z'), e^{-z} sqrt(1 + z'^2/4)) on rho0's circle grid."""
    z = np.asarray(z, dtype=float).reshape(-1)
    if rho0.space.kind != "circle":
        raise InvalidInputError("potential-induced couples live on the circle grid")
    if z.size != rho0.n or rho0.n < 3:
        raise InvalidInputError("potential must live on the density grid (n >= 3)")
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("potential must be finite")
    grad = grid_gradient(z, rho0.spacing, periodic=True)
    phi = wrap_angle(rho0.nodes - np.arctan(0.5 * grad))
    lam = np.exp(-z) * np.sqrt(1.0 + 0.25 * grad * grad)
    return TransportCouple(rho0.space, rho0.nodes, phi, lam)


def _rebin_circle(positions: np.ndarray, masses: np.ndarray, n: int) -> np.ndarray:
    """Split each mass linearly between the two nearest nodes of the uniform
    circle grid; returns accumulated node masses. Mass-exact."""
    h = TWO_PI / n
    t = np.mod(positions, TWO_PI) / h
    idx = np.floor(t).astype(int) % n
    frac = t - np.floor(t)
    snap_lo = frac < _SNAP
    snap_hi = frac > 1.0 - _SNAP
    frac = np.where(snap_lo, 0.0, np.where(snap_hi, 0.0, frac))
    idx = np.where(snap_hi, (idx + 1) % n, idx)
    out = np.zeros(n)
    np.add.at(out, idx, masses * (1.0 - frac))
    np.add.at(out, (idx + 1) % n, masses * frac)
    return out


def pushforward(tc: TransportCouple, rho0: GridDensity):
    """phi_*(lam^2 rho0) as particles and rebinned onto rho0's grid.

    Returns (DiscreteMeasure, GridDensity): the exact particle image (mass
    lam_i^2 rho0_i h at phi_i), and its linear rebinning. The rebinned total
    mass equals the particle total to roundoff.
    """
    if rho0.space.kind != "circle":
        raise InvalidInputError("pushforward rebinning needs the circle grid")
    if tc.n != rho0.n:
        raise InvalidInputError("couple and density grids differ")
    weights = tc.lam**2 * rho0.values
    particles = DiscreteMeasure(tc.space, tc.phi[:, None], weights * rho0.spacing)
    # rebinning in density units (mass / h on both sides) keeps node-to-node
    # maps exact index permutations
    return particles, GridDensity.on_circle(_rebin_circle(tc.phi, weights, rho0.n))


def monge_objective(tc: TransportCouple, rho0: GridDensity) -> float:
    """Riemann sum of the squared cone distance from (x, 1) to (phi(x), lam(x)).

    The integrand is d_C^2((phi_i, lam_i), (x_i, 1)) = lam_i^2 + 1
    - 2 lam_i cos(min(d(x_i, phi_i), pi/2)), weighted by rho0_i h.
    """
    if tc.n != rho0.n:
        raise InvalidInputError("couple and density grids differ")
    gap = np.abs(tc.phi - tc.grid) % TWO_PI
    d = np.minimum(gap, TWO_PI - gap)
    integrand = tc.lam**2 + 1.0 - 2.0 * tc.lam * np.cos(np.minimum(d, HALF_PI))
    return float(np.sum(integrand * rho0.values) * rho0.spacing)


def ma_residual(z, f: GridDensity, g: GridDensity) -> np.ndarray:
    """Nodewise residual of the WFR Monge-Ampere equation on the circle.

        [-z'' + 2(1 + z'^2/4)] - 2 e^{-2z} (1 + z'^2/4)^2 f(x) / g(phi(x))

    The second derivative uses the periodic central stencil; the cost-
    derivative factor 2/cos^2(d) at displacement d = arctan(z'/2) reduces to
    2(1 + z'^2/4). Nodes where the interpolated g falls below 1e-12 are
    singular for the equation and raise.
    """
    z = np.asarray(z, dtype=float).reshape(-1)
    if f.space.kind != "circle" or g.space.kind != "circle":
        raise InvalidInputError("ma_residual is defined on circle grids")
    if z.size != f.n:
        raise InvalidInputError("potential must live on the density grid")
    grad = grid_gradient(z, f.spacing, periodic=True)
    curv = grid_laplacian_1d(z, f.spacing, periodic=True)
    phi = wrap_angle(f.nodes - np.arctan(0.5 * grad))
    g_at_phi = interp_periodic(g, phi)
    low = g_at_phi < 1e-12
    if np.any(low):
        node = int(np.nonzero(low)[0][0])
        raise SingularityError(
            f"target density vanishes at phi(node {node}); residual undefined")
    sec = 1.0 + 0.25 * grad * grad
    lhs = -curv + 2.0 * sec
    rhs = 2.0 * np.exp(-2.0 * z) * sec * sec * f.values / g_at_phi
    return lhs - rhs
