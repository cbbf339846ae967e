"""Entropy functions, their Legendre transforms, and Csiszar divergences.

An entropy function F is convex, lower semicontinuous, nonnegative, with
F(1) = 0 and F = +inf on the negative axis. Its recession constant
F'_inf = lim F(r)/r controls how the divergence prices mass that has
nowhere to go (the singular part of the Lebesgue decomposition, which in
the purely atomic setting is simply mu-mass sitting where nu vanishes).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidInputError
from .manifold import Space, geodesic_distance


@dataclass(frozen=True)
class EntropyFunction:
    """Bundle of an entropy F with the pieces solvers and objectives need.

    F_star is the Legendre transform, F_star_prime its derivative (the
    density map z -> (F*)'(z) used by linearized marginals). recession is
    F'_inf; F_star is finite exactly on (-inf, F_star_domain_upper].
    slope_at_zero_infinite records whether the subdifferential of F at 0 is
    all of (-inf, F'(0+)] with F'(0+) = -inf, which makes (F*)' strictly
    positive on the domain.
    """

    name: str
    F: Callable[[float], float]
    F_star: Callable[[float], float]
    F_star_prime: Callable[[float], float]
    recession: float
    F_star_domain_upper: float = field(default=np.inf)
    slope_at_zero_infinite: bool = False


def _kl_F(x):
    x = np.asarray(x, dtype=float)
    out = np.full_like(x, np.inf)
    pos = np.isfinite(x) & (x > 0)  # F(+inf) = +inf, not inf - inf
    xp = x[pos]
    with np.errstate(over="ignore"):  # x log x saturates to +inf near float max
        out[pos] = xp * np.log(xp) - xp + 1.0
    out[x == 0] = 1.0
    return out if out.ndim else float(out)


def make_kl_entropy() -> EntropyFunction:
    """F(x) = x log x - x + 1 (F(0)=1), F*(z) = e^z - 1."""
    return EntropyFunction(
        name="kl",
        F=_kl_F,
        F_star=lambda z: np.exp(z) - 1.0,
        F_star_prime=np.exp,
        recession=np.inf,
        F_star_domain_upper=np.inf,
        slope_at_zero_infinite=True,
    )


def _tv_F(x):
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 0, np.abs(x - 1.0), np.inf)
    return out if out.ndim else float(out)


def _tv_F_star(z):
    z = np.asarray(z, dtype=float)
    out = np.where(z <= 1.0, np.maximum(z, -1.0), np.inf)
    return out if out.ndim else float(out)


def _tv_F_star_prime(z):
    # subgradient selection: 0 below -1 (mass destroyed), 1 on (-1, 1]
    z = np.asarray(z, dtype=float)
    out = np.where(z < -1.0, 0.0, 1.0)
    return out if out.ndim else float(out)


def make_tv_entropy() -> EntropyFunction:
    """Total-variation-like entropy F(x) = |x - 1|, recession 1."""
    return EntropyFunction(
        name="tv",
        F=_tv_F,
        F_star=_tv_F_star,
        F_star_prime=_tv_F_star_prime,
        recession=1.0,
        F_star_domain_upper=1.0,
        slope_at_zero_infinite=False,
    )


@dataclass(frozen=True)
class DiscreteMeasure:
    """A finite nonnegative measure: weighted points of a model space.

    Points closer than 1e-12 are considered the same atom and merged by
    summing their masses.
    """

    space: Space
    points: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        ms = np.asarray(self.masses, dtype=float).reshape(-1)
        if pts.shape[0] != ms.size:
            raise InvalidInputError("points and masses must have equal length")
        if pts.shape[0] and pts.shape[1] != self.space.ambient_dim:
            raise InvalidInputError(
                f"points of width {pts.shape[1]} do not fit {self.space.kind}")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(ms))):
            raise InvalidInputError("measure data must be finite")
        if np.any(ms < 0):
            raise InvalidInputError("masses must be nonnegative")
        pts, ms = _merge_duplicates(self.space, pts, ms)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "masses", ms)

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.masses))

    @property
    def support(self) -> np.ndarray:
        """Indices of atoms with strictly positive mass."""
        return np.nonzero(self.masses > 0)[0]

    def to_json(self) -> dict:
        return {
            "space": self.space.to_json(),
            "points": self.points.tolist(),
            "masses": self.masses.tolist(),
        }

    @staticmethod
    def from_json(obj: dict) -> "DiscreteMeasure":
        space = Space.from_json(obj["space"])
        return DiscreteMeasure(space, obj["points"], obj["masses"])


def _merge_duplicates(space, pts, ms, tol=1e-12):
    n = pts.shape[0]
    if n <= 1:
        return pts, ms
    keep: list[int] = []
    owner = np.full(n, -1)
    for i in range(n):
        for k in keep:
            if geodesic_distance(space, pts[i], pts[k]) <= tol:
                owner[i] = k
                break
        else:
            owner[i] = i
            keep.append(i)
    if len(keep) == n:
        return pts, ms
    merged = np.zeros(len(keep))
    for j, k in enumerate(keep):
        merged[j] = ms[owner == k].sum()
    return pts[keep], merged


def csiszar_masses(F: EntropyFunction, mu_masses, nu_masses) -> float:
    """D_F for two mass vectors already aligned on a common atom list."""
    mu = np.asarray(mu_masses, dtype=float)
    nu = np.asarray(nu_masses, dtype=float)
    if mu.shape != nu.shape:
        raise InvalidInputError("aligned mass vectors must have equal shape")
    total = 0.0
    both = nu > 0
    if np.any(both):
        ratio = np.zeros_like(mu)
        with np.errstate(over="ignore"):  # ratio overflow lands on F(+inf) = +inf
            ratio[both] = mu[both] / nu[both]
        vals = np.asarray(F.F(ratio[both]), dtype=float)
        if np.any(np.isinf(vals)):
            return float(np.inf)
        total += float(np.sum(vals * nu[both]))
    singular = float(np.sum(mu[~both]))
    if singular > 0:
        if not np.isfinite(F.recession):
            return float(np.inf)
        total += F.recession * singular
    return total


def csiszar_divergence(F: EntropyFunction, mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Csiszar divergence D_F(mu, nu) with the discrete singular part.

    Atoms of mu carrying mass where nu has none are priced at F'_inf per
    unit mass (+inf if the recession is infinite); atoms of nu unseen by mu
    contribute F(0) per unit mass.
    """
    if mu.space != nu.space:
        raise InvalidInputError("measures live on different spaces")
    mu_m, nu_m = align_measures(mu, nu)
    return csiszar_masses(F, mu_m, nu_m)


def align_measures(mu: DiscreteMeasure, nu: DiscreteMeasure, tol=1e-12):
    """Mass vectors of mu and nu over the union of their atom locations."""
    mu_pts, nu_pts = mu.points, nu.points
    n_mu = mu_pts.shape[0]
    match = np.full(nu_pts.shape[0], -1)
    for j in range(nu_pts.shape[0]):
        for i in range(n_mu):
            if geodesic_distance(mu.space, nu_pts[j], mu_pts[i]) <= tol:
                match[j] = i
                break
    extra = np.sum(match < 0)
    mu_m = np.concatenate([mu.masses, np.zeros(extra)])
    nu_m = np.zeros_like(mu_m)
    k = n_mu
    for j, i in enumerate(match):
        if i >= 0:
            nu_m[i] += nu.masses[j]
        else:
            nu_m[k] = nu.masses[j]
            k += 1
    return mu_m, nu_m
