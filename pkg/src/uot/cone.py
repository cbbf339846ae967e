"""The cone C(M) = M x R+ with metric dr^2 + r^2 g.

The radial coordinate plays the role of a square-root mass (m = r^2), which
is what ties the cone geometry to unbalanced transport: the squared cone
distance between lifted Diracs is exactly the transport cost sigma used by
the semi-coupling formulation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BranchCutError, DegenerateInputError, InvalidInputError
from .manifold import Space, exp_map, geodesic_distance

HALF_PI = 0.5 * np.pi


@dataclass(frozen=True)
class ConePoint:
    """A point (base, r) of the cone; r = 0 is the apex (base ignored)."""

    space: Space
    base: np.ndarray
    r: float

    def __post_init__(self):
        if not (np.isfinite(self.r) and self.r >= 0):
            raise InvalidInputError("cone radius must be finite and >= 0")
        object.__setattr__(self, "base", np.atleast_1d(np.asarray(self.base, dtype=float)))

    def to_json(self) -> dict:
        return {"base": self.base.tolist(), "r": float(self.r)}


@dataclass(frozen=True)
class ConeTangent:
    """Initial velocity of a cone geodesic.

    v_theta: angular speed along the unit-speed base geodesic in `direction`;
    v_r: radial speed. The metric norm at (base, r) is
    sqrt(v_r^2 + r^2 v_theta^2).
    """

    v_theta: float
    v_r: float
    direction: np.ndarray = None

    def __post_init__(self):
        d = np.atleast_1d(np.asarray(
            [1.0] if self.direction is None else self.direction, dtype=float))
        object.__setattr__(self, "direction", d)


def cone_distance(c1: ConePoint, c2: ConePoint):
    """Distance on the cone. Returns (distance, squared_distance).

    d^2 = r1^2 + r2^2 - 2 r1 r2 cos(min(d_base, pi/2)); all apexes are the
    same point.
    """
    if c1.space != c2.space:
        raise InvalidInputError("cone points live on different spaces")
    if c1.r == 0.0 or c2.r == 0.0:
        d2 = c1.r**2 + c2.r**2
        return float(np.sqrt(d2)), float(d2)
    d_base = geodesic_distance(c1.space, c1.base, c2.base)
    d2 = c1.r**2 + c2.r**2 - 2.0 * c1.r * c2.r * np.cos(min(d_base, HALF_PI))
    d2 = max(d2, 0.0)
    return float(np.sqrt(d2)), float(d2)


def cone_exp(c: ConePoint, t: float, vt: ConeTangent) -> ConePoint:
    """Geodesic flow on the cone for time t.

    With alpha = v_r / r(0):
        r(t)^2   = r(0)^2 [ (1 + alpha t)^2 + v_theta^2 t^2 ]
        theta(t) = arctan( v_theta t / (1 + alpha t) )
    valid strictly before the branch point 1 + alpha t = 0.
    """
    if c.r == 0.0:
        raise DegenerateInputError("cone_exp undefined from the apex")
    alpha = vt.v_r / c.r
    u = 1.0 + alpha * t
    if u <= 0.0:
        raise BranchCutError("cone geodesic crossed the branch (1 + (v_r/r) t <= 0)")
    r_new = c.r * np.hypot(u, vt.v_theta * t)
    theta = np.arctan(vt.v_theta * t / u)
    direction = vt.direction
    if direction.shape != c.base.shape:
        raise InvalidInputError("tangent direction shape does not match base point")
    base_new = exp_map(c.space, c.base, theta * direction)
    return ConePoint(c.space, base_new, float(r_new))


def lift_masses(space: Space, x, a: float, y, b: float) -> float:
    """Squared cone cost sigma(x, y, a, b) between masses at two points.

    sigma = a + b - 2 sqrt(ab) cos(min(d(x,y), pi/2)); equals the squared
    cone distance between (x, sqrt(a)) and (y, sqrt(b)) and is
    one-homogeneous in (a, b).
    """
    if a < 0 or b < 0:
        raise InvalidInputError("masses must be nonnegative")
    if a == 0.0 or b == 0.0:
        return float(a + b)
    d = geodesic_distance(space, x, y)
    return float(a + b - 2.0 * np.sqrt(a * b) * np.cos(min(d, HALF_PI)))
