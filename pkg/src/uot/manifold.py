"""Model base spaces and 1D grid operators.

Supported spaces: Euclidean R^d, the unit circle (angle parametrization),
round spheres of any radius in ambient coordinates, and hyperbolic space on
the upper hyperboloid (distance only; exp/log are provided for completeness
but nothing downstream depends on them).

Points are plain numpy arrays. For the circle a point is a length-1 array
holding the angle in [0, 2pi); for spheres/hyperboloids it is the ambient
vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InvalidInputError

TWO_PI = 2.0 * np.pi

_KINDS = ("euclidean", "circle", "sphere", "hyperbolic")


@dataclass(frozen=True)
class Space:
    """A model base space.

    kind: "euclidean" | "circle" | "sphere" | "hyperbolic".
    dim: intrinsic dimension (1 for the circle).
    radius: sphere radius (ignored elsewhere).
    """

    kind: str
    dim: int = 1
    radius: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InvalidInputError(f"unknown space kind {self.kind!r}")
        if self.dim < 1:
            raise InvalidInputError("dim must be >= 1")
        if self.kind == "sphere" and not self.radius > 0:
            raise InvalidInputError("sphere radius must be > 0")
        if self.kind == "circle" and self.dim != 1:
            raise InvalidInputError("circle has dim 1")

    @property
    def ambient_dim(self) -> int:
        if self.kind == "circle":
            return 1
        if self.kind in ("sphere", "hyperbolic"):
            return self.dim + 1
        return self.dim

    def to_json(self) -> dict:
        if self.kind == "circle":
            return {"kind": "circle"}
        if self.kind == "sphere":
            return {"kind": "sphere", "dim": self.dim, "radius": self.radius}
        return {"kind": self.kind, "dim": self.dim}

    @staticmethod
    def from_json(obj: dict) -> "Space":
        if not isinstance(obj, dict) or "kind" not in obj:
            raise InvalidInputError("space JSON must be an object with a 'kind'")
        kind = obj["kind"]
        if kind == "circle":
            return Space("circle", 1)
        if kind == "sphere":
            return Space("sphere", int(obj["dim"]), float(obj["radius"]))
        if kind in ("euclidean", "hyperbolic"):
            return Space(kind, int(obj["dim"]))
        raise InvalidInputError(f"unknown space kind {kind!r}")


def euclidean(dim: int) -> Space:
    return Space("euclidean", dim)


def circle() -> Space:
    return Space("circle", 1)


def sphere(dim: int, radius: float = 1.0) -> Space:
    return Space("sphere", dim, radius)


def hyperbolic(dim: int) -> Space:
    return Space("hyperbolic", dim)


def wrap_angle(theta):
    """Reduce an angle to [0, 2pi)."""
    m = np.mod(theta, TWO_PI)
    # np.mod rounds 2pi - eps up to 2pi for tiny negative inputs; keep the
    # interval half-open.
    return np.where(m == TWO_PI, 0.0, m)[()]


def signed_angle_gap(a, b):
    """Signed shortest angular displacement from a to b, in (-pi, pi]."""
    d = np.mod(np.asarray(b, dtype=float) - np.asarray(a, dtype=float), TWO_PI)
    return np.where(d > np.pi, d - TWO_PI, d)


def _check_point(space: Space, p) -> np.ndarray:
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if p.shape != (space.ambient_dim,):
        raise InvalidInputError(
            f"point of shape {p.shape} does not fit {space.kind} "
            f"(ambient dim {space.ambient_dim})"
        )
    if not np.all(np.isfinite(p)):
        raise InvalidInputError("point has non-finite coordinates")
    return p


def geodesic_distance(space: Space, p, q) -> float:
    """Geodesic distance between two points of the space."""
    p = _check_point(space, p)
    q = _check_point(space, q)
    if space.kind == "euclidean":
        return float(np.linalg.norm(p - q))
    if space.kind == "circle":
        gap = abs(p[0] - q[0]) % TWO_PI
        return float(min(gap, TWO_PI - gap))
    if space.kind == "sphere":
        R = space.radius
        # atan2 form: accurate near 0 and near the antipode, unlike arccos.
        cos_t = np.dot(p, q) / R**2
        rej = q / R - cos_t * (p / R)
        theta = np.arctan2(np.linalg.norm(rej), cos_t)
        return float(R * theta)
    # hyperbolic: arcosh(-<p,q>) computed through the Minkowski norm of the
    # chord, which has no cancellation when p and q are close: for hyperboloid
    # points -<p,q> = 1 + <p-q, p-q>/2, and arccosh(1+x) = log1p(x+sqrt(x(x+2))).
    w = p - q
    x = max(0.5 * (np.dot(w[1:], w[1:]) - w[0] ** 2), 0.0)
    return float(np.log1p(x + np.sqrt(x * (x + 2.0))))


def exp_map(space: Space, p, v) -> np.ndarray:
    """Follow the geodesic from p with initial velocity v for unit time."""
    p = _check_point(space, p)
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.shape != p.shape:
        raise InvalidInputError("tangent vector shape does not match point")
    if space.kind == "euclidean":
        return p + v
    if space.kind == "circle":
        return np.array([wrap_angle(p[0] + v[0])])
    if space.kind == "sphere":
        R = space.radius
        if abs(np.dot(v, p)) > 1e-10 * max(1.0, np.linalg.norm(v)) * R:
            raise InvalidInputError("v is not tangent to the sphere at p")
        norm = np.linalg.norm(v)
        if norm == 0.0:
            return p.copy()
        theta = norm / R
        return np.cos(theta) * p + np.sin(theta) * (R / norm) * v
    # hyperbolic (hyperboloid model), Minkowski-orthogonal tangent assumed
    sq = -v[0] ** 2 + np.dot(v[1:], v[1:])
    if sq < -1e-10:
        raise InvalidInputError("v is not spacelike at p")
    norm = np.sqrt(max(sq, 0.0))
    if norm == 0.0:
        return p.copy()
    return np.cosh(norm) * p + (np.sinh(norm) / norm) * v


def log_map(space: Space, p, q) -> np.ndarray:
    """Inverse of exp_map: the velocity reaching q from p in unit time."""
    p = _check_point(space, p)
    q = _check_point(space, q)
    if space.kind == "euclidean":
        return q - p
    if space.kind == "circle":
        gap = signed_angle_gap(p[0], q[0])
        if np.pi - abs(gap) < 1e-12:
            raise DegenerateInputError("log_map undefined at antipodal angles")
        return np.array([float(gap)])
    if space.kind == "sphere":
        R = space.radius
        cos_t = np.dot(p, q) / R**2
        rej = q - cos_t * p
        rn = np.linalg.norm(rej)
        theta = np.arctan2(rn / R, cos_t)
        if np.pi - theta < 1e-12:
            raise DegenerateInputError("log_map undefined at the cut locus")
        if rn == 0.0:
            return np.zeros_like(p)
        return (R * theta / rn) * rej
    # hyperbolic
    mink = -p[0] * q[0] + np.dot(p[1:], q[1:])
    d = np.arccosh(max(-mink, 1.0))
    if d == 0.0:
        return np.zeros_like(p)
    u = q + mink * p  # Minkowski projection of q onto the tangent space at p
    un = np.sqrt(max(-u[0] ** 2 + np.dot(u[1:], u[1:]), 0.0))
    return (d / un) * u


def grid_gradient(values, spacing: float, periodic: bool) -> np.ndarray:
    """Second-order gradient of a sampled 1D field.

    Central differences everywhere on periodic (circle) grids; on interval
    grids the endpoints use the one-sided second-order stencils
    (-3z0+4z1-z2)/(2h) and (3zn-4z(n-1)+z(n-2))/(2h). Exact on affine data.
    """
    z = np.asarray(values, dtype=float)
    if z.ndim != 1 or z.size < 3:
        raise InvalidInputError("grid_gradient needs a 1D field with n >= 3")
    if not spacing > 0:
        raise InvalidInputError("spacing must be positive")
    if periodic:
        return (np.roll(z, -1) - np.roll(z, 1)) / (2.0 * spacing)
    g = np.empty_like(z)
    g[1:-1] = (z[2:] - z[:-2]) / (2.0 * spacing)
    g[0] = (-3.0 * z[0] + 4.0 * z[1] - z[2]) / (2.0 * spacing)
    g[-1] = (3.0 * z[-1] - 4.0 * z[-2] + z[-3]) / (2.0 * spacing)
    return g


def grid_laplacian_1d(values, spacing: float, periodic: bool) -> np.ndarray:
    """Standard second-difference z'' on a uniform 1D grid."""
    z = np.asarray(values, dtype=float)
    if z.ndim != 1 or z.size < 3:
        raise InvalidInputError("second difference needs a 1D field with n >= 3")
    if periodic:
        return (np.roll(z, -1) - 2.0 * z + np.roll(z, 1)) / spacing**2
    out = np.empty_like(z)
    out[1:-1] = (z[2:] - 2.0 * z[1:-1] + z[:-2]) / spacing**2
    # one-sided second-order second derivative at the ends
    out[0] = (2.0 * z[0] - 5.0 * z[1] + 4.0 * z[2] - z[3]) / spacing**2 if z.size >= 4 else out[1]
    out[-1] = (2.0 * z[-1] - 5.0 * z[-2] + 4.0 * z[-3] - z[-4]) / spacing**2 if z.size >= 4 else out[-2]
    return out


@dataclass(frozen=True)
class GridDensity:
    """A nonnegative density sampled on a uniform 1D grid.

    `values` are *densities* (mass per unit length); the mass carried by node
    i is values[i] * spacing. Circle grids have nodes 2*pi*i/n and spacing
    2*pi/n; Euclidean interval grids anchor at `origin`.
    """

    space: Space
    n: int
    values: np.ndarray
    spacing: float
    origin: float = 0.0

    def __post_init__(self):
        if self.space.kind not in ("circle", "euclidean") or (
            self.space.kind == "euclidean" and self.space.dim != 1
        ):
            raise InvalidInputError("GridDensity lives on the circle or a 1D interval")
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.n,):
            raise InvalidInputError("values must have shape (n,)")
        if not np.all(np.isfinite(vals)):
            raise InvalidInputError("density values must be finite")
        if np.any(vals < 0):
            raise InvalidInputError("density values must be nonnegative")
        if self.space.kind == "circle" and abs(self.spacing - TWO_PI / self.n) > 1e-12:
            raise InvalidInputError("circle grids must have spacing 2*pi/n")
        object.__setattr__(self, "values", vals)

    @staticmethod
    def on_circle(values) -> "GridDensity":
        vals = np.asarray(values, dtype=float)
        n = vals.size
        return GridDensity(circle(), n, vals, TWO_PI / n)

    @staticmethod
    def uniform_circle(n: int, density: float = 1.0) -> "GridDensity":
        return GridDensity.on_circle(np.full(n, float(density)))

    @property
    def nodes(self) -> np.ndarray:
        return self.origin + self.spacing * np.arange(self.n)

    @property
    def periodic(self) -> bool:
        return self.space.kind == "circle"

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.values) * self.spacing)

    def interpolate(self, x) -> np.ndarray:
        """Linear interpolation of the density at arbitrary locations."""
        return interp_periodic(self, x) if self.periodic else interp_interval(self, x)


def interp_periodic(grid: GridDensity, x) -> np.ndarray:
    """Periodic linear interpolation of grid values at angles x."""
    x = np.asarray(x, dtype=float)
    pos = np.mod(x - grid.origin, TWO_PI) / grid.spacing
    k = np.floor(pos).astype(int) % grid.n
    frac = pos - np.floor(pos)
    return (1.0 - frac) * grid.values[k] + frac * grid.values[(k + 1) % grid.n]


def interp_interval(grid: GridDensity, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    pos = np.clip((x - grid.origin) / grid.spacing, 0.0, grid.n - 1.0)
    k = np.minimum(np.floor(pos).astype(int), grid.n - 2)
    frac = pos - k
    return (1.0 - frac) * grid.values[k] + frac * grid.values[k + 1]


def vol_circle(n: int) -> GridDensity:
    """The volume measure of the circle on an n-grid: density 1, mass 2*pi."""
    return GridDensity.uniform_circle(n, 1.0)


def resample_to_grid(points, values, grid: GridDensity) -> np.ndarray:
    """Nearest-node injection of point-indexed values onto a grid.

    Each grid node takes the value attached to its nearest input point.
    When the input points *are* the grid nodes (the usual case: solver
    potentials on a grid-supported measure) this is exact.
    """
    pts = np.asarray(points, dtype=float).reshape(-1)
    vals = np.asarray(values, dtype=float).reshape(-1)
    if pts.size != vals.size or pts.size == 0:
        raise InvalidInputError("points and values must align and be nonempty")
    nodes = grid.nodes
    if grid.periodic:
        gap = np.abs(signed_angle_gap(pts[None, :], nodes[:, None]))
    else:
        gap = np.abs(nodes[:, None] - pts[None, :])
    return vals[np.argmin(gap, axis=1)]
