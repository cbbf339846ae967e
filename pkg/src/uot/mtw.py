"""Regularity analysis for radial transport costs on model spaces.

For a cost of the form c(x, y) = l(d(x, y)) the curvature conditions that
govern regularity of optimal maps reduce to sign conditions on four scalar
coefficient functions built from A(s) = 1/h'(s) and a comparison function
B(s) that depends on the model space, where h inverts l'.  This module
evaluates those coefficients in closed form, sweeps the weak and strong
sign conditions over the admissible parameter range, and cross-validates
the whole decomposition against a direct finite-difference evaluation of
the underlying fourth-order mixed derivative.

Note on A: some writeups print A = 1/h, but only A = 1/h' reproduces the
checkable constants (all four coefficients -1 for the half-radius sphere,
0 for the unit one, and the beta(0) = (1/3)(1 - 1/R^2) limit); this module
uses 1/h' throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, InvalidInputError, NumericalError
from .manifold import Space, exp_map, geodesic_distance

__all__ = [
    "RadialCost",
    "MtwCoefficients",
    "wfr_radial_cost",
    "quadratic_radial_cost",
    "lee_li_functions",
    "lee_li_derivatives",
    "mtw_coefficients",
    "mtw_condition_check",
    "mtw_fd_tensor",
    "mtw_decomposed",
    "j_orthogonalize",
]

_KINDS = ("euclidean", "sphere", "hyperbolic")


@dataclass(frozen=True)
class RadialCost:
    """A radial cost profile l(d) with its inverse-derivative pair.

    ``h`` inverts ``l_prime``; ``s_max`` bounds the parameter s = l'(d)
    below the image of the usable distance range.  ``form`` selects the
    closed-form derivative path ("wfr" or "quadratic").
    """

    space_kind: str
    radius: float
    l: Callable[[float], float]
    l_prime: Callable[[float], float]
    h: Callable[[float], float]
    h_prime: Callable[[float], float]
    s_max: float
    form: str = "wfr"

    def __post_init__(self):
        if self.space_kind not in _KINDS:
            raise InvalidInputError(f"unknown space kind {self.space_kind!r}")
        if not self.s_max > 0:
            raise InvalidInputError("s_max must be positive")


@dataclass(frozen=True)
class MtwCoefficients:
    s: float
    alpha: float
    beta: float
    gamma: float
    delta: float


def wfr_radial_cost(
    space_kind: str,
    radius: float = 1.0,
    s_max: Optional[float] = None,
    d_max: Optional[float] = None,
) -> RadialCost:
    """The cone-inducing cost profile l(d) = -log cos^2(R d).

    The parameter R scales the profile (the R-sphere cost transferred to
    the unit model space); Euclidean and hyperbolic analyses use the R = 1
    profile.  The parameter range ends at l' of the usable distance range:
    the smaller of the model-space diameter (pi on the unit sphere,
    ``d_max`` elsewhere) and the cost cutoff pi/(2R), trimmed by 1e-6.
    """
    if space_kind not in _KINDS:
        raise InvalidInputError(f"unknown space kind {space_kind!r}")
    R = float(radius) if space_kind == "sphere" else 1.0
    if not R > 0:
        raise InvalidInputError("radius must be positive")

    def l(d):
        return -2.0 * np.log(np.cos(R * d))

    def l_prime(d):
        return 2.0 * R * np.tan(R * d)

    def h(s):
        return np.arctan(s / (2.0 * R)) / R

    def h_prime(s):
        return 1.0 / (2.0 * R * R + 0.5 * s * s)

    cutoff = 0.5 * np.pi / R
    if space_kind == "sphere":
        diameter = np.pi
    else:
        diameter = d_max if d_max is not None else cutoff
    d_top = min(diameter, cutoff) - 1e-6
    if d_top <= 0:
        raise InvalidInputError("usable distance range is empty")
    cap = float(l_prime(d_top))
    bound = cap if s_max is None else min(float(s_max), cap)
    return RadialCost(space_kind, R, l, l_prime, h, h_prime, bound, form="wfr")


def quadratic_radial_cost(s_max: float = 10.0) -> RadialCost:
    """The Euclidean quadratic profile l(d) = d^2 / 2 (h is the identity)."""
    return RadialCost(
        "euclidean",
        1.0,
        lambda d: 0.5 * d * d,
        lambda d: np.asarray(d, dtype=float) + 0.0,
        lambda s: np.asarray(s, dtype=float) + 0.0,
        lambda s: np.ones_like(np.asarray(s, dtype=float)),
        float(s_max),
        form="quadratic",
    )


def _check_s(cost: RadialCost, s: float) -> float:
    s = float(s)
    if not 0.0 < s < cost.s_max:
        raise DomainError(f"s={s} outside the admissible range (0, {cost.s_max})")
    return s


def lee_li_functions(cost: RadialCost) -> dict:
    """The pair A = 1/h' and the space-dependent comparison function B.

    B is s·cot(h) on the sphere, s/h in the Euclidean case, and s·coth(h)
    in the hyperbolic one; both callables guard their domain.
    """

    def A(s):
        s = _check_s(cost, s)
        return 1.0 / cost.h_prime(s)

    def B(s):
        s = _check_s(cost, s)
        hs = cost.h(s)
        if cost.space_kind == "sphere":
            return s * np.cos(hs) / np.sin(hs)
        if cost.space_kind == "hyperbolic":
            return s * np.cosh(hs) / np.sinh(hs)
        return s / hs

    return {"A": A, "B": B}


def _ab_closed_ld(cost: RadialCost, s: float):
    """(A, A', A'', B, B', B'') in closed form, extended precision.

    Near s = 0 the derivative chain of B cancels terms of size 2R^2/s down
    to O(s), and the coefficient assembly cancels A against B; both cost
    about eight digits in plain double, so everything stays in longdouble
    until the final coefficients.
    """
    if cost.form == "quadratic":
        one = np.longdouble(1.0)
        zero = np.longdouble(0.0)
        return one, zero, zero, one, zero, zero
    R = np.longdouble(cost.radius)
    s = np.longdouble(s)
    A = 2.0 * R * R + 0.5 * s * s
    A1 = s
    A2 = 1.0
    hs = np.arctan(s / (2.0 * R)) / R
    h1 = 1.0 / A
    h2 = -s / (A * A)
    if cost.space_kind == "sphere":
        u = np.cos(hs) / np.sin(hs)
        u1 = -(1.0 + u * u) * h1
        u2 = (1.0 + u * u) * (2.0 * u + s) / (A * A)
        B = s * u
        B1 = u + s * u1
        B2 = 2.0 * u1 + s * u2
    elif cost.space_kind == "hyperbolic":
        v = np.cosh(hs) / np.sinh(hs)
        v1 = (1.0 - v * v) * h1
        v2 = -2.0 * v * v1 * h1 + (1.0 - v * v) * h2
        B = s * v
        B1 = v + s * v1
        B2 = 2.0 * v1 + s * v2
    else:
        B = s / hs
        B1 = 1.0 / hs - s * h1 / hs**2
        B2 = -2.0 * h1 / hs**2 + 2.0 * s * h1 * h1 / hs**3 - s * h2 / hs**2
    return A, A1, np.longdouble(A2), B, B1, B2


def _ab_closed(cost: RadialCost, s: float):
    return tuple(float(x) for x in _ab_closed_ld(cost, s))


def _fd5_first(f, s, step):
    return (f(s - 2 * step) - 8 * f(s - step) + 8 * f(s + step) - f(s + 2 * step)) / (12 * step)


def _fd5_second(f, s, step):
    return (
        -f(s - 2 * step) + 16 * f(s - step) - 30 * f(s) + 16 * f(s + step) - f(s + 2 * step)
    ) / (12 * step * step)


def _ab_numeric(cost: RadialCost, s: float):
    """(A, A', A'', B, B', B'') by 5-point stencils with one Richardson halving."""
    fns = lee_li_functions(cost)
    A, B = fns["A"], fns["B"]
    # step grows with s so roundoff of A ~ s^2/2 is not amplified
    step = min(1e-2 * max(1.0, s), 0.2 * s, 0.2 * (cost.s_max - s))
    out = []
    for f in (A, B):
        vals = []
        for der in (_fd5_first, _fd5_second):
            d1 = der(f, s, step)
            d2 = der(f, s, 0.5 * step)
            vals.append((16.0 * d2 - d1) / 15.0)
        out.append((float(f(s)), vals[0], vals[1]))
    (Av, A1, A2), (Bv, B1, B2) = out
    return Av, A1, A2, Bv, B1, B2


def lee_li_derivatives(cost: RadialCost, s: float, method: str = "closed"):
    """A, B and their first two derivatives at s, closed-form or numeric."""
    s = _check_s(cost, s)
    if method == "closed":
        return _ab_closed(cost, s)
    if method == "numeric":
        return _ab_numeric(cost, s)
    raise InvalidInputError(f"unknown method {method!r}")


def _coefficients_at(cost: RadialCost, s: float) -> MtwCoefficients:
    A, A1, A2, B, B1, B2 = _ab_closed_ld(cost, s)
    # divided form: each term O(1), no large-s cancellation
    sl = np.longdouble(s)
    alpha = A2 + 6.0 * (A - B) / (sl * sl) - 4.0 * (A1 - B1) / sl
    beta = A1 / sl - 2.0 * (A - B) / (sl * sl)
    gamma = B2
    delta = B1 / sl
    return MtwCoefficients(s, float(alpha), float(beta), float(gamma), float(delta))


def mtw_coefficients(cost: RadialCost, s: float) -> MtwCoefficients:
    """The four coefficient functions at parameter s.

    s = 0 is filled in by even-power Richardson extrapolation over
    s in {1e-2, 5e-3, 2.5e-3}; the coefficient functions are even.
    """
    s = float(s)
    if s == 0.0:
        tiers = [
            np.array(
                [
                    (c := _coefficients_at(cost, sv)).alpha,
                    c.beta,
                    c.gamma,
                    c.delta,
                ]
            )
            for sv in (1e-2, 5e-3, 2.5e-3)
        ]
        w1 = (4.0 * tiers[1] - tiers[0]) / 3.0
        w2 = (4.0 * tiers[2] - tiers[1]) / 3.0
        lim = (16.0 * w2 - w1) / 15.0
        return MtwCoefficients(0.0, *map(float, lim))
    return _coefficients_at(cost, _check_s(cost, s))


def mtw_condition_check(cost: RadialCost, n_samples: int = 200) -> dict:
    """Sign sweep of the four inequalities over (0, s_max) plus the limit.

    Weak needs beta <= 0, gamma <= 0, delta <= 0 and
    alpha + delta <= 2 sqrt(beta gamma) everywhere within a 1e-9 slack;
    strong needs every inequality strict by more than the slack.  When
    beta·gamma < 0 the square root is not evaluated and the fourth
    inequality is flagged whenever alpha + delta > 0.  The returned dict
    carries the sweep itself in "rows": tuples of
    (s, alpha, beta, gamma, delta, fourth-margin), the s = 0 limit first.
    """
    if n_samples < 50:
        raise InvalidInputError("n_samples must be at least 50")
    slack = 1e-9
    lo = min(1e-3, cost.s_max * 1e-4)
    samples = np.geomspace(lo, cost.s_max * (1.0 - 1e-9), n_samples)
    weak = True
    strong = True
    violations = []
    rows = []
    for s in np.concatenate(([0.0], samples)):
        c = mtw_coefficients(cost, float(s))
        margins = [("beta", c.beta), ("gamma", c.gamma), ("delta", c.delta)]
        bg = c.beta * c.gamma
        if bg >= 0.0:
            margins.append(("fourth", c.alpha + c.delta - 2.0 * np.sqrt(bg)))
        else:
            margins.append(("fourth", c.alpha + c.delta))
        rows.append((float(s), c.alpha, c.beta, c.gamma, c.delta,
                     float(margins[3][1])))
        for name, m in margins:
            if m > slack:
                weak = False
                violations.append((float(s), name, float(m)))
            if m > -slack:
                strong = False
    return {"weak": weak, "strong": strong, "violations": violations,
            "rows": rows}


def _tangent_dot(space: Space, a, b) -> float:
    """Induced metric on tangent vectors: Minkowski on the hyperboloid."""
    if space.kind == "hyperbolic":
        return float(-a[0] * b[0] + np.dot(a[1:], b[1:]))
    return float(np.dot(a, b))


def _tangent_norm(space: Space, a) -> float:
    return np.sqrt(max(_tangent_dot(space, a, a), 0.0))


def _cost_cexp(space: Space, cost: RadialCost, x, p):
    """The cost exponential: the point y with -grad_x c(x, y) = p."""
    p = np.asarray(p, dtype=float)
    norm = _tangent_norm(space, p)
    if norm == 0.0:
        return np.asarray(x, dtype=float).copy()
    return exp_map(space, x, (float(cost.h(norm)) / norm) * p)


def _check_configuration(space: Space, cost: RadialCost, x, v, excursion: float):
    if space.kind != cost.space_kind:
        raise InvalidInputError("space kind does not match the cost profile")
    norm = _tangent_norm(space, v)
    if norm == 0.0:
        return
    d = float(cost.h(norm))
    if cost.form == "wfr" and cost.radius * (d + excursion) > 0.5 * np.pi - 0.05:
        raise DomainError("configuration too close to the cost singularity")


def mtw_fd_tensor(space: Space, cost: RadialCost, x, u, v, w) -> float:
    """-(3/2) d^2/dt^2 d^2/ds^2 c(exp_x(t u), cexp_x(v + s w)) at t = s = 0.

    Nested 5-point stencils with step 1e-2 and one Richardson halving;
    u = 0 gives 0 (the tensor is quadratic in u).
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    excursion = 0.05 * (1.0 + _tangent_norm(space, u) + _tangent_norm(space, w))
    _check_configuration(space, cost, x, v, excursion)

    def f(t, s_):
        base = exp_map(space, x, t * u)
        y = _cost_cexp(space, cost, x, v + s_ * w)
        return float(cost.l(geodesic_distance(space, base, y)))

    def nested(step):
        def d2s(t):
            return _fd5_second(lambda s_: f(t, s_), 0.0, step)

        return _fd5_second(d2s, 0.0, step)

    d1 = nested(1e-2)
    d2 = nested(5e-3)
    return -1.5 * (16.0 * d2 - d1) / 15.0


def mtw_decomposed(space: Space, cost: RadialCost, x, u, v, w) -> float:
    """The tensor via the coefficient decomposition at s = |v|.

    Splits u and w into components parallel and orthogonal to v and sums
    the four coefficient-weighted products; valid for J-orthogonal (u, w).
    """
    v = np.asarray(v, dtype=float)
    s = _tangent_norm(space, v)
    if s < 1e-3:
        raise DomainError("decomposition needs |v| >= 1e-3")
    vhat = v / s
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    u0 = _tangent_dot(space, u, vhat)
    w0 = _tangent_dot(space, w, vhat)
    u1sq = max(_tangent_dot(space, u, u) - u0 * u0, 0.0)
    w1sq = max(_tangent_dot(space, w, w) - w0 * w0, 0.0)
    c = mtw_coefficients(cost, s)
    return -1.5 * (
        c.alpha * u0 * u0 * w0 * w0
        + c.beta * u0 * u0 * w1sq
        + c.gamma * u1sq * w0 * w0
        + c.delta * u1sq * w1sq
    )


def _mixed_derivative(space: Space, cost: RadialCost, x, u, v, w, step=1e-2) -> float:
    """d/dt d/ds c(exp_x(t u), cexp_x(v + s w)) at 0, Richardson-refined."""

    def f(t, s_):
        base = exp_map(space, x, t * u)
        y = _cost_cexp(space, cost, x, v + s_ * w)
        return float(cost.l(geodesic_distance(space, base, y)))

    def cross(hh):
        return (f(hh, hh) - f(hh, -hh) - f(-hh, hh) + f(-hh, -hh)) / (4.0 * hh * hh)

    return (4.0 * cross(0.5 * step) - cross(step)) / 3.0


def j_orthogonalize(space: Space, cost: RadialCost, x, v, u, w):
    """Remove from w the component that mixes with u in the cost Hessian.

    The mixed derivative d_t d_s c(exp_x(t u), cexp_x(v + s w)) is linear
    in w, so w is shifted against the mixing covector — which for a radial
    cost lives in the span of v and the part of u orthogonal to v — by the
    minimal-norm amount that zeroes it; the result is certified to
    |mixed| <= 1e-6.  A w that is already non-mixing is returned
    unchanged.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    unorm = _tangent_norm(space, u)
    if unorm == 0.0:
        raise DomainError("j_orthogonalize needs u != 0")
    vnorm = _tangent_norm(space, v)
    if vnorm == 0.0:
        raise DomainError("j_orthogonalize needs v != 0")
    # the mixed derivative is linear in u, so only its direction matters;
    # normalizing makes the adjustment independent of |u|
    u = u / unorm
    excursion = 0.05 * (2.0 + _tangent_norm(space, w))
    _check_configuration(space, cost, x, v, excursion)

    mw = _mixed_derivative(space, cost, x, u, v, w)
    if abs(mw) <= 1e-7:
        return w
    vhat = v / vnorm
    probes = [vhat]
    u_perp = u - _tangent_dot(space, u, vhat) * vhat
    if _tangent_norm(space, u_perp) > 1e-12:
        probes.append(u_perp / _tangent_norm(space, u_perp))
    mq = np.array([_mixed_derivative(space, cost, x, u, v, q) for q in probes])
    msq = float(np.dot(mq, mq))
    if msq < 1e-16:
        raise DomainError("degenerate configuration: mixing cannot be adjusted away")
    direction = sum(m * q for m, q in zip(mq, probes))
    tau = mw / msq
    for _ in range(3):
        adjusted = w - tau * direction
        m = _mixed_derivative(space, cost, x, u, v, adjusted)
        if abs(m) <= 1e-6:
            return adjusted
        tau += m / msq
    raise NumericalError("j_orthogonalize failed to certify |mixed| <= 1e-6")
