"""Costs, duality, and solvers for unbalanced optimal transport.

The primal problem on discrete measures rho0, rho1 is

    inf_gamma  D_F0(gamma_0 | rho0) + D_F1(gamma_1 | rho1) + <C, gamma>

over nonnegative plans gamma (gamma_0, gamma_1 are its marginals); the dual
maximizes -sum F0*(-z0) rho0 - sum F1*(-z1) rho1 over potential pairs with
z0 + z1 <= C entrywise. Four independent routes to the optimum live here:

* ``solve_entropic``   — annealed log-domain scaling iterations (the workhorse),
* ``convex_oracle``    — multiplicative gradient descent on the primal (tiny
                         instances; used to certify the workhorse),
* ``solve_semicoupling_small`` — projected gradient on the semi-coupling
                         formulation over the cone,
* ``wfr_two_diracs``   — the closed form for a pair of Diracs.

They share nothing beyond the cost matrix, which is what makes their
agreement in the test suite evidence rather than tautology.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .cone import HALF_PI, lift_masses
from .entropy import DiscreteMeasure, EntropyFunction, csiszar_masses, make_kl_entropy
from .errors import (
    AdmissibilityError,
    FeasibilityError,
    InvalidInputError,
    NumericalError,
)
from .manifold import TWO_PI, Space

# Potential assigned to atoms whose every constraint is vacuous (all costs
# infinite): e^{-40} ~ 4e-18, so the dual term is |rho| to machine precision.
_Z_CAP = 40.0


@dataclass(frozen=True)
class CostSpec:
    """Ground cost: "quadratic" (d^2/2) or "wfr" (-log cos^2(min(d, delta*pi/2)))."""

    kind: str
    delta: float = 1.0

    def __post_init__(self):
        if self.kind not in ("quadratic", "wfr"):
            raise InvalidInputError(f"unknown cost kind {self.kind!r}")
        if self.kind == "wfr" and not (0.0 < self.delta <= 1.0):
            raise InvalidInputError("wfr delta must lie in (0, 1]")


def quadratic_cost() -> CostSpec:
    return CostSpec("quadratic")


def wfr_cost(delta: float = 1.0) -> CostSpec:
    return CostSpec("wfr", delta)


@dataclass(frozen=True)
class CostMatrix:
    """Pairwise costs on supp(rho0) x supp(rho1); +inf is a legal entry."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise InvalidInputError("cost matrix must be 2D")
        if np.any(np.isnan(v)) or np.any(v < 0):
            raise InvalidInputError("cost entries must be >= 0 (inf allowed)")
        object.__setattr__(self, "values", v)

    @property
    def shape(self):
        return self.values.shape

    @property
    def finite(self) -> np.ndarray:
        return np.isfinite(self.values)


def distance_matrix(space: Space, supp0, supp1) -> np.ndarray:
    """All pairwise geodesic distances between two point lists."""
    p = np.asarray(supp0, dtype=float)
    q = np.asarray(supp1, dtype=float)
    if p.ndim == 1:
        p = p[:, None]
    if q.ndim == 1:
        q = q[:, None]
    if space.kind == "circle":
        gap = np.abs(p[:, 0][:, None] - q[:, 0][None, :]) % TWO_PI
        return np.minimum(gap, TWO_PI - gap)
    if space.kind == "euclidean":
        diff = p[:, None, :] - q[None, :, :]
        return np.sqrt(np.sum(diff * diff, axis=-1))
    if space.kind == "sphere":
        R = space.radius
        cos_t = (p @ q.T) / R**2
        sin_t = np.sqrt(np.maximum(1.0 - np.clip(cos_t, -1.0, 1.0) ** 2, 0.0))
        return R * np.arctan2(sin_t, np.clip(cos_t, -1.0, 1.0))
    # hyperbolic
    mink = -np.outer(p[:, 0], q[:, 0]) + p[:, 1:] @ q[:, 1:].T
    return np.arccosh(np.maximum(-mink, 1.0))


def cost_value(cost: CostSpec, d):
    """Cost as a function of ground distance (vectorized)."""
    d = np.asarray(d, dtype=float)
    if cost.kind == "quadratic":
        return 0.5 * d * d
    cap = cost.delta * HALF_PI
    if cost.delta == 1.0:
        out = np.full_like(d, np.inf)
        ok = d < HALF_PI
        out[ok] = -2.0 * np.log(np.cos(d[ok]))
        return out
    return -2.0 * np.log(np.cos(np.minimum(d, cap)))


def cost_matrix(space: Space, cost: CostSpec, supp0, supp1) -> CostMatrix:
    return CostMatrix(cost_value(cost, distance_matrix(space, supp0, supp1)))


@dataclass(frozen=True)
class PotentialPair:
    """Dual potentials (z0 over rho0 atoms, z1 over rho1 atoms)."""

    z0: np.ndarray
    z1: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "z0", np.asarray(self.z0, dtype=float).reshape(-1))
        object.__setattr__(self, "z1", np.asarray(self.z1, dtype=float).reshape(-1))

    def max_violation(self, C: CostMatrix) -> float:
        """max over finite cost entries of z0[i] + z1[j] - C[i,j]."""
        s = self.z0[:, None] + self.z1[None, :] - C.values
        s = s[C.finite]
        return float(np.max(s)) if s.size else float("-inf")


@dataclass(frozen=True)
class Plan:
    """A transport plan: nonnegative masses on pairs of atoms."""

    gamma: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        if g.ndim != 2 or not np.all(np.isfinite(g)) or np.any(g < 0):
            raise InvalidInputError("plan must be a finite nonnegative matrix")
        object.__setattr__(self, "gamma", g)

    @property
    def marginal0(self) -> np.ndarray:
        return self.gamma.sum(axis=1)

    @property
    def marginal1(self) -> np.ndarray:
        return self.gamma.sum(axis=0)

    @property
    def total_mass(self) -> float:
        return float(self.gamma.sum())


@dataclass(frozen=True)
class SemiCoupling:
    """A pair (gamma0, gamma1) with prescribed row sums resp. column sums."""

    gamma0: np.ndarray
    gamma1: np.ndarray

    def __post_init__(self):
        g0 = np.asarray(self.gamma0, dtype=float)
        g1 = np.asarray(self.gamma1, dtype=float)
        if g0.shape != g1.shape or g0.ndim != 2:
            raise InvalidInputError("semi-coupling matrices must share a 2D shape")
        if np.any(g0 < 0) or np.any(g1 < 0):
            raise InvalidInputError("semi-coupling masses must be nonnegative")
        object.__setattr__(self, "gamma0", g0)
        object.__setattr__(self, "gamma1", g1)


@dataclass(frozen=True)
class Solution:
    """Solver output.

    `potentials` is a feasible dual pair kept smooth across the solver-active
    atoms (the Monge pipeline differentiates it). `dual_value` is the best
    certified lower bound: the maximum of the dual objective at `potentials`
    and at a fully c-transform-polished pair, so it can sit slightly above
    dual_objective(potentials).
    """

    plan: Plan
    potentials: PotentialPair
    primal_value: float
    dual_value: float
    gap: float
    iterations: int
    epsilon_final: float
    converged: bool


@dataclass(frozen=True)
class Schedule:
    """Geometric epsilon-annealing ladder for the scaling solver."""

    eps_start: float = 1.0
    eps_final: float = 1e-3
    decay: float = 0.7
    stage_iters: int = 200
    final_iters: int = 600

    def ladder(self):
        if not (self.eps_start >= self.eps_final > 0):
            raise InvalidInputError("need eps_start >= eps_final > 0")
        if not (0 < self.decay < 1):
            raise InvalidInputError("decay must lie in (0, 1)")
        eps = [self.eps_start]
        while eps[-1] > self.eps_final:
            nxt = eps[-1] * self.decay
            eps.append(max(nxt, self.eps_final))
        return eps


def c_transform(z, C: CostMatrix, source: int) -> np.ndarray:
    """c-conjugate: min over the other side of C - z.

    source=0: z lives on rows, output on columns; source=1: the reverse.
    Rows/columns with no finite cost entry have no constraint to define the
    transform and are rejected. Ties in the argmin resolve to the lowest
    index (irrelevant for the value, pinned for determinism).
    """
    z = np.asarray(z, dtype=float).reshape(-1)
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("c_transform needs finite z")
    V = C.values
    if source == 0:
        if z.size != V.shape[0]:
            raise InvalidInputError("z length does not match cost rows")
        slack = V - z[:, None]
        bad = ~np.any(np.isfinite(V), axis=0)
        out = np.min(slack, axis=0)
    elif source == 1:
        if z.size != V.shape[1]:
            raise InvalidInputError("z length does not match cost columns")
        slack = V - z[None, :]
        bad = ~np.any(np.isfinite(V), axis=1)
        out = np.min(slack, axis=1)
    else:
        raise InvalidInputError("source must be 0 or 1")
    if np.any(bad):
        raise AdmissibilityError(
            "c_transform undefined: a line of the cost matrix has no finite entry")
    return out


def dual_objective(zp: PotentialPair, rho0: DiscreteMeasure, rho1: DiscreteMeasure,
                   F0: EntropyFunction, F1: EntropyFunction,
                   cost: CostMatrix | None = None, feas_tol: float = 1e-9) -> float:
    """-sum F0*(-z0) rho0 - sum F1*(-z1) rho1.

    When `cost` is given, feasibility z0+z1 <= C is enforced up to feas_tol
    (the raised error carries the max violation); without it the caller owns
    feasibility.
    """
    if cost is not None:
        viol = zp.max_violation(cost)
        if viol > feas_tol:
            raise FeasibilityError(
                f"potentials violate the cost constraint by {viol:.3e}", viol)
    t0 = np.asarray(F0.F_star(-zp.z0), dtype=float)
    t1 = np.asarray(F1.F_star(-zp.z1), dtype=float)
    return float(-(t0 * rho0.masses).sum() - (t1 * rho1.masses).sum())


def primal_objective(plan: Plan, rho0: DiscreteMeasure, rho1: DiscreteMeasure,
                     F0: EntropyFunction, F1: EntropyFunction, C: CostMatrix) -> float:
    """D_F0(gamma0|rho0) + D_F1(gamma1|rho1) + <C, gamma>; +inf propagates."""
    g = plan.gamma
    if g.shape != C.shape:
        raise InvalidInputError("plan and cost shapes differ")
    carried = g > 0
    if np.any(carried & ~C.finite):
        return float("inf")
    transport = float(np.sum(np.where(carried, C.values, 0.0) * g))
    d0 = csiszar_masses(F0, plan.marginal0, rho0.masses)
    d1 = csiszar_masses(F1, plan.marginal1, rho1.masses)
    return d0 + d1 + transport


def wfr_two_diracs(space: Space, a: float, x, b: float, y) -> float:
    """Closed-form squared WFR distance between two weighted Diracs."""
    return lift_masses(space, x, a, y, b)


def admissibility(rho0: DiscreteMeasure, rho1: DiscreteMeasure, C: CostMatrix) -> dict:
    """Max-min cost over the two supports; admissible iff finite."""
    s0 = rho0.support
    s1 = rho1.support
    if s0.size == 0 or s1.size == 0:
        raise InvalidInputError("admissibility needs nonempty supports")
    block = C.values[np.ix_(s0, s1)]
    c_h = max(float(np.max(np.min(block, axis=1))), float(np.max(np.min(block, axis=0))))
    return {"c_H": c_h + 0.0, "admissible": bool(np.isfinite(c_h))}


def linearized_marginals(zp: PotentialPair, rho0: DiscreteMeasure, rho1: DiscreteMeasure,
                         F0: EntropyFunction, F1: EntropyFunction,
                         plan: Plan | None = None, C: CostMatrix | None = None,
                         mass_floor: float = 1e-6):
    """Marginals of the OT problem the potentials linearize to.

    rho_tilde_i = (F_i*)'(-z_i) rho_i. The report carries the signed mass gap
    |rho0~| - |rho1~| (zero at an exact optimum) and, when a plan and cost
    are supplied, the complementary-slackness score: the worst |C - z0 - z1|
    over plan entries carrying at least `mass_floor`.
    """
    w0 = np.asarray(F0.F_star_prime(-zp.z0), dtype=float) * rho0.masses
    w1 = np.asarray(F1.F_star_prime(-zp.z1), dtype=float) * rho1.masses
    t0 = DiscreteMeasure(rho0.space, rho0.points, w0)
    t1 = DiscreteMeasure(rho1.space, rho1.points, w1)
    report = {
        "mass0": float(w0.sum()),
        "mass1": float(w1.sum()),
        "mass_gap": float(w0.sum() - w1.sum()),
        "slackness_score": None,
    }
    if plan is not None and C is not None:
        heavy = plan.gamma >= mass_floor
        if np.any(heavy):
            resid = np.abs(C.values - zp.z0[:, None] - zp.z1[None, :])
            report["slackness_score"] = float(np.max(resid[heavy]))
        else:
            report["slackness_score"] = 0.0
    return t0, t1, report


# ---------------------------------------------------------------------------
# entropic scaling solver
# ---------------------------------------------------------------------------


def _lse_axis(ker: np.ndarray, shift: np.ndarray, axis: int, buf: np.ndarray):
    """logsumexp of ker + shift broadcast along `axis`, using a work buffer.

    Assumes every reduced line has at least one finite entry (the refined
    active core guarantees it), so the max-shift never meets an all -inf line.
    """
    if axis == 1:
        np.add(ker, shift[None, :], out=buf)
    else:
        np.add(ker, shift[:, None], out=buf)
    mx = buf.max(axis=axis)
    np.subtract(buf, mx[:, None] if axis == 1 else mx[None, :], out=buf)
    np.exp(buf, out=buf)
    return mx + np.log(buf.sum(axis=axis))


def _lse_vec(x: np.ndarray) -> float:
    mx = float(np.max(x))
    return mx + float(np.log(np.sum(np.exp(x - mx))))


def _proxdiv_log(name: str, log_rho, log_kb, absorbed, eps: float) -> np.ndarray:
    """Log-domain proxdiv update for one side; returns the residual log-scaling.

    KL:  a = (rho / Kb)^(1/(1+eps))          (damped geometric mean)
    TV:  a = clip(rho / Kb, e^(-1/eps), e^(1/eps))
    where log(Kb) = -absorbed/eps + log_kb and the return value is
    log(a) - absorbed/eps.
    """
    if name == "kl":
        return (log_rho - log_kb - absorbed) / (1.0 + eps)
    if name == "tv":
        log_a = np.clip(log_rho - log_kb + absorbed / eps, -1.0 / eps, 1.0 / eps)
        return log_a - absorbed / eps
    raise InvalidInputError(
        f"solve_entropic supports the 'kl' and 'tv' entropies, not {name!r}")


def solve_entropic(rho0: DiscreteMeasure, rho1: DiscreteMeasure, C: CostMatrix,
                   F0: EntropyFunction | None = None, F1: EntropyFunction | None = None,
                   schedule: Schedule = Schedule(), max_iter: int = 20000,
                   tol: float = 1e-6, feas_tol: float = 1e-9) -> Solution:
    """Annealed scaling solver in the log domain.

    Alternates the proxdiv updates for the two marginal penalties against the
    kernel K = exp(-C/eps), with eps walked down a geometric ladder and the
    accumulated potentials absorbed between stages (warm starts). Potentials
    are z_i = eps*log(scaling_i), polished at the end by two exact
    c-transform passes (feasible by construction, no projection needed) and,
    for KL marginals, the dual-optimal translation, which balances the
    linearized masses exactly. Deterministic: fixed iteration order, no
    randomness.
    """
    F0 = F0 or make_kl_entropy()
    F1 = F1 or make_kl_entropy()
    m0, m1 = C.shape
    if rho0.masses.size != m0 or rho1.masses.size != m1:
        raise InvalidInputError("cost matrix does not match the measures")

    finite = C.finite
    # mutual refinement: an atom is active only if it carries mass and can
    # reach at least one *active* atom on the other side at finite cost
    keep0 = rho0.masses > 0
    keep1 = rho1.masses > 0
    while True:
        new0 = keep0 & (finite[:, keep1].any(axis=1) if keep1.any()
                        else np.zeros(m0, dtype=bool))
        new1 = keep1 & (finite[new0, :].any(axis=0) if new0.any()
                        else np.zeros(m1, dtype=bool))
        if np.array_equal(new0, keep0) and np.array_equal(new1, keep1):
            break
        keep0, keep1 = new0, new1
    act0 = np.nonzero(keep0)[0]
    act1 = np.nonzero(keep1)[0]

    iterations = 0
    converged = True
    if act0.size and act1.size:
        sub = C.values[np.ix_(act0, act1)]
        log_r0 = np.log(rho0.masses[act0])
        log_r1 = np.log(rho1.masses[act1])
        f = np.zeros(act0.size)  # absorbed potential, row side
        g = np.zeros(act1.size)
        lu = np.zeros(act0.size)  # residual log-scalings at the current eps
        lv = np.zeros(act1.size)

        ladder = schedule.ladder()
        both_kl = F0.name == "kl" and F1.name == "kl"
        buf = np.empty_like(sub)
        with np.errstate(divide="ignore"):
            for stage, eps in enumerate(ladder):
                last = stage == len(ladder) - 1
                stage_tol = tol if last else max(tol, 1e-3 * eps)
                cap = schedule.final_iters if last else schedule.stage_iters
                ker = (f[:, None] + g[None, :] - sub) / eps  # -inf on inf costs
                for _ in range(cap):
                    if iterations >= max_iter:
                        converged = False
                        break
                    iterations += 1
                    log_kb = _lse_axis(ker, lv, 1, buf)
                    lu_new = _proxdiv_log(F0.name, log_r0, log_kb, f, eps)
                    log_ka = _lse_axis(ker, lu_new, 0, buf)
                    lv_new = _proxdiv_log(F1.name, log_r1, log_ka, g, eps)
                    if both_kl:
                        # translation z0 += t, z1 -= t leaves the constraint
                        # set invariant; the dual-optimal t balances the
                        # linearized masses and removes the slowest mode of
                        # the scaling iteration at small eps
                        t = 0.5 * (_lse_vec(log_r0 - f - eps * lu_new)
                                   - _lse_vec(log_r1 - g - eps * lv_new))
                        lu_new = lu_new + t / eps
                        lv_new = lv_new - t / eps
                    delta = eps * max(np.max(np.abs(lu_new - lu)),
                                      np.max(np.abs(lv_new - lv)))
                    lu, lv = lu_new, lv_new
                    if delta < stage_tol:
                        break
                else:
                    if last:
                        converged = False
                if np.any(np.isnan(lu)) or np.any(np.isnan(lv)):
                    raise NumericalError("scaling iteration produced NaN")
                # absorb the stage's scalings into the potentials
                f = f + eps * lu
                g = g + eps * lv
                lu = np.zeros(act0.size)
                lv = np.zeros(act1.size)
                if iterations >= max_iter:
                    converged = False
                    break

        eps_last = ladder[min(stage, len(ladder) - 1)]
        with np.errstate(divide="ignore"):
            log_plan = (f[:, None] + g[None, :] - sub) / eps_last
        plan_sub = np.exp(log_plan)
        # feasibility projection: a constant shift on each side, which
        # preserves the smoothness of the scaling potentials (the Monge
        # pipeline differentiates them)
        slack = f[:, None] + g[None, :] - sub
        fin = np.isfinite(sub)
        viol = float(np.max(slack[fin])) if fin.any() else 0.0
        if viol > 0.0:
            f = f - 0.5 * viol
            g = g - 0.5 * viol
    else:
        plan_sub = np.zeros((act0.size, act1.size))
        eps_last = schedule.eps_final
        both_kl = F0.name == "kl" and F1.name == "kl"

    gamma = np.zeros((m0, m1))
    if act0.size and act1.size:
        gamma[np.ix_(act0, act1)] = plan_sub
    gamma[~finite] = 0.0

    def transforms_from(seed0: np.ndarray):
        """Feasible pair built by two exact c-transform passes from a row
        seed. The first pass is restricted to positive-mass rows (a
        zero-mass atom contributes nothing to the dual and must not
        constrain it); atoms unreachable at finite cost get the cap, which
        zeroes their F* term."""
        pos0 = rho0.masses > 0
        if pos0.any() and m1:
            col_slack = C.values[pos0, :] - seed0[pos0][:, None]
            t1 = np.minimum(_Z_CAP, np.min(col_slack, axis=0))
        else:
            t1 = np.full(m1, _Z_CAP)
        if m1:
            t0 = np.minimum(_Z_CAP, np.min(C.values - t1[None, :], axis=1))
        else:
            t0 = np.full(m0, _Z_CAP)
        return t0, t1

    def balance(t0: np.ndarray, t1: np.ndarray):
        """Dual-optimal translation for KL/KL: balances linearized masses."""
        if not both_kl:
            return t0, t1
        total0 = float(np.sum(rho0.masses * np.exp(-t0)))
        total1 = float(np.sum(rho1.masses * np.exp(-t1)))
        if total0 > 0.0 and total1 > 0.0:
            shift = 0.5 * float(np.log(total0 / total1))
            return t0 + shift, t1 - shift
        return t0, t1

    seed = np.full(m0, _Z_CAP)
    if act0.size and act1.size:
        seed[act0] = f
    ext0, ext1 = transforms_from(seed)
    # returned potentials: projected scaling values on the active atoms
    # (smooth in the node index), c-transform extensions elsewhere
    z0, z1 = ext0.copy(), ext1.copy()
    if act0.size and act1.size:
        z0[act0] = f
        z1[act1] = g
    z0, z1 = balance(z0, z1)
    pair = PotentialPair(z0, z1)

    plan = Plan(gamma)
    primal = primal_objective(plan, rho0, rho1, F0, F1, C)
    dual = dual_objective(pair, rho0, rho1, F0, F1, cost=C, feas_tol=max(feas_tol, 1e-9))
    # the fully polished pair is a certified dual point as well; report the
    # tighter of the two bounds
    p0, p1 = balance(ext0, ext1)
    dual_polished = dual_objective(PotentialPair(p0, p1), rho0, rho1, F0, F1,
                                   cost=C, feas_tol=max(feas_tol, 1e-9))
    dual = max(dual, dual_polished)
    return Solution(plan, pair, primal, dual, primal - dual, iterations,
                    eps_last, converged)


# ---------------------------------------------------------------------------
# convex oracle (independent primal route)
# ---------------------------------------------------------------------------


def convex_oracle(rho0: DiscreteMeasure, rho1: DiscreteMeasure, C: CostMatrix,
                  F0: EntropyFunction | None = None, F1: EntropyFunction | None = None,
                  iters: int = 200000, grad_tol: float = 1e-8):
    """Brute-force primal minimization for tiny KL instances.

    Multiplicative gradient descent gamma <- gamma * exp(-eta * grad) with
    Armijo backtracking on the exact (unregularized) primal. Entries with
    infinite cost are pinned to zero. Terminates when the projected gradient
    (gradient on live entries, downhill part on vanished ones) drops below
    `grad_tol`; raises if the instance is too large.
    """
    F0 = F0 or make_kl_entropy()
    F1 = F1 or make_kl_entropy()
    if F0.name != "kl" or F1.name != "kl":
        raise InvalidInputError("convex_oracle handles the KL primal only")
    m0, m1 = C.shape
    if m0 * m1 > 16:
        raise InvalidInputError("convex_oracle is for instances with m0*m1 <= 16")
    r0 = rho0.masses
    r1 = rho1.masses
    if r0.size != m0 or r1.size != m1:
        raise InvalidInputError("cost matrix does not match the measures")

    live = C.finite & (r0[:, None] > 0) & (r1[None, :] > 0)
    gamma = np.zeros((m0, m1))
    if not live.any():
        value = primal_objective(Plan(gamma), rho0, rho1, F0, F1, C)
        return Plan(gamma), value

    cvals = np.where(live, np.where(C.finite, C.values, 0.0), 0.0)
    # warm start: the exact two-Dirac solution applied entrywise
    gamma[live] = (np.sqrt(np.outer(r0, r1)) * np.exp(-0.5 * cvals))[live]

    def value_of(g):
        v0 = csiszar_masses(F0, g.sum(axis=1), r0)
        v1 = csiszar_masses(F1, g.sum(axis=0), r1)
        return v0 + v1 + float(np.sum(cvals * g))

    def gradient(g):
        g0 = g.sum(axis=1)
        g1 = g.sum(axis=0)
        with np.errstate(divide="ignore"):
            lr = np.where(r0 > 0, np.log(np.maximum(g0, 1e-300) / np.where(r0 > 0, r0, 1.0)), 0.0)
            lc = np.where(r1 > 0, np.log(np.maximum(g1, 1e-300) / np.where(r1 > 0, r1, 1.0)), 0.0)
        return lr[:, None] + lc[None, :] + cvals

    def proj_grad_norm(g, grad):
        live_now = live & (g > 1e-14 * scale)
        pg = float(np.max(np.abs(grad[live_now]))) if live_now.any() else 0.0
        sleeping = live & ~live_now
        if sleeping.any():
            pg = max(pg, float(np.max(np.maximum(-grad[sleeping], 0.0))))
        return pg

    val = value_of(gamma)
    eta = 1.0
    scale = float(gamma[live].max())
    for _ in range(iters):
        grad = gradient(gamma)
        if proj_grad_norm(gamma, grad) < grad_tol:
            break
        step = np.where(live, np.exp(-eta * np.clip(grad, -50.0, 50.0)), 1.0)
        decrease = float(np.sum((gamma * grad * grad)[live]))
        moved = False
        while eta > 1e-18:
            cand = gamma * step
            cand_val = value_of(cand)
            if cand_val <= val - 0.25 * eta * decrease + 1e-15:
                gamma, val = cand, cand_val
                eta = min(eta * 1.3, 10.0)
                moved = True
                break
            eta *= 0.5
            step = np.where(live, np.exp(-eta * np.clip(grad, -50.0, 50.0)), 1.0)
        if not moved:
            break
    if proj_grad_norm(gamma, gradient(gamma)) > grad_tol:
        raise NumericalError("convex_oracle failed to certify stationarity")
    return Plan(gamma), val


# ---------------------------------------------------------------------------
# semi-coupling route (cone formulation)
# ---------------------------------------------------------------------------


def _sigma_matrix(space: Space, supp0, supp1) -> np.ndarray:
    """cos(min(d, pi/2)) for all support pairs — the coupling gain."""
    return np.cos(np.minimum(distance_matrix(space, supp0, supp1), HALF_PI))


def semicoupling_value(space: Space, sc: SemiCoupling, supp0, supp1) -> float:
    """sum of sigma(x_i, y_j, gamma0[i,j], gamma1[i,j]) over all pairs."""
    cosd = _sigma_matrix(space, supp0, supp1)
    if cosd.shape != sc.gamma0.shape:
        raise InvalidInputError("semi-coupling does not match the supports")
    prod = sc.gamma0 * sc.gamma1
    return float(np.sum(sc.gamma0 + sc.gamma1 - 2.0 * cosd * np.sqrt(prod)))


def _project_rows_to_sums(M: np.ndarray, sums: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row onto the scaled simplex {x>=0, sum=s}."""
    out = np.empty_like(M)
    for i in range(M.shape[0]):
        out[i] = _project_simplex(M[i], sums[i])
    return out


def _project_simplex(v: np.ndarray, s: float) -> np.ndarray:
    if s <= 0:
        return np.zeros_like(v)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - s
    k = np.arange(1, v.size + 1)
    cond = u - css / k > 0
    rho = np.nonzero(cond)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _dead_route_move(g0, g1, cosd, floor, margin):
    """Strict-descent reopening of a double-zero route, or None.

    A route where both semi-coupling factors sit at zero is invisible to
    the smoothed gradient (the coupling derivative vanishes there), but the
    true objective changes along masses (p, q) placed on it by

        p (1 - a0) + q (1 - a1) - 2 cos(d) sqrt(pq),

    where a0 / a1 are the best donor derivatives in the same row / column.
    Descent exists iff (1 - a0)(1 - a1) < cos^2(d). Returns the move with
    the largest such violation as (i, j, donor_col, donor_row, p, q), using
    the optimal p : q ratio; None when every dead route is clean to within
    `margin`.
    """
    m0, m1 = cosd.shape
    best = None
    for i in range(m0):
        for j in range(m1):
            if g0[i, j] > floor or g1[i, j] > floor or cosd[i, j] <= 0.0:
                continue
            don0 = [jj for jj in range(m1) if jj != j and g0[i, jj] > floor]
            don1 = [ii for ii in range(m0) if ii != i and g1[ii, j] > floor]
            if not don0 or not don1:
                continue
            j_star = max(don0, key=lambda jj: -cosd[i, jj] * np.sqrt(g1[i, jj] / g0[i, jj]))
            i_star = max(don1, key=lambda ii: -cosd[ii, j] * np.sqrt(g0[ii, j] / g1[ii, j]))
            b0 = cosd[i, j_star] * np.sqrt(g1[i, j_star] / g0[i, j_star])  # = 1 - a0
            b1 = cosd[i_star, j] * np.sqrt(g0[i_star, j] / g1[i_star, j])  # = 1 - a1
            gain = cosd[i, j] ** 2 - b0 * b1
            if gain > margin and (best is None or gain > best[0]):
                best = (gain, i, j, j_star, i_star, b1)
    if best is None:
        return None
    _, i, j, j_star, i_star, b1 = best
    c = cosd[i, j]
    ratio = (c / max(b1, 1e-6 * c)) ** 2  # optimal q / p
    p = 0.25 * min(g0[i, j_star], g1[i_star, j] / ratio)
    return i, j, j_star, i_star, p, p * ratio


def solve_semicoupling_small(rho0: DiscreteMeasure, rho1: DiscreteMeasure,
                             space: Space | None = None, max_iter: int = 200000,
                             stat_tol: float = 1e-8):
    """Projected-gradient minimizer of the semi-coupling objective.

    Up to 3x3 atoms. Runs a smoothing continuation sqrt(ab) ->
    sqrt(ab + mu^2) - mu with mu walked from 1e-2 down to 1e-10 (the
    surrogate differs from the true objective by at most 2*mu per pair),
    projecting gamma0 rows and gamma1 columns back onto their marginal
    simplices each step. At the final mu, routes parked at an exact double
    zero are tested against the true directional derivative and reopened
    when they descend (the smoothed gradient cannot see them). Certifies
    projected-gradient stationarity plus clean dead routes; the returned
    value is the exact unsmoothed objective.
    """
    space = space or rho0.space
    m0 = rho0.masses.size
    m1 = rho1.masses.size
    if m0 > 3 or m1 > 3:
        raise InvalidInputError("solve_semicoupling_small is for m0, m1 <= 3")
    cosd = _sigma_matrix(space, rho0.points, rho1.points)
    r0 = rho0.masses
    r1 = rho1.masses
    floor = 1e-13 * max(float(r0.sum() + r1.sum()), 1.0)

    g0 = np.repeat(r0[:, None], m1, axis=1) / m1
    g1 = np.repeat(r1[None, :], m0, axis=0) / m0

    def smooth_value(a, b, mu):
        root = np.sqrt(a * b + mu * mu)
        return float(np.sum(a + b - 2.0 * cosd * (root - mu)))

    def grads(a, b, mu):
        root = np.sqrt(a * b + mu * mu)
        return 1.0 - cosd * b / root, 1.0 - cosd * a / root

    def stationarity(a, b, mu):
        da, db = grads(a, b, mu)
        ref0 = _project_rows_to_sums(a - da, r0)
        ref1 = _project_rows_to_sums((b - db).T, r1).T
        return max(float(np.max(np.abs(a - ref0))), float(np.max(np.abs(b - ref1))))

    snap_tol = 1e-5 * max(float(r0.sum()), float(r1.sum()), 1e-30)

    def try_snap(a, b, val, mu_):
        """Close routes whose factors have both crawled below snap_tol.

        A dying route leaves the domain only asymptotically under projected
        gradient steps (the sqrt coupling flattens the exit direction), so
        finish it off in one move — guarded: keep the snap only if the
        smoothed value does not increase.
        """
        dead = (a <= snap_tol) & (b <= snap_tol) & ((a > 0.0) | (b > 0.0))
        if not dead.any():
            return a, b, val, False
        a2, b2 = a.copy(), b.copy()
        for i, j in zip(*np.nonzero(dead)):
            row = [jj for jj in range(m1) if jj != j]
            col = [ii for ii in range(m0) if ii != i]
            if not row or not col:
                continue
            a2[i, max(row, key=lambda jj: a2[i, jj])] += a2[i, j]
            b2[max(col, key=lambda ii: b2[ii, j]), j] += b2[i, j]
            a2[i, j] = 0.0
            b2[i, j] = 0.0
        v2 = smooth_value(a2, b2, mu_)
        if v2 <= val + 1e-12 * max(1.0, abs(val)):
            return a2, b2, v2, True
        return a, b, val, False

    mus = [10.0 ** (-k) for k in range(2, 11)]
    used = 0
    revivals = 0
    for mu in mus:
        final = mu == mus[-1]
        stage_tol = stat_tol if final else max(stat_tol, 1e-6)
        eta = 1.0
        val = smooth_value(g0, g1, mu)
        while used < max_iter:
            used += 1
            if stationarity(g0, g1, mu) < stage_tol:
                # only at the final mu is the smoothing noise (2 mu per
                # pair) below the revival margin, so test dead routes here
                move = (_dead_route_move(g0, g1, cosd, floor, 1e-8)
                        if final and revivals < 50 else None)
                if move is None:
                    break
                i, j, j_star, i_star, p, q = move
                g0 = g0.copy()
                g1 = g1.copy()
                g0[i, j], g0[i, j_star] = p, g0[i, j_star] - p
                g1[i, j], g1[i_star, j] = q, g1[i_star, j] - q
                revivals += 1
                val = smooth_value(g0, g1, mu)
                eta = max(eta, 1e-3)
                continue
            da, db = grads(g0, g1, mu)
            accepted = False
            while eta > 1e-18:
                cand0 = _project_rows_to_sums(g0 - eta * da, r0)
                cand1 = _project_rows_to_sums((g1 - eta * db).T, r1).T
                move = float(np.sum((cand0 - g0) ** 2) + np.sum((cand1 - g1) ** 2))
                cand_val = smooth_value(cand0, cand1, mu)
                if cand_val <= val - 0.1 * move / max(eta, 1e-18) + 1e-15:
                    g0, g1, val = cand0, cand1, cand_val
                    eta = min(eta * 1.2, 10.0)
                    accepted = True
                    break
                eta *= 0.5
            if accepted:
                g0, g1, val, _ = try_snap(g0, g1, val, mu)
            else:
                break
    if stationarity(g0, g1, mus[-1]) > stat_tol or _dead_route_move(
            g0, g1, cosd, floor, 1e-8) is not None:
        raise NumericalError(
            "solve_semicoupling_small failed to certify stationarity")
    sc = SemiCoupling(g0, g1)
    return sc, semicoupling_value(space, sc, rho0.points, rho1.points)
