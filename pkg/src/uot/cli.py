"""Command-line front end.

Every subcommand builds a :class:`RunConfig`, hands it to :func:`run`, and
writes the resulting report as canonical JSON (stdout unless ``--out``).
Reports embed the config under a ``"uot-report/1"`` schema tag, so any
report can be re-run bit-for-bit from its own contents. Exit codes: 0 on
success, 2 when the problem itself is inadmissible or infeasible, 1 for
broken input, files, or schemas.
"""

from __future__ import annotations

import csv
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone

import click
import numpy as np

from .cone import cone_distance
from .entropy import make_kl_entropy, make_tv_entropy
from .errors import (
    AdmissibilityError,
    FeasibilityError,
    InvalidInputError,
    SchemaError,
    UotError,
)
from .manifold import TWO_PI, GridDensity, Space, circle
from .monge import ma_residual, monge_couple_from_potential, monge_objective, pushforward
from .mtw import (
    j_orthogonalize,
    mtw_condition_check,
    mtw_decomposed,
    mtw_fd_tensor,
    quadratic_radial_cost,
    wfr_radial_cost,
)
from .polar import GeneralizedAutomorphism, polar_factorize
from .serialize import (
    dump_json,
    dumps_json,
    load_cone_point,
    load_map,
    load_measure,
    load_potential,
    validate_schema,
)
from .solver import (
    Schedule,
    admissibility,
    cost_matrix,
    quadratic_cost,
    solve_entropic,
    wfr_cost,
    wfr_two_diracs,
)

__all__ = ["RunConfig", "run", "main"]

REPORT_SCHEMA_VERSION = "uot-report/1"


@dataclass(frozen=True)
class RunConfig:
    """One fully-specified CLI invocation (paths, parameters, seed)."""

    command: str
    args: dict = field(default_factory=dict)
    seed: int = 0

    def to_json(self) -> dict:
        return {"command": self.command, "seed": int(self.seed),
                "args": dict(self.args)}

    @staticmethod
    def from_json(obj: dict) -> "RunConfig":
        return RunConfig(str(obj["command"]), dict(obj.get("args", {})),
                         int(obj.get("seed", 0)))


def worker_count() -> int:
    """Thread cap for parallel sub-jobs: UOT_THREADS, else logical cores."""
    env = os.environ.get("UOT_THREADS", "").strip()
    if not env:
        return os.cpu_count() or 1
    try:
        k = int(env)
    except ValueError:
        raise InvalidInputError(f"UOT_THREADS must be an integer, got {env!r}")
    if k < 1:
        raise InvalidInputError("UOT_THREADS must be at least 1")
    return k


# ---------------------------------------------------------------------------
# runners (pure: config in, result payload out)
# ---------------------------------------------------------------------------


def _run_solve(args: dict, seed: int) -> dict:
    rho0 = load_measure(args["rho0"])
    rho1 = load_measure(args["rho1"])
    if rho0.space != rho1.space:
        raise InvalidInputError("the two measures live on different spaces")
    kind = args.get("cost", "wfr")
    if kind == "wfr":
        cost = wfr_cost(float(args.get("delta", 1.0)))
    elif kind == "quadratic":
        cost = quadratic_cost()
    else:
        raise InvalidInputError(f"unknown cost {kind!r}")
    C = cost_matrix(rho0.space, cost, rho0.points, rho1.points)

    entropy = args.get("entropy", "kl")
    if entropy == "kl":
        F = make_kl_entropy()
    elif entropy == "tv":
        F = make_tv_entropy()
    else:
        raise InvalidInputError(f"unknown entropy {entropy!r}")

    if rho0.support.size and rho1.support.size:
        adm = admissibility(rho0, rho1, C)
    else:
        adm = {"c_H": np.inf, "admissible": False}
    if args.get("strict") and not adm["admissible"]:
        raise AdmissibilityError(
            f"measure pair is not admissible for the {kind} cost "
            f"(c_H = {adm['c_H']})")

    schedule = Schedule(eps_start=float(args.get("eps_start", 1.0)),
                        eps_final=float(args.get("eps_final", 1e-3)))
    sol = solve_entropic(rho0, rho1, C, F, F, schedule=schedule,
                         max_iter=int(args.get("max_iter", 20000)),
                         tol=float(args.get("tol", 1e-8)))
    gamma = sol.plan.gamma
    nz = np.argwhere(gamma > 0.0)
    return {
        "value": float(sol.primal_value),
        "dual_value": float(sol.dual_value),
        "gap": float(sol.gap),
        "iterations": int(sol.iterations),
        "epsilon_final": float(sol.epsilon_final),
        "converged": bool(sol.converged),
        "z0": sol.potentials.z0.tolist(),
        "z1": sol.potentials.z1.tolist(),
        "plan_nnz": [[int(i), int(j), float(gamma[i, j])] for i, j in nz],
        "marginal_masses": {
            "rho0": float(rho0.total_mass),
            "rho1": float(rho1.total_mass),
            "plan0": float(sol.plan.marginal0.sum()),
            "plan1": float(sol.plan.marginal1.sum()),
        },
        "c_H": float(adm["c_H"]),
        "admissible": bool(adm["admissible"]),
    }


def _grid_density(measure) -> GridDensity:
    """Reads a circle measure whose atoms are the uniform grid, in order."""
    if measure.space.kind != "circle":
        raise InvalidInputError("grid measures live on the circle")
    n = measure.masses.size
    if n < 3:
        raise InvalidInputError("grid measures need at least 3 nodes")
    nodes = TWO_PI * np.arange(n) / n
    gap = np.mod(measure.points[:, 0] - nodes, TWO_PI)
    gap = np.minimum(gap, TWO_PI - gap)
    if float(np.max(gap)) > 1e-9:
        raise InvalidInputError(
            "measure atoms must be the uniform circle grid 2*pi*i/n, in order")
    return GridDensity.on_circle(measure.masses * n / TWO_PI)


def _run_monge(args: dict, seed: int) -> dict:
    z = load_potential(args["potential"])
    f = _grid_density(load_measure(args["rho0"]))
    g = _grid_density(load_measure(args["rho1"]))
    if z.size != f.n or f.n != g.n:
        raise InvalidInputError("potential and the two grids must share a size")
    tc = monge_couple_from_potential(z, f)
    _, push = pushforward(tc, f)
    result = {
        "n": int(f.n),
        "monge_objective": float(monge_objective(tc, f)),
        "pushforward_tv": float(np.sum(np.abs(push.values - g.values)) * f.spacing),
        "map": {"phi": tc.phi.tolist(), "lam": tc.lam.tolist()},
    }
    if args.get("check_ma"):
        res = np.abs(ma_residual(z, f, g))
        result["max_ma_residual"] = float(np.max(res))
        result["mean_ma_residual"] = float(np.mean(res))
    return result


def _run_polar(args: dict, seed: int) -> dict:
    phi, lam = load_map(args["map"])
    n = phi.size
    grid = args.get("grid")
    if grid is not None and int(grid) != n:
        raise InvalidInputError(
            f"--grid {grid} does not match the map length {n}")
    nodes = TWO_PI * np.arange(n) / n
    g = GeneralizedAutomorphism(circle(), nodes, phi, lam)
    pf = polar_factorize(g)
    return {
        "n": int(n),
        "z0": pf.z0.tolist(),
        "monge": {"phi": pf.monge_part.phi.tolist(),
                  "lam": pf.monge_part.lam.tolist()},
        "stabilizer": {"phi": pf.stabilizer_part.phi.tolist(),
                       "lam": pf.stabilizer_part.lam.tolist()},
        "diagnostics": dict(pf.diagnostics),
    }


def _radial_cost(args: dict):
    kind = args.get("space", "sphere")
    if args.get("cost", "wfr") == "quadratic":
        if kind != "euclidean":
            raise InvalidInputError("the quadratic profile is Euclidean")
        return quadratic_radial_cost()
    return wfr_radial_cost(kind, radius=float(args.get("radius", 1.0)),
                           s_max=args.get("s_max"))


def _run_mtw(args: dict, seed: int) -> dict:
    cost = _radial_cost(args)
    check = mtw_condition_check(cost, n_samples=int(args.get("samples", 200)))
    return {
        "space": cost.space_kind,
        "radius": float(cost.radius),
        "form": cost.form,
        "s_max": float(cost.s_max),
        "samples": int(args.get("samples", 200)),
        "weak": check["weak"],
        "strong": check["strong"],
        "violations": [[s, name, m] for s, name, m in check["violations"]],
        "sweep": [list(row) for row in check["rows"]],
    }


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _fd_frame(rng: np.random.Generator, space: Space):
    """A point and an orthonormal tangent frame, drawn from `rng`."""
    if space.kind == "sphere":
        x = _unit(rng.normal(size=3))
        e1 = rng.normal(size=3)
        e1 = _unit(e1 - np.dot(e1, x) * x)
        return x, e1, np.cross(x, e1)
    if space.kind == "euclidean":
        x = rng.normal(size=2)
        theta = rng.uniform(0.0, TWO_PI)
        e1 = np.array([np.cos(theta), np.sin(theta)])
        return x, e1, np.array([-e1[1], e1[0]])
    # hyperboloid: x = (cosh t, sinh t * u); the frame below is
    # Minkowski-orthonormal by direct computation
    t = rng.uniform(0.0, 0.8)
    u = _unit(rng.normal(size=2))
    x = np.array([np.cosh(t), np.sinh(t) * u[0], np.sinh(t) * u[1]])
    e1 = np.array([np.sinh(t), np.cosh(t) * u[0], np.cosh(t) * u[1]])
    e2 = np.array([0.0, -u[1], u[0]])
    return x, e1, e2


def _run_mtw_fd(args: dict, seed: int) -> dict:
    cost = _radial_cost(args)
    space = Space(args.get("space", "sphere"), dim=2)
    trials = int(args.get("trials", 20))
    if trials < 1:
        raise InvalidInputError("need at least one trial")

    rng = np.random.default_rng(seed)
    s_hi = min(1.8, 0.8 * cost.s_max)
    s_lo = min(0.3, 0.5 * s_hi)
    configs = []
    for _ in range(trials):
        x, e1, e2 = _fd_frame(rng, space)
        s = rng.uniform(s_lo, s_hi)
        au, tu = rng.uniform(0.4, 1.2), rng.uniform(0.0, TWO_PI)
        aw, tw = rng.uniform(0.4, 1.2), rng.uniform(0.0, TWO_PI)
        u = au * (np.cos(tu) * e1 + np.sin(tu) * e2)
        w = aw * (np.cos(tw) * e1 + np.sin(tw) * e2)
        configs.append((x, u, s * e1, w))

    def one(i: int) -> dict:
        x, u, v, w_raw = configs[i]
        w = j_orthogonalize(space, cost, x, v, u, w_raw)
        fd = mtw_fd_tensor(space, cost, x, u, v, w)
        dec = mtw_decomposed(space, cost, x, u, v, w)
        return {"s": float(np.linalg.norm(v)), "fd": float(fd),
                "decomposed": float(dec), "abs_err": float(abs(fd - dec))}

    with ThreadPoolExecutor(max_workers=min(worker_count(), trials)) as pool:
        per_trial = list(pool.map(one, range(trials)))

    # genuinely nonzero tensors are O(1) here; anything below 1e-3 is a
    # zero of the decomposition and is scored absolutely
    worst_rel = 0.0
    worst_abs = 0.0
    for row in per_trial:
        if abs(row["fd"]) > 1e-3:
            worst_rel = max(worst_rel, row["abs_err"] / abs(row["fd"]))
        else:
            worst_abs = max(worst_abs, row["abs_err"])
    return {
        "space": space.kind,
        "radius": float(cost.radius),
        "form": cost.form,
        "trials": trials,
        "worst_rel_err": worst_rel,
        "worst_abs_err": worst_abs,
        "per_trial": per_trial,
    }


def _run_conedist(args: dict, seed: int) -> dict:
    space = Space(args.get("space", "circle"), dim=int(args.get("dim", 1)),
                  radius=float(args.get("radius", 1.0)))
    c1 = load_cone_point(args["a"], space)
    c2 = load_cone_point(args["b"], space)
    d, d2 = cone_distance(c1, c2)
    return {"distance": d, "squared": d2}


def _run_twodirac(args: dict, seed: int) -> dict:
    a, b, d = float(args["a"]), float(args["b"]), float(args["d"])
    if a <= 0 or b <= 0:
        raise InvalidInputError("Dirac masses must be positive")
    if d < 0:
        raise InvalidInputError("the separation must be nonnegative")
    value = wfr_two_diracs(circle(), a, np.array([0.0]), b, np.array([d]))
    return {"a": a, "b": b, "d": d, "value": float(value)}


_RUNNERS = {
    "solve": _run_solve,
    "monge": _run_monge,
    "polar": _run_polar,
    "mtw": _run_mtw,
    "mtw-fd": _run_mtw_fd,
    "conedist": _run_conedist,
    "twodirac": _run_twodirac,
}


def run(config: RunConfig):
    """Execute a config; returns (report, exit_code). Writes no files.

    The report always embeds the config and the schema version; on failure
    it carries an "error" object instead of a "result", and the exit code
    separates mathematical rejections (2: the measure pair is inadmissible
    or the potentials infeasible) from broken input (1).
    """
    base = {"schema": REPORT_SCHEMA_VERSION, "config": config.to_json()}
    runner = _RUNNERS.get(config.command)
    if runner is None:
        base["error"] = {"type": "InvalidInputError",
                         "message": f"unknown command {config.command!r}"}
        return base, 1
    try:
        base["result"] = runner(config.args, config.seed)
        return base, 0
    except (AdmissibilityError, FeasibilityError) as e:
        base["error"] = {"type": type(e).__name__, "message": str(e)}
        return base, 2
    except SchemaError as e:
        base["error"] = {"type": "SchemaError", "message": str(e),
                         "diagnostics": e.diagnostics}
        return base, 1
    except (UotError, OSError) as e:
        base["error"] = {"type": type(e).__name__, "message": str(e)}
        return base, 1


# ---------------------------------------------------------------------------
# click surface
# ---------------------------------------------------------------------------


def _write_csv(path: str, header: list, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, float) else v
                             for v in row])


def _execute(command: str, args: dict, seed: int, out, no_timestamp: bool,
             csv_path=None, csv_spec=None) -> None:
    config = RunConfig(command, args, seed)
    report, code = run(config)
    if not no_timestamp:
        report = dict(report)
        report["timestamp"] = datetime.now(timezone.utc).isoformat()
    text = dumps_json(report)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)
    if code == 0 and csv_path and csv_spec:
        header, rows = csv_spec(report["result"])
        _write_csv(csv_path, header, rows)
    if code != 0:
        err = report["error"]
        click.echo(f"error ({err['type']}): {err['message']}", err=True)
        for diag in err.get("diagnostics", []):
            click.echo(f"  {diag}", err=True)
    sys.exit(code)


def _report_options(fn):
    fn = click.option("--out", type=click.Path(dir_okay=False), default=None,
                      help="Write the JSON report here instead of stdout.")(fn)
    fn = click.option("--no-timestamp", is_flag=True,
                      help="Omit the timestamp (byte-identical reruns).")(fn)
    return fn


@click.group()
def main():
    """Unbalanced transport on manifolds: solvers, maps, regularity."""


@main.command()
@click.option("--rho0", required=True, type=click.Path(), help="Source measure JSON.")
@click.option("--rho1", required=True, type=click.Path(), help="Target measure JSON.")
@click.option("--cost", type=click.Choice(["wfr", "quadratic"]), default="wfr",
              show_default=True)
@click.option("--delta", type=float, default=1.0, show_default=True,
              help="Cone scale of the wfr cost.")
@click.option("--entropy", type=click.Choice(["kl", "tv"]), default="kl",
              show_default=True, help="Marginal penalty (both sides).")
@click.option("--eps-start", type=float, default=1.0, show_default=True)
@click.option("--eps-final", type=float, default=1e-3, show_default=True)
@click.option("--max-iter", type=int, default=20000, show_default=True)
@click.option("--tol", type=float, default=1e-8, show_default=True)
@click.option("--strict", is_flag=True,
              help="Fail (exit 2) when the pair is not admissible.")
@_report_options
def solve(rho0, rho1, cost, delta, entropy, eps_start, eps_final, max_iter,
          tol, strict, out, no_timestamp):
    """Solve the entropy-transport problem between two measures."""
    _execute("solve", {
        "rho0": rho0, "rho1": rho1, "cost": cost, "delta": delta,
        "entropy": entropy, "eps_start": eps_start, "eps_final": eps_final,
        "max_iter": max_iter, "tol": tol, "strict": strict,
    }, 0, out, no_timestamp)


@main.command()
@click.option("--potential", required=True, type=click.Path(),
              help="Potential JSON ({\"z\": [...]}).")
@click.option("--rho0", required=True, type=click.Path(),
              help="Source grid measure JSON.")
@click.option("--rho1", required=True, type=click.Path(),
              help="Target grid measure JSON.")
@click.option("--check-ma", is_flag=True,
              help="Also report the generalized Monge-Ampere residual.")
@_report_options
def monge(potential, rho0, rho1, check_ma, out, no_timestamp):
    """Extract the transport couple of a potential and push the source."""
    _execute("monge", {
        "potential": potential, "rho0": rho0, "rho1": rho1,
        "check_ma": check_ma,
    }, 0, out, no_timestamp)


@main.command()
@click.option("--map", "map_path", required=True, type=click.Path(),
              help="Automorphism JSON ({\"phi\": [...], \"lam\": [...]}).")
@click.option("--grid", type=int, default=None,
              help="Expected grid size (checked against the file).")
@_report_options
def polar(map_path, grid, out, no_timestamp):
    """Factor a cone automorphism into transport x volume-preserving."""
    args = {"map": map_path}
    if grid is not None:
        args["grid"] = grid
    _execute("polar", args, 0, out, no_timestamp)


def _mtw_csv(result: dict):
    return (["s", "alpha", "beta", "gamma", "delta", "fourth_margin"],
            result["sweep"])


@main.command()
@click.option("--space", type=click.Choice(["sphere", "euclidean", "hyperbolic"]),
              default="sphere", show_default=True)
@click.option("--radius", type=float, default=1.0, show_default=True,
              help="Cost profile parameter (sphere only).")
@click.option("--s-max", type=float, default=None,
              help="Upper end of the sweep (defaults to the profile's range).")
@click.option("--samples", type=int, default=200, show_default=True)
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None,
              help="Also write the coefficient sweep as CSV.")
@_report_options
def mtw(space, radius, s_max, samples, csv_path, out, no_timestamp):
    """Sweep the regularity coefficients and check the sign conditions."""
    args = {"space": space, "radius": radius, "samples": samples}
    if s_max is not None:
        args["s_max"] = s_max
    _execute("mtw", args, 0, out, no_timestamp,
             csv_path=csv_path, csv_spec=_mtw_csv)


@main.command("mtw-fd")
@click.option("--space", type=click.Choice(["sphere", "euclidean", "hyperbolic"]),
              default="sphere", show_default=True)
@click.option("--radius", type=float, default=1.0, show_default=True,
              help="Cost profile parameter (sphere only).")
@click.option("--cost", type=click.Choice(["wfr", "quadratic"]), default="wfr",
              show_default=True)
@click.option("--trials", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@_report_options
def mtw_fd(space, radius, cost, trials, seed, out, no_timestamp):
    """Cross-check the coefficient decomposition against finite differences."""
    _execute("mtw-fd", {
        "space": space, "radius": radius, "cost": cost, "trials": trials,
    }, seed, out, no_timestamp)


@main.command()
@click.option("--a", "a_path", required=True, type=click.Path(),
              help="First cone point JSON ({\"base\": [...], \"r\": ...}).")
@click.option("--b", "b_path", required=True, type=click.Path(),
              help="Second cone point JSON.")
@click.option("--space", type=click.Choice(["circle", "sphere", "euclidean",
                                            "hyperbolic"]),
              default="circle", show_default=True, help="Base space kind.")
@click.option("--dim", type=int, default=1, show_default=True)
@click.option("--radius", type=float, default=1.0, show_default=True)
@_report_options
def conedist(a_path, b_path, space, dim, radius, out, no_timestamp):
    """Distance between two points of the cone over a base space."""
    _execute("conedist", {
        "a": a_path, "b": b_path, "space": space, "dim": dim, "radius": radius,
    }, 0, out, no_timestamp)


@main.command()
@click.option("--a", type=float, required=True, help="Mass of the first Dirac.")
@click.option("--b", type=float, required=True, help="Mass of the second Dirac.")
@click.option("--d", type=float, required=True, help="Ground distance between them.")
@_report_options
def twodirac(a, b, d, out, no_timestamp):
    """Closed-form transport value between two weighted Diracs."""
    _execute("twodirac", {"a": a, "b": b, "d": d}, 0, out, no_timestamp)


@main.command()
@click.argument("path", type=click.Path())
def validate(path):
    """Validate a JSON document; exits 0 iff it is well-formed."""
    diags = validate_schema(path)
    for diag in diags:
        click.echo(diag)
    if diags:
        sys.exit(1)
    click.echo(f"{path}: ok")


if __name__ == "__main__":
    main()
