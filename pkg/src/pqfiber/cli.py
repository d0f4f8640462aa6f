"""Command-line front end: eigen | solve | sweep | verify.

Exit codes: 0 success; 1 configuration or I/O error; 2 convergence failure
(or sweep convergence failures beyond the quota); 3 no solution exists at
the requested spectral parameter (an expected outcome, not a failure);
4 a verification or asymptotics check failed. Results go to stdout,
diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .config import RunConfig, load_config, resolved_ini
from .eigensolver import compute_principal_pair
from .errors import (
    ConfigError,
    DegenerateGradient,
    EmptyFeasibleSet,
    InsufficientData,
    IoFailure,
    NoConvergence,
    PqFiberError,
)
from .fibering import NoSolution, solve, verify_solution
from .functionals import (
    EnergyKernel,
    energy_gradient,
    luxemburg_norm,
    nehari_scale,
    reduced_energy,
    total_energy,
)
from .grid import GridFunction, build_grid, sample_weight
from .oracle import TinyInstance, brute_force_lambda1, brute_force_reduced_min, linear_eigen_oracle
from .sweep import _atomic_write, _fmt, check_asymptotics, emit_outputs, make_plan, run_sweep

log = logging.getLogger("pqfiber")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NOCONV = 2
EXIT_NOSOLUTION = 3
EXIT_CHECK_FAILED = 4


def _profile_csv(grid, values, column: str) -> str:
    lines = [f"r,{column}"]
    for r, v in zip(grid.nodes, values):
        lines.append(f"{_fmt(float(r))},{_fmt(float(v))}")
    return "\n".join(lines) + "\n"


def _resolve_lambda(cfg: RunConfig, lambda1: float) -> float:
    lam = cfg.get("problem", "lambda")
    ratio = cfg.get("problem", "lambda_ratio")
    if lam is not None:
        return float(lam)
    if ratio is not None:
        return float(ratio) * lambda1
    raise ConfigError("problem.lambda: required for solve (or set problem.lambda_ratio)")


def _setup(cfg: RunConfig):
    grid = cfg.grid()
    weight = cfg.weight(grid)
    pair = compute_principal_pair(
        grid,
        weight,
        cfg.get("problem", "p"),
        cfg.get("problem", "q"),
        cfg.eigen_options(),
        cfg.get("problem", "grad_reg_eps"),
    )
    return grid, weight, pair


def cmd_eigen(cfg: RunConfig) -> int:
    try:
        grid, weight, pair = _setup(cfg)
    except NoConvergence as exc:
        log.error("eigensolver did not converge: %s", exc)
        if exc.best is not None:
            print(f"lambda1 = {_fmt(exc.best.lambda1)} (not converged)")
        return EXIT_NOCONV
    out = cfg.out_dir()
    _atomic_write(os.path.join(out, "phi1.csv"), _profile_csv(grid, pair.phi1.values, "phi1"))
    print(f"lambda1 = {_fmt(pair.lambda1)}")
    print(f"rayleigh_residual = {pair.rayleigh_residual:.3e}  iterations = {pair.iterations}")
    print(f"wrote {os.path.join(out, 'phi1.csv')}")
    return EXIT_OK


def cmd_solve(cfg: RunConfig) -> int:
    try:
        grid, weight, pair = _setup(cfg)
    except NoConvergence as exc:
        log.error("eigensolver did not converge: %s", exc)
        return EXIT_NOCONV
    lam = _resolve_lambda(cfg, pair.lambda1)
    spec = cfg.spec(weight, lam)
    try:
        sol = solve(spec, pair, cfg.solve_options())
    except NoConvergence as exc:
        log.error("fibering solve did not converge: %s", exc)
        return EXIT_NOCONV
    if isinstance(sol, NoSolution):
        print(f"no nontrivial solution for lambda <= lambda1(p): lambda = {_fmt(sol.lam)}, "
              f"lambda1 = {_fmt(sol.lambda1)}")
        return EXIT_NOSOLUTION

    report = verify_solution(spec, sol)
    out = cfg.out_dir()
    _atomic_write(os.path.join(out, "solution.csv"), _profile_csv(grid, sol.u_sol.values, "u"))
    payload = {
        "lambda": lam,
        "lambda1": pair.lambda1,
        "m_energy": sol.m_energy,
        "t_scale": sol.t_scale,
        "h_value": sol.h_value,
        "q_norm": sol.t_scale,
        "kkt_residual": sol.kkt_residual,
        "weak_residual": sol.weak_residual,
        "nehari_residual": report.nehari_defect,
        "luxemburg_norm": report.luxemburg,
        "positivity_margin": report.positivity_margin,
        "interior_max": report.interior_max,
        "tail_max": report.tail_max,
        "tail_ratio": report.tail_ratio,
        "boundary_slope": report.boundary_slope,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "config": cfg.echo(),
    }
    _atomic_write(os.path.join(out, "solve.json"), json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"lambda = {_fmt(lam)}  lambda1 = {_fmt(pair.lambda1)}")
    print(f"m_energy = {_fmt(sol.m_energy)}  t_scale = {_fmt(sol.t_scale)}")
    print(f"weak_residual = {sol.weak_residual:.3e}  nehari_residual = {report.nehari_defect:.3e}")
    print(f"wrote {os.path.join(out, 'solution.csv')} and solve.json")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    try:
        grid, weight, pair = _setup(cfg)
    except NoConvergence as exc:
        log.error("eigensolver did not converge: %s", exc)
        return EXIT_NOCONV
    p = cfg.get("problem", "p")
    q = cfg.get("problem", "q")
    spec_base = cfg.spec(weight, 2.0 * pair.lambda1)
    plan = make_plan(
        pair,
        k_edge=cfg.get("sweep", "k_edge"),
        j_far=cfg.get("sweep", "j_far"),
        extend=cfg.get("sweep", "extend"),
        solver_opts=cfg.solve_options(),
        tighten_per_rung=cfg.get("sweep", "tighten_per_rung"),
    )
    workers = cfg.get("run", "workers") or None
    records = run_sweep(
        spec_base, pair, plan, warm_start=cfg.get("sweep", "warm_start"), workers=workers
    )
    failures = sum(1 for r in records if not r.converged)
    regime = "p<q" if p < q else "p>q"
    verdict = None
    exit_code = EXIT_OK
    try:
        verdict = check_asymptotics(records, regime, cfg.get("sweep", "min_range"))
    except InsufficientData as exc:
        log.error("asymptotics not evaluable: %s", exc)
        exit_code = EXIT_CHECK_FAILED

    out = cfg.out_dir()
    paths = emit_outputs(records, verdict, out, pair.lambda1, cfg.echo(), resolved_ini(cfg))
    _atomic_write(os.path.join(out, "resolved_config.ini"), resolved_ini(cfg))
    print(f"lambda1 = {_fmt(pair.lambda1)}  records = {len(records)}  non_converged = {failures}")
    if verdict is not None:
        for c in verdict.checks:
            mark = "PASS" if c.passed else "FAIL"
            if c.warning:
                mark += " (warning)"
            print(f"  {c.name}: {mark} - {c.detail}")
        if not verdict.passed:
            exit_code = EXIT_CHECK_FAILED
    for name, path in paths.items():
        print(f"wrote {path}")
    if failures > cfg.get("sweep", "max_failures"):
        log.error("non-converged records (%d) exceed quota (%d)", failures, cfg.get("sweep", "max_failures"))
        return EXIT_NOCONV
    return exit_code


# -- verify batteries ----------------------------------------------------------


def _battery_linear_oracle(cfg: RunConfig) -> tuple[bool, str]:
    grid = cfg.grid()
    alpha = max(cfg.get("weight", "alpha") or 3.0, 3.0)
    weight = sample_weight(grid, "power_decay", cfg.get("weight", "kappa"), alpha)
    pair = compute_principal_pair(grid, weight, 2.0, cfg.get("problem", "q"))
    ref = linear_eigen_oracle(grid, weight)
    rel = abs(pair.lambda1 - ref) / ref
    return rel < 1e-8, f"p=2 eigenvalue vs tridiagonal oracle: rel diff {rel:.2e} (alpha={alpha})"


def _battery_tiny_oracle(cfg: RunConfig) -> tuple[bool, str]:
    p = cfg.get("problem", "p")
    q = cfg.get("problem", "q")
    n_cells = cfg.get("verify", "tiny_cells")
    grid = build_grid(1.0, 3.0, n_cells, "uniform", cfg.get("problem", "dim"))
    weight = sample_weight(grid, "power_decay", 1.0, p + 1.0)
    spec0 = cfg.spec(weight, 1.0)
    inst0 = TinyInstance(spec0, samples_per_angle=cfg.get("verify", "samples_per_angle"))
    lam1 = brute_force_lambda1(inst0)
    spec = dataclasses.replace(spec0, lam=2.0 * lam1)
    inst = dataclasses.replace(inst0, spec=spec)
    bf = brute_force_reduced_min(inst)
    pair = compute_principal_pair(grid, weight, p, q, grad_reg_eps=spec.grad_reg_eps)
    sol = solve(spec, pair, cfg.solve_options())
    if isinstance(sol, NoSolution):
        return False, "tiny instance unexpectedly reported no solution"
    rel = abs(sol.m_energy - bf.m_bf) / abs(bf.m_bf)
    one_node = grid.n_interior == 1
    return rel < 1e-3, (
        f"tiny-instance minimum: solver {sol.m_energy:.9g} vs exhaustive {bf.m_bf:.9g}, "
        f"rel diff {rel:.2e}" + (" (single-direction exact branch)" if one_node else "")
    )


def _battery_fiber_identities(cfg: RunConfig) -> tuple[bool, str]:
    rng = np.random.default_rng(20240811)
    grid = build_grid(1.0, 10.0, 200, "uniform", cfg.get("problem", "dim"))
    p = cfg.get("problem", "p")
    q = cfg.get("problem", "q")
    weight = sample_weight(grid, "power_decay", 1.0, p + 1.0)
    spec0 = cfg.spec(weight, 1.0)
    kern = EnergyKernel(spec0)
    worst = 0.0
    for _ in range(50):
        interior = np.cumsum(rng.standard_normal(grid.n_interior))
        interior *= np.linspace(1.0, 0.0, grid.n_interior)
        v = GridFunction.from_interior(grid, interior)
        quot = float(kern.power_energy(v.values, p) / kern.mass(v.values))
        spec = dataclasses.replace(spec0, lam=2.0 * quot)
        t = nehari_scale(spec, v)
        u = GridFunction(grid, t * v.values)
        m = reduced_energy(spec, v)
        worst = max(worst, abs(total_energy(spec, u) - m) / abs(m))
        c = float(rng.uniform(0.5, 7.0))
        worst = max(worst, abs(reduced_energy(spec, GridFunction(grid, c * v.values)) - m) / abs(m))
    return worst < 1e-12, f"fiber identity and 0-homogeneity: worst rel defect {worst:.2e}"


def _battery_gradient(cfg: RunConfig) -> tuple[bool, str]:
    rng = np.random.default_rng(7)
    grid = build_grid(1.0, 8.0, 60, "uniform", cfg.get("problem", "dim"))
    p = cfg.get("problem", "p")
    weight = sample_weight(grid, "power_decay", 1.0, p + 1.0)
    spec = cfg.spec(weight, 2.0)
    # plateau profile: exercises flat cells, where sub-quadratic exponents
    # need the gradient regularization
    interior = np.minimum(np.linspace(0.0, 3.0, grid.n_interior), 1.0)
    interior[grid.n_interior // 2 :] = np.linspace(1.0, 0.0, grid.n_interior - grid.n_interior // 2)
    u_plateau = GridFunction.from_interior(grid, interior)
    energy_gradient(spec, u_plateau)  # raises DegenerateGradient when eps=0 and min(p,q)<2

    u = GridFunction.from_interior(grid, 1.0 + np.sin(np.linspace(0, 3, grid.n_interior)))
    phi = GridFunction.from_interior(
        grid,
        5.0 * np.sin(np.linspace(0, 40, grid.n_interior))
        + 1.5 * rng.standard_normal(grid.n_interior),
    )
    dd = float(np.dot(energy_gradient(spec, u).values, phi.values))
    kern = EnergyKernel(spec, dtype=np.longdouble)
    uv = u.values.astype(np.longdouble)
    pv = phi.values.astype(np.longdouble)
    errs = []
    for h in (1e-4, 1e-5, 1e-6):
        hl = np.longdouble(h)
        fd = float((kern.total(uv + hl * pv) - kern.total(uv - hl * pv)) / (2.0 * hl))
        errs.append(abs(fd - dd))
    order = float(np.log10(errs[0] / errs[2]) / 2.0)
    return order >= 1.9, f"directional derivative vs central differences: observed order {order:.2f}"


def _battery_norms(cfg: RunConfig) -> tuple[bool, str]:
    rng = np.random.default_rng(99)
    grid = build_grid(1.0, 10.0, 150, "uniform", cfg.get("problem", "dim"))
    p = cfg.get("problem", "p")
    q = cfg.get("problem", "q")
    weight = sample_weight(grid, "power_decay", 1.0, p + 1.0)
    spec = cfg.spec(weight, 1.0)
    kern = EnergyKernel(spec)
    worst = -np.inf
    for _ in range(50):
        v = GridFunction.from_interior(grid, rng.standard_normal(grid.n_interior))
        nx = luxemburg_norm(spec, v)
        np_norm = float(kern.power_energy(v.values, p)) ** (1.0 / p)
        nq_norm = float(kern.power_energy(v.values, q)) ** (1.0 / q)
        worst = max(worst, np_norm - p ** (1.0 / p) * nx, nq_norm - q ** (1.0 / q) * nx)
    return worst < 1e-10, f"gauge-norm bounds: worst slack violation {worst:.2e}"


def _battery_nonexistence(cfg: RunConfig) -> tuple[bool, str]:
    rng = np.random.default_rng(5)
    grid = build_grid(1.0, 10.0, 150, "uniform", cfg.get("problem", "dim"))
    p = cfg.get("problem", "p")
    weight = sample_weight(grid, "power_decay", 1.0, p + 1.0)
    pair = compute_principal_pair(grid, weight, p, cfg.get("problem", "q"))
    spec = cfg.spec(weight, pair.lambda1)
    kern = EnergyKernel(spec)
    worst = -np.inf
    for _ in range(200):
        v = GridFunction.from_interior(grid, rng.standard_normal(grid.n_interior))
        gap = float(kern.gap(v.values))
        pe = float(kern.power_energy(v.values, p))
        worst = max(worst, -gap / pe)
    return worst <= 1e-10, f"gap nonnegative at the threshold: worst -gap/p_energy = {worst:.2e}"


def cmd_verify(cfg: RunConfig) -> int:
    batteries = [
        ("linear_eigen_oracle", _battery_linear_oracle),
        ("tiny_instance_oracle", _battery_tiny_oracle),
        ("fiber_identities", _battery_fiber_identities),
        ("gradient_check", _battery_gradient),
        ("norm_inequalities", _battery_norms),
        ("nonexistence_sign", _battery_nonexistence),
    ]
    results = []
    for name, battery in batteries:
        try:
            passed, detail = battery(cfg)
        except (DegenerateGradient, EmptyFeasibleSet, NoConvergence, PqFiberError) as exc:
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append({"name": name, "passed": passed, "detail": detail})
        print(f"  {name}: {'PASS' if passed else 'FAIL'} - {detail}")
    all_passed = all(r["passed"] for r in results)
    out = cfg.out_dir()
    payload = {"all_passed": all_passed, "checks": results, "config": cfg.echo()}
    _atomic_write(os.path.join(out, "verify.json"), json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"wrote {os.path.join(out, 'verify.json')}")
    return EXIT_OK if all_passed else EXIT_CHECK_FAILED


# -- argument handling -----------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pqfiber",
        description="Weighted (p,q)-Laplacian eigenproblem solver on truncated radial exterior domains",
    )
    parser.add_argument("--version", action="version", version=f"pqfiber {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("eigen", "compute the principal eigenvalue and eigenfunction"),
        ("solve", "solve at one spectral parameter and reconstruct the solution"),
        ("sweep", "run the bifurcation sweep and the asymptotics verdict"),
        ("verify", "run the oracle and invariant batteries"),
    ):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", help="path to a sectioned key-value config file")
        sp.add_argument("--lambda", dest="lam", type=float, help="spectral parameter (absolute)")
        sp.add_argument(
            "--lambda-ratio", dest="lam_ratio", type=float, help="spectral parameter as a multiple of lambda1"
        )
        sp.add_argument("--p", type=float, help="first exponent")
        sp.add_argument("--q", type=float, help="second exponent")
        sp.add_argument("--dim", type=int, help="spatial dimension N")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--workers", type=int, help="worker count for cold-start sweeps (0 = auto)")
        sp.add_argument(
            "--warm-start", choices=("true", "false"), help="warm-start successive sweep rungs"
        )
        sp.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
            help="override any config value (repeatable)",
        )
        sp.add_argument("--verbose", action="store_true", help="verbose diagnostics on stderr")
    return parser


def _overrides_from_args(args: argparse.Namespace) -> dict[str, str]:
    overrides: dict[str, str] = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        dotted, value = item.split("=", 1)
        overrides[dotted.strip()] = value.strip()
    if args.lam is not None:
        overrides["problem.lambda"] = repr(args.lam)
    if args.lam_ratio is not None:
        overrides["problem.lambda_ratio"] = repr(args.lam_ratio)
    if args.p is not None:
        overrides["problem.p"] = repr(args.p)
    if args.q is not None:
        overrides["problem.q"] = repr(args.q)
    if args.dim is not None:
        overrides["problem.dim"] = repr(args.dim)
    if args.out is not None:
        overrides["output.dir"] = args.out
    if args.workers is not None:
        overrides["run.workers"] = repr(args.workers)
    if args.warm_start is not None:
        overrides["sweep.warm_start"] = args.warm_start
    return overrides


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="[%(levelname)s] %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config, _overrides_from_args(args))
    except (ConfigError, IoFailure) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    command = {"eigen": cmd_eigen, "solve": cmd_solve, "sweep": cmd_sweep, "verify": cmd_verify}[
        args.command
    ]
    try:
        return command(cfg)
    except (ConfigError, IoFailure) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except PqFiberError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
