"""Spectral-parameter sweeps and the asymptotic verdict.

A sweep walks two ladders above the principal eigenvalue: a near-edge ladder
lam = lambda1 * (1 + 10^-k) probing the bifurcation edge, and a geometric
far ladder lam = lambda1 * 2^j probing the large-parameter limit. Divergence
and vanishing claims are tested as strict monotone trends along the finite
ladders plus a minimum dynamic range between the first and last rung; the
limits themselves are not computable. Each ladder also gets one extension
rung so the boundedness of the weighted mass can be checked for drift.
"""

from __future__ import annotations

import csv
import io
import json
import os
import platform
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .eigensolver import PrincipalPair
from .errors import InsufficientData, IoFailure, NoConvergence
from .fibering import FiberSolution, SolveOptions, solve
from .functionals import EnergyKernel, ProblemSpec, q_energy, reduced_energy_from_parts
from .grid import GridFunction

__all__ = [
    "SweepRecord",
    "SweepPlan",
    "Verdict",
    "CheckResult",
    "make_plan",
    "run_sweep",
    "check_asymptotics",
    "emit_outputs",
    "CSV_COLUMNS",
]

CSV_COLUMNS = ("lambda", "j_energy", "q_norm", "h_value", "k_mass", "weak_residual", "converged")


@dataclass(frozen=True)
class SweepRecord:
    """One row of the bifurcation data at a single spectral parameter.

    The two identities q_norm = |h_value|^(1/(q-p)) and
    j_energy = (1/q - 1/p) |h_value|^(q/(q-p)) hold on every record,
    converged or not. cert_bound is the fiber value of the principal
    eigenfunction at the same parameter, an upper bound for j_energy.
    """

    lam: float
    j_energy: float
    q_norm: float
    h_value: float
    k_mass: float
    weak_residual: float
    converged: bool
    ladder: str = "far_tail"
    is_extension: bool = False
    kkt_residual: float = float("nan")
    cert_bound: float = float("nan")
    iterations: int = 0


@dataclass(frozen=True)
class SweepPlan:
    """Ladder of spectral parameters, all strictly above lambda1_ref."""

    lambda1_ref: float
    near_edge: tuple[float, ...]
    far_tail: tuple[float, ...]
    near_edge_ext: tuple[float, ...] = ()
    far_tail_ext: tuple[float, ...] = ()
    k_edge: int = 6
    j_far: int = 15
    solver_opts: SolveOptions = field(default_factory=SolveOptions)
    tighten_per_rung: bool = True

    def __post_init__(self):
        for lam in (*self.near_edge, *self.far_tail, *self.near_edge_ext, *self.far_tail_ext):
            if lam <= self.lambda1_ref:
                raise ValueError(f"plan contains lam={lam} <= lambda1={self.lambda1_ref}")


def make_plan(
    pair: PrincipalPair,
    k_edge: int = 6,
    j_far: int = 15,
    extend: bool = True,
    solver_opts: SolveOptions | None = None,
    tighten_per_rung: bool = True,
) -> SweepPlan:
    lam1 = pair.lambda1
    near = tuple(lam1 * (1.0 + 10.0**-k) for k in range(1, k_edge + 1))
    far = tuple(lam1 * 2.0**j for j in range(1, j_far + 1))
    near_ext = (lam1 * (1.0 + 10.0 ** -(k_edge + 1)),) if extend else ()
    far_ext = (lam1 * 2.0 ** (j_far + 1),) if extend else ()
    return SweepPlan(
        lambda1_ref=lam1,
        near_edge=near,
        far_tail=far,
        near_edge_ext=near_ext,
        far_tail_ext=far_ext,
        k_edge=k_edge,
        j_far=j_far,
        solver_opts=solver_opts or SolveOptions(),
        tighten_per_rung=tighten_per_rung,
    )


def _near_edge_rung(plan: SweepPlan, lam: float) -> int:
    """Rung index k of a near-edge parameter (1-based, deeper is larger)."""
    rel = lam / plan.lambda1_ref - 1.0
    return max(1, int(round(-np.log10(max(rel, 1e-300)))))


def _rung_opts(plan: SweepPlan, lam: float, ladder: str, init: GridFunction | None) -> SolveOptions:
    opts = plan.solver_opts
    tol_energy = opts.tol_energy
    if plan.tighten_per_rung and ladder == "near_edge":
        k = _near_edge_rung(plan, lam)
        tol_energy = max(tol_energy * 10.0 ** -(k - 1), 1e-15)
    return replace(opts, tol_energy=tol_energy, init=init)


def _solve_one(spec: ProblemSpec, pair: PrincipalPair, opts: SolveOptions):
    """Single fibering solve; non-convergence yields the flagged best iterate."""
    try:
        return solve(spec, pair, opts)
    except NoConvergence as exc:
        return exc.best


def _certificate_bound(spec: ProblemSpec, pair: PrincipalPair, phi_mass: float) -> float:
    gap_phi = (pair.lambda1 - spec.lam) * phi_mass
    return float(reduced_energy_from_parts(spec.p, spec.q, gap_phi, 1.0))


def _record_from_solution(
    spec: ProblemSpec, sol: FiberSolution, ladder: str, is_ext: bool, cert: float
) -> SweepRecord:
    kern = EnergyKernel(spec)
    return SweepRecord(
        lam=spec.lam,
        j_energy=sol.m_energy,
        q_norm=float(q_energy(spec, sol.u_sol)) ** (1.0 / spec.q),
        h_value=sol.h_value,
        k_mass=float(kern.mass(sol.v_min.values)),
        weak_residual=sol.weak_residual,
        converged=sol.converged,
        ladder=ladder,
        is_extension=is_ext,
        kkt_residual=sol.kkt_residual,
        cert_bound=cert,
        iterations=sol.iterations,
    )


def _sweep_task(args):
    spec, pair, opts, ladder, is_ext, phi_mass = args
    sol = _solve_one(spec, pair, opts)
    cert = _certificate_bound(spec, pair, phi_mass)
    return _record_from_solution(spec, sol, ladder, is_ext, cert)


def run_sweep(
    spec_base: ProblemSpec,
    pair: PrincipalPair,
    plan: SweepPlan,
    warm_start: bool = True,
    workers: int | None = None,
) -> list[SweepRecord]:
    """Solve every rung of the plan and return records ordered by parameter.

    With warm starts the ladder is walked in ascending parameter order (the
    negative gap survives any parameter increase, so the previous minimizer
    stays feasible; feasibility is rechecked anyway with fallback to the
    principal eigenfunction). Every warm result is compared against the
    eigenfunction's fiber value; if it fails that certificate the rung is
    re-solved cold and the better minimizer kept. Cold sweeps may be run
    across processes; assembly order is deterministic either way.
    """
    kern = EnergyKernel(spec_base)
    phi_mass = float(kern.mass(pair.phi1.values))

    tagged = (
        [(lam, "near_edge", False) for lam in plan.near_edge]
        + [(lam, "near_edge", True) for lam in plan.near_edge_ext]
        + [(lam, "far_tail", False) for lam in plan.far_tail]
        + [(lam, "far_tail", True) for lam in plan.far_tail_ext]
    )
    tagged.sort(key=lambda t: t[0])

    records: list[SweepRecord] = []
    if not warm_start and workers != 1:
        tasks = [
            (replace(spec_base, lam=float(lam)), pair, _rung_opts(plan, lam, ladder, None), ladder, ext, phi_mass)
            for lam, ladder, ext in tagged
        ]
        max_workers = workers or os.cpu_count() or 1
        if max_workers > 1:
            with ProcessPoolExecutor(max_workers=max_workers) as pool:
                records = list(pool.map(_sweep_task, tasks))
        else:
            records = [_sweep_task(t) for t in tasks]
        return records

    init: GridFunction | None = None
    for lam, ladder, ext in tagged:
        spec = replace(spec_base, lam=float(lam))
        opts = _rung_opts(plan, lam, ladder, init if warm_start else None)
        sol = _solve_one(spec, pair, opts)
        cert = _certificate_bound(spec, pair, phi_mass)
        if warm_start and init is not None:
            # a warm start must never lose the eigenfunction certificate or
            # the convergence the cold start achieves; retry cold if it does
            if sol.m_energy > cert + 1e-10 * abs(cert) or not sol.converged:
                cold = _solve_one(spec, pair, replace(opts, init=None))
                if cold.converged and not sol.converged or cold.m_energy < sol.m_energy:
                    sol = cold
        records.append(_record_from_solution(spec, sol, ladder, ext, cert))
        init = sol.v_min
    return records


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    warning: bool = False


@dataclass(frozen=True)
class Verdict:
    regime: str
    checks: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        return {
            "regime": self.regime,
            "passed": self.passed,
            "checks": [
                {"name": c.name, "passed": c.passed, "warning": c.warning, "detail": c.detail}
                for c in self.checks
            ],
        }


def _trend(
    records: list[SweepRecord],
    value,
    direction: int,
    label: str,
    min_range: float,
    allow_warning: bool,
) -> tuple[bool, bool, str]:
    """Strict monotonicity along ascending parameter plus dynamic range.

    Returns (passed, warning, detail). For the energy trend only, a broken
    interior step with correctly ordered endpoints and full range is
    downgraded to a warning: the limit claims constrain the endpoints, and
    strict energy monotonicity is a stronger finite surrogate than what the
    asymptotics assert. The norm trends stay strict.
    """
    vals = [value(r) for r in records]
    lams = [r.lam for r in records]
    bad = None
    for a, b, la, lb in zip(vals, vals[1:], lams, lams[1:]):
        if (b - a) * direction <= 0.0:
            bad = (la, lb)
            break
    lo, hi = min(vals), max(vals)
    rng = hi / lo if lo > 0.0 else float("inf")
    range_ok = rng >= min_range
    endpoints_ok = (vals[-1] - vals[0]) * direction > 0.0
    if bad is None and range_ok:
        return True, False, f"{label}: strictly monotone, range {rng:.3g}"
    if bad is not None and allow_warning and endpoints_ok and range_ok:
        return True, True, (
            f"{label}: interior monotonicity break between lam={bad[0]:.6g} and lam={bad[1]:.6g}, "
            f"endpoints ordered with range {rng:.3g} (downgraded to warning)"
        )
    if bad is not None:
        return False, False, f"{label}: trend violated between lam={bad[0]:.6g} and lam={bad[1]:.6g}"
    return False, False, f"{label}: dynamic range {rng:.3g} below {min_range:g}"


def check_asymptotics(
    records: list[SweepRecord], regime: str, min_range: float = 1e2
) -> Verdict:
    """Evaluate the asymptotic claims of the bifurcation diagrams.

    regime is "p<q" or "p>q". Extension rungs participate only in the
    mass-drift stability check; the base ladders need at least four
    converged records each.
    """
    if regime not in ("p<q", "p>q"):
        raise ValueError(f"regime must be 'p<q' or 'p>q', got {regime!r}")
    near = sorted((r for r in records if r.ladder == "near_edge" and not r.is_extension), key=lambda r: r.lam)
    far = sorted((r for r in records if r.ladder == "far_tail" and not r.is_extension), key=lambda r: r.lam)
    if sum(r.converged for r in near) < 4 or sum(r.converged for r in far) < 4:
        raise InsufficientData(
            f"need >= 4 converged records per ladder, got {sum(r.converged for r in near)} near-edge "
            f"and {sum(r.converged for r in far)} far-tail"
        )

    checks: list[CheckResult] = []
    # (i) energy sign
    want_neg = regime == "p<q"
    offending = [r.lam for r in records if (r.j_energy >= 0.0) == want_neg]
    checks.append(
        CheckResult(
            "energy_sign",
            not offending,
            "all j_energy " + ("< 0" if want_neg else "> 0")
            if not offending
            else f"wrong sign at lam={offending[:3]}",
        )
    )

    # (ii) trends with dynamic range; direction +1 means growing with lam
    direction = 1 if regime == "p<q" else -1
    trend_results = []
    for recs, lname in ((far, "far"), (near, "near-edge")):
        for val, vname, soft in (
            (lambda r: abs(r.j_energy), "|j_energy|", True),
            (lambda r: r.q_norm, "q_norm", False),
        ):
            trend_results.append(_trend(recs, val, direction, f"{lname} {vname}", min_range, soft))
    passed = all(t[0] for t in trend_results)
    warning = any(t[1] for t in trend_results)
    checks.append(CheckResult("trends", passed, "; ".join(t[2] for t in trend_results), warning))

    # (iii) gap vanishes from below along the near-edge ladder
    all_near = sorted((r for r in records if r.ladder == "near_edge"), key=lambda r: r.lam)
    neg_ok = all(r.h_value < 0.0 for r in all_near)
    mono_ok = all(abs(a.h_value) < abs(b.h_value) for a, b in zip(all_near, all_near[1:]))
    checks.append(
        CheckResult(
            "gap_vanishes",
            neg_ok and mono_ok,
            "h_value < 0 with |h| strictly decreasing toward the edge"
            if neg_ok and mono_ok
            else f"h sign ok: {neg_ok}, |h| monotone: {mono_ok}",
        )
    )

    # (iv) weighted mass bounded, stable under one-rung ladder extension
    base_max = max(r.k_mass for r in records if not r.is_extension)
    ext_records = [r for r in records if r.is_extension]
    if ext_records:
        full_max = max(base_max, max(r.k_mass for r in ext_records))
        drift = (full_max - base_max) / base_max
        checks.append(
            CheckResult(
                "mass_bounded",
                drift < 0.10,
                f"max k_mass {base_max:.6g}, drift {drift:.2%} under extension",
            )
        )
    else:
        checks.append(
            CheckResult(
                "mass_bounded",
                False,
                "no extension rungs present; drift stability not evaluable",
            )
        )

    # (v) eigenfunction fiber-value certificate at every record
    viol = [
        r.lam
        for r in records
        if not (r.j_energy <= r.cert_bound + 1e-10 * abs(r.cert_bound) + 1e-300)
    ]
    checks.append(
        CheckResult(
            "energy_certificate",
            not viol,
            "j_energy below the eigenfunction fiber value everywhere"
            if not viol
            else f"certificate violated at lam={viol[:3]}",
        )
    )
    return Verdict(regime=regime, checks=tuple(checks))


# -- output emission -----------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _atomic_write(path: str, data: str | bytes) -> None:
    mode = "wb" if isinstance(data, bytes) else "w"
    d = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(d, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
        try:
            with os.fdopen(fd, mode) as f:
                f.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def records_to_csv(records: list[SweepRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in sorted(records, key=lambda r: r.lam):
        writer.writerow(
            [
                _fmt(r.lam),
                _fmt(r.j_energy),
                _fmt(r.q_norm),
                _fmt(r.h_value),
                _fmt(r.k_mass),
                _fmt(r.weak_residual),
                "true" if r.converged else "false",
            ]
        )
    return buf.getvalue()


def parse_csv(text: str) -> list[dict]:
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        parsed = {k: float(v) for k, v in row.items() if k != "converged"}
        parsed["converged"] = row["converged"] == "true"
        rows.append(parsed)
    return rows


def _versions() -> dict:
    import matplotlib

    from . import __version__

    return {
        "pqfiber": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": __import__("scipy").__version__,
        "matplotlib": matplotlib.__version__,
    }


def record_as_dict(r: SweepRecord) -> dict:
    return {
        "lambda": r.lam,
        "j_energy": r.j_energy,
        "q_norm": r.q_norm,
        "h_value": r.h_value,
        "k_mass": r.k_mass,
        "weak_residual": r.weak_residual,
        "converged": r.converged,
        "ladder": r.ladder,
        "is_extension": r.is_extension,
        "kkt_residual": r.kkt_residual,
        "cert_bound": r.cert_bound,
        "iterations": r.iterations,
    }


def emit_outputs(
    records: list[SweepRecord],
    verdict: Verdict | None,
    out_dir: str,
    lambda1: float,
    config_echo: dict | None = None,
    config_ini: str | None = None,
) -> dict[str, str]:
    """Write CSV, JSON and the two figures; returns the paths written.

    All numeric serialization uses 17 significant digits so a re-parse
    reproduces the records bit-exactly; writes are atomic.
    """
    from .plots import render_sweep_figures

    ordered = sorted(records, key=lambda r: r.lam)
    paths = {
        "csv": os.path.join(out_dir, "sweep.csv"),
        "json": os.path.join(out_dir, "sweep.json"),
        "energy_svg": os.path.join(out_dir, "energy_vs_lambda.svg"),
        "qnorm_svg": os.path.join(out_dir, "qnorm_vs_lambda.svg"),
    }
    _atomic_write(paths["csv"], records_to_csv(ordered))
    payload = {
        "lambda1": lambda1,
        "records": [record_as_dict(r) for r in ordered],
        "verdict": verdict.as_dict() if verdict is not None else None,
        "config": config_echo,
        "config_ini": config_ini,
        "versions": _versions(),
    }
    _atomic_write(paths["json"], json.dumps(payload, indent=2, sort_keys=True) + "\n")
    svg_energy, svg_qnorm = render_sweep_figures(ordered, lambda1)
    _atomic_write(paths["energy_svg"], svg_energy)
    _atomic_write(paths["qnorm_svg"], svg_qnorm)
    return paths
