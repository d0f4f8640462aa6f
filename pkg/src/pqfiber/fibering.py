"""Minimization of the reduced energy over the unit constraint sphere.

The feasible set is the negative-gap part of {q-energy = 1}. On it the
reduced energy is a strictly monotone function of the 0-homogeneous
normalized gap

    F(v) = gap(v) / qenergy(v)**(p/q),

in both exponent orderings (smaller F means larger |gap|, means smaller
reduced energy), so the solver descends F: it is scale-free, stays O(1)
where the reduced energy degenerates, and its constrained critical points
are exactly the reduced-energy ones. Because F is 0-homogeneous and even,
the constraint is handled for free: any trial point can be rescaled onto
the sphere and replaced by its absolute value without changing (rescale) or
increasing (absolute value) the objective. One descent step reads

    d     = null-space Newton step of (gap Hessian - mu * constraint Hessian)
            with multiplier estimate mu = p * gap / (q * qenergy), Levenberg
            damping toward an SPD metric, and Armijo backtracking under the
            negative-gap test
    trial = | v + alpha * d |  rescaled to unit maximum

(iterates are held at unit-max scaling, where the float algebra of the
Newton system is healthiest; the unit q-energy sphere is restored when the
solution is packaged, and the stationarity residual is reported at that
scaling).

Near a minimizer the objective flattens below one float64 ulp and value
comparisons stop certifying descent while a genuine gradient remains; a
second phase then accepts steps on stationarity-residual decrease alone,
escalating to 80-bit arithmetic when the float64 rounding floor sits above
the target tolerance (which happens close to the spectral threshold, where
the gap vanishes).

Starting from the principal eigenfunction guarantees feasibility for every
parameter above the threshold and makes its fiber value an energy
certificate that every accepted iterate improves on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import solve_tridiag
from .eigensolver import PrincipalPair
from .errors import LeftFeasibleCone, NoConvergence
from .functionals import (
    EnergyKernel,
    ProblemSpec,
    luxemburg_norm,
    nehari_residual,
    reduced_energy_from_parts,
)
from .grid import GridFunction

__all__ = ["FiberSolution", "NoSolution", "SolveOptions", "SolutionReport", "solve", "verify_solution"]

_RELATIVE_THRESHOLD_GUARD = 1e-12

# Stall acceptance margin over the kkt noise-floor estimate. The estimate
# bounds the rounding noise of one gradient assembly; the iterate itself
# carries noise accumulated over renormalizations and subtractions, observed
# up to a few hundred times the single-assembly level near the spectral
# threshold, where the gap sits within a few ulps of the energy cancellation.
_FLOOR_MARGIN = 1024.0


@dataclass(frozen=True)
class SolveOptions:
    tol_energy: float = 1e-12
    tol_kkt: float = 1e-8
    max_iter: int = 100_000
    init: GridFunction | None = None
    extended_polish: bool = True


@dataclass(frozen=True)
class NoSolution:
    """Expected outcome at or below the spectral threshold: the energy has no
    nonzero critical point there, so nothing is solved."""

    lam: float
    lambda1: float
    reason: str


@dataclass(frozen=True)
class FiberSolution:
    """Constrained minimizer with its reconstructed solution and diagnostics.

    v_min has unit q-energy, a negative gap and nonnegative nodal values;
    u_sol = t_scale * v_min. kkt_residual is the norm of the tangential
    projection of the reduced-energy gradient divided by |m_energy|, at the
    unit-sphere scaling; weak_residual is the sup over nodal test directions
    of the full energy derivative at u_sol, normalized by the absolute-term
    magnitude of the gradient assembly and measured in 80-bit arithmetic.
    """

    v_min: GridFunction
    t_scale: float
    u_sol: GridFunction
    m_energy: float
    h_value: float
    kkt_residual: float
    weak_residual: float
    iterations: int
    converged: bool


class _SphereProblem:
    """Normalized-gap objective on raw arrays at one dtype."""

    def __init__(self, spec: ProblemSpec, dtype=np.float64):
        self.kern = EnergyKernel(spec, dtype=dtype)
        self.p = spec.p
        self.q = spec.q
        self.a_abs = abs(spec.q / (spec.q - spec.p))
        self.dtype = dtype
        self.eps_dt = float(np.finfo(dtype).eps)

    def parts(self, vals):
        return self.kern.gap(vals), self.kern.qenergy(vals)

    def objective(self, gap, qe):
        return gap / qe ** (self.p / self.q)

    def reduced(self, gap, qe):
        return reduced_energy_from_parts(self.p, self.q, gap, qe)

    def normalize(self, vals):
        """Rescale to unit maximum: the objective is 0-homogeneous, so any
        sphere radius is equivalent, and unit-max keeps the nodal values at
        O(1) where the float algebra of the Newton system is healthy (the
        unit-q-energy scaling can push them to 1e-3 and quartic energies to
        1e-10 on heavy-weight grids). The reported quantities are converted
        to the unit-sphere scaling at packaging time."""
        out = vals / np.max(np.abs(vals))
        out[0] = 0.0
        out[-1] = 0.0
        return out

    def radius(self, qe) -> float:
        """q-energy radius; multiplies tangential norms measured at the
        current scaling into their unit-sphere values."""
        return float(qe) ** (1.0 / self.q)

    def tangent_gradient(self, vals):
        """(gap gradient, constraint gradient, tangential projection of the
        gap gradient); on the unit sphere the tangential parts of the gap and
        of the normalized gap coincide."""
        gh = self.kern.gap_gradient(vals)
        gg = self.kern.qenergy_gradient(vals)
        tang = gh - (np.dot(gh, gg) / np.dot(gg, gg)) * gg
        tang[0] = 0.0
        tang[-1] = 0.0
        return gh, gg, tang

    def kkt(self, tang, gap, qe) -> float:
        """Tangential reduced-energy gradient norm over |reduced energy|,
        expressed at the unit-sphere scaling."""
        return self.a_abs * self.radius(qe) * float(np.linalg.norm(tang)) / abs(float(gap))

    def kkt_floor(self, vals, gh, gg, gap, qe) -> float:
        """Rounding-noise level of the kkt residual, from absolute-value
        assembled gradient magnitudes."""
        sh = float(np.linalg.norm(self.kern.gap_gradient_scale(vals)))
        sg = float(np.linalg.norm(self.kern.qenergy_gradient_scale(vals)))
        proj = float(np.linalg.norm(gh)) / float(np.linalg.norm(gg))
        return self.a_abs * self.radius(qe) * self.eps_dt * (sh + proj * sg) / abs(float(gap))

    def _newton_cells(self, vals, gap, qe):
        """Stiffness-type and mass-type cell coefficients of the constrained
        Hessian (gap Hessian minus multiplier times constraint Hessian)."""
        kern = self.kern
        p, q = self.p, self.q
        g = kern.gradient(vals)
        e2 = self.dtype(max(kern.eps, 1e-9) ** 2)
        gg2 = g * g + e2
        mu = p * gap / (q * qe)  # multiplier estimate, negative on the feasible cone
        stiff = kern.w * (
            p * (p - 1.0) * gg2 ** ((p - 2.0) / 2.0)
            - mu * q * (q - 1.0) * gg2 ** ((q - 2.0) / 2.0)
        )
        stiff /= kern.dr**2
        m = kern.mid_abs(vals)
        m = np.maximum(m, self.dtype(1e-12) * (float(np.max(m)) if m.size else 0.0))
        massc = -kern.lam * 0.25 * p * (p - 1.0) * kern.wk * m ** (p - 2.0)
        return stiff, massc

    def _metric_cells(self, vals):
        """SPD stiffness-type cells from both gradient energies; the damping
        metric of the Levenberg-style step."""
        kern = self.kern
        p, q = self.p, self.q
        g = kern.gradient(vals)
        e2 = self.dtype(max(kern.eps, 1e-9) ** 2)
        gg2 = g * g + e2
        c = kern.w * (
            p * (p - 1.0) * gg2 ** ((p - 2.0) / 2.0) + q * (q - 1.0) * gg2 ** ((q - 2.0) / 2.0)
        )
        c /= kern.dr**2
        return np.maximum(c, self.dtype(1e-14 * float(np.max(c))))

    def direction(self, vals, gh, gg, tang, gap, qe, tau: float):
        """Damped null-space Newton step.

        Solves with the constrained Hessian plus tau times an SPD metric;
        large tau recovers a well-scaled gradient step (needed across the
        nearly-flat approach region when the smaller exponent rules the
        constraint), small tau gives Newton contraction near the minimizer.
        Falls back to the pure metric step, then to the raw tangent, whenever
        the damped system is unusable or fails the descent test.
        """
        stiff, massc = self._newton_cells(vals, gap, qe)
        metric = self._metric_cells(vals)
        damped = stiff + self.dtype(tau) * metric
        diag = (damped[:-1] + damped[1:]) + (massc[:-1] + massc[1:])
        off = -damped[1:-1] + massc[1:-1]
        d = np.zeros_like(vals)
        try:
            y1 = solve_tridiag(diag, off, tang[1:-1])
            y2 = solve_tridiag(diag, off, gg[1:-1])
            denom = float(np.dot(gg[1:-1], y2))
            if denom != 0.0 and np.all(np.isfinite(y1)) and np.all(np.isfinite(y2)):
                step = y1 - (float(np.dot(gg[1:-1], y1)) / denom) * y2
                d[1:-1] = -step
                d -= (np.dot(d, gg) / np.dot(gg, gg)) * gg
                d[0] = 0.0
                d[-1] = 0.0
                if float(np.dot(tang, d)) < 0.0 and np.all(np.isfinite(d)):
                    return d
        except (ZeroDivisionError, FloatingPointError):
            pass
        diag = metric[:-1] + metric[1:]
        off = -metric[1:-1]
        d[:] = 0.0
        d[1:-1] = -solve_tridiag(diag, off, tang[1:-1])
        d -= (np.dot(d, gg) / np.dot(gg, gg)) * gg
        d[0] = 0.0
        d[-1] = 0.0
        if not (float(np.dot(tang, d)) < 0.0 and np.all(np.isfinite(d))):
            d = -tang
        return d


def _minimize(prob: _SphereProblem, vals, opts: SolveOptions, budget: int):
    """Armijo descent then residual polish; returns (vals, kkt, iters, floored)."""
    dt = prob.dtype
    vals = prob.normalize(np.abs(np.asarray(vals, dtype=dt)))
    gap, qe = prob.parts(vals)
    if not gap < 0.0:
        raise LeftFeasibleCone(f"starting profile has nonnegative gap {float(gap)}")
    obj = prob.objective(gap, qe)

    iterations = 0
    alpha_prev = 1.0
    tau = 1e-3
    kkt = np.inf
    polish = False
    floored = False
    best = (vals.copy(), gap, qe, np.inf)
    patience = 8

    while iterations < budget:
        gh, gg, tang = prob.tangent_gradient(vals)
        kkt = prob.kkt(tang, gap, qe)
        if kkt < best[3]:
            best = (vals.copy(), gap, qe, kkt)
        if kkt < opts.tol_kkt:
            break
        iterations += 1
        d = prob.direction(vals, gh, gg, tang, gap, qe, tau)
        # tangential gap gradient = qe^(p/q) times the objective gradient
        slope = float(np.dot(tang, d)) / float(qe) ** (prob.p / prob.q)

        if not polish:
            alpha = min(1.0, 2.0 * alpha_prev)
            accepted = False
            for _ in range(60):
                trial = vals + dt(alpha) * d
                t_gap, t_qe = prob.parts(trial)
                if t_gap < 0.0:
                    t_obj = prob.objective(t_gap, t_qe)
                    if t_obj <= obj + dt(1e-4 * alpha) * slope:
                        accepted = True
                        break
                alpha *= 0.5
            if accepted:
                # Levenberg-style damping update: full steps relax toward
                # Newton, clipped steps mean the local model overreached
                if alpha >= 0.99:
                    tau = max(tau / 3.0, 0.0)
                elif alpha < 0.25:
                    tau = min(max(tau, 1e-3) * 8.0, 1e8)
                alpha_prev = alpha
                vals = prob.normalize(np.abs(trial))
                gap, qe = prob.parts(vals)
                obj_new = prob.objective(gap, qe)
                stalled = prob.a_abs * abs(float(obj_new - obj)) <= opts.tol_energy * abs(float(obj))
                obj = obj_new
                if not stalled:
                    continue
            else:
                tau = min(max(tau, 1e-3) * 8.0, 1e8)
            # value comparisons exhausted: switch to residual polish
            polish = True

        cand = None
        alpha = 1.0
        for _ in range(16):
            trial = prob.normalize(np.abs(vals + dt(alpha) * d))
            t_gap, t_qe = prob.parts(trial)
            if t_gap < 0.0:
                _, _, t_tang = prob.tangent_gradient(trial)
                t_kkt = prob.kkt(t_tang, t_gap, t_qe)
                if cand is None or t_kkt < cand[3]:
                    cand = (trial, t_gap, t_qe, t_kkt)
                if t_kkt < kkt:
                    break
            alpha *= 0.5
        if cand is not None and cand[3] < kkt:
            vals, gap, qe, kkt = cand
            obj = prob.objective(gap, qe)
            best = (vals.copy(), gap, qe, kkt) if kkt < best[3] else best
            patience = 8
            tau = max(tau / 3.0, 0.0)
            polish = False  # re-enter value phase while progress lasts
            continue
        # bounded non-monotone acceptance to escape rounding-noise traps
        if cand is not None and patience > 0 and cand[3] < 2.0 * best[3]:
            patience -= 1
            vals, gap, qe, kkt = cand
            obj = prob.objective(gap, qe)
            continue
        gh, gg, tang = prob.tangent_gradient(vals)
        floored = kkt <= _FLOOR_MARGIN * prob.kkt_floor(vals, gh, gg, gap, qe)
        break

    if best[3] < kkt:
        vals, gap, qe, kkt = best
    return vals, float(kkt), iterations, floored


def solve(
    spec: ProblemSpec, pair: PrincipalPair, opts: SolveOptions | None = None
) -> FiberSolution | NoSolution:
    """Minimize the reduced energy at spec.lam and reconstruct the solution.

    Returns NoSolution when lam sits at or below the principal eigenvalue
    (within a relative guard of 1e-12): the feasible cone is empty there.
    Raises NoConvergence with the best iterate if the stationarity target is
    missed within the iteration budget, and LeftFeasibleCone if an accepted
    iterate ever loses the negative gap (a step-size bug by construction).
    """
    opts = opts or SolveOptions()
    if spec.lam <= pair.lambda1 * (1.0 + _RELATIVE_THRESHOLD_GUARD):
        return NoSolution(
            lam=spec.lam,
            lambda1=pair.lambda1,
            reason="no nontrivial solution for lam <= lambda1(p)",
        )

    prob = _SphereProblem(spec)
    init = opts.init if opts.init is not None else pair.phi1
    start = np.abs(init.values.astype(np.float64, copy=True))
    if prob.kern.gap(prob.normalize(start.copy())) >= 0.0:
        start = np.abs(pair.phi1.values.astype(np.float64, copy=True))

    vals, kkt, iters, floored = _minimize(prob, start, opts, opts.max_iter)

    total_iters = iters
    if kkt >= opts.tol_kkt and opts.extended_polish:
        # float64 rounding floors the residual above target near the spectral
        # threshold; 80-bit arithmetic lowers the floor by ~3 decades
        prob_ld = _SphereProblem(spec, dtype=np.longdouble)
        vals_ld, kkt_ld, iters_ld, floored_ld = _minimize(
            prob_ld, vals, opts, max(200, min(2000, opts.max_iter - total_iters))
        )
        total_iters += iters_ld
        if kkt_ld < kkt:
            vals, kkt, floored = vals_ld, kkt_ld, floored_ld

    if not (kkt < opts.tol_kkt or floored):
        # certify against the float64 rounding floor: downstream consumers
        # work in float64, so a residual at that floor is indistinguishable
        # from stationarity regardless of which phase produced the point
        v64 = np.asarray(vals, dtype=np.float64)
        gap64, qe64 = prob.parts(v64)
        gh64, gg64, _ = prob.tangent_gradient(v64)
        floored = kkt <= _FLOOR_MARGIN * prob.kkt_floor(v64, gh64, gg64, gap64, qe64)

    converged = kkt < opts.tol_kkt or floored
    if not converged:
        raise NoConvergence(
            f"fiber descent stalled at kkt residual {kkt:.3e} > tol {opts.tol_kkt:.1e} "
            f"after {total_iters} iterations",
            best=_package(spec, vals, kkt, total_iters, False),
        )
    return _package(spec, vals, kkt, total_iters, True)


def _package(spec: ProblemSpec, vals, kkt: float, iterations: int, converged: bool) -> FiberSolution:
    kern = EnergyKernel(spec, dtype=np.longdouble)
    v_ld = np.asarray(vals, dtype=np.longdouble)
    v_ld = v_ld / kern.qenergy(v_ld) ** (1.0 / spec.q)
    v_ld[0] = 0.0
    v_ld[-1] = 0.0
    gap = kern.gap(v_ld)
    qe = kern.qenergy(v_ld)
    m = reduced_energy_from_parts(spec.p, spec.q, gap, qe)
    t = float((-gap / qe) ** (1.0 / (spec.q - spec.p)))
    u_ld = np.longdouble(t) * v_ld
    weak = _weak_residual(kern, u_ld)

    grid = spec.grid
    v64 = v_ld.astype(np.float64)
    v64[0] = 0.0
    v64[-1] = 0.0
    u64 = u_ld.astype(np.float64)
    u64[0] = 0.0
    u64[-1] = 0.0
    return FiberSolution(
        v_min=GridFunction(grid, v64),
        t_scale=t,
        u_sol=GridFunction(grid, u64),
        m_energy=float(m),
        h_value=float(gap),
        kkt_residual=kkt,
        weak_residual=weak,
        iterations=iterations,
        converged=converged,
    )


def _weak_residual(kern: EnergyKernel, u_vals) -> float:
    grad = kern.total_gradient(u_vals)
    scale = kern.gradient_scale(u_vals)
    top = float(np.max(np.abs(grad)))
    bottom = float(np.max(scale))
    return top / bottom if bottom > 0.0 else 0.0


@dataclass(frozen=True)
class SolutionReport:
    """Residuals and qualitative checks of a reconstructed solution."""

    weak_residual: float
    nehari_defect: float
    positivity_margin: float
    interior_max: float
    tail_max: float
    tail_ratio: float
    luxemburg: float
    boundary_slope: float
    trivial: bool


def verify_solution(spec: ProblemSpec, sol: FiberSolution | GridFunction) -> SolutionReport:
    """Residual and decay report for a solution profile.

    tail_max is taken over the outermost tenth of the nodes (against the
    interior maximum), positivity over all interior nodes; boundary_slope is
    the one-sided difference quotient at the inner boundary, reported for
    information only.
    """
    u = sol.u_sol if isinstance(sol, FiberSolution) else sol
    vals = u.values
    if not np.any(vals):
        return SolutionReport(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, True)
    kern = EnergyKernel(spec, dtype=np.longdouble)
    weak = _weak_residual(kern, vals.astype(np.longdouble))
    interior = vals[1:-1]
    n_tail = max(1, vals.size // 10)
    tail = np.abs(vals[-n_tail - 1 : -1])
    interior_max = float(np.max(np.abs(interior)))
    tail_max = float(np.max(tail)) if tail.size else 0.0
    return SolutionReport(
        weak_residual=weak,
        nehari_defect=nehari_residual(spec, u),
        positivity_margin=float(np.min(interior)),
        interior_max=interior_max,
        tail_max=tail_max,
        tail_ratio=tail_max / interior_max,
        luxemburg=luxemburg_norm(spec, u),
        boundary_slope=float((vals[1] - vals[0]) / u.grid.widths[0]),
        trivial=False,
    )
