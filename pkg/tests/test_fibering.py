import dataclasses

import numpy as np
import pytest

from pqfiber import (
    GridFunction,
    LeftFeasibleCone,
    NoSolution,
    SolveOptions,
    build_grid,
    compute_principal_pair,
    energy_gap,
    q_energy,
    sample_weight,
    solve,
    total_energy,
    verify_solution,
)
from pqfiber.fibering import _minimize, _SphereProblem
from pqfiber.functionals import EnergyKernel, reduced_energy_from_parts


@pytest.fixture(scope="module")
def sol_24(spec_24, pair_24):
    out = solve(spec_24, pair_24)
    assert not isinstance(out, NoSolution)
    return out


@pytest.fixture(scope="module")
def sol_42(spec_42, pair_42):
    out = solve(spec_42, pair_42)
    assert not isinstance(out, NoSolution)
    return out


@pytest.mark.parametrize("factor", [0.5, 0.9, 1.0])
def test_no_solution_at_or_below_threshold(spec_24, pair_24, factor):
    spec = dataclasses.replace(spec_24, lam=factor * pair_24.lambda1)
    out = solve(spec, pair_24)
    assert isinstance(out, NoSolution)
    assert out.lambda1 == pair_24.lambda1


def test_solution_invariants_p_less_q(spec_24, pair_24, sol_24):
    sol = sol_24
    p, q = spec_24.p, spec_24.q
    assert sol.converged
    assert sol.m_energy < 0.0  # minimum lies in (-inf, 0) for p < q
    assert sol.h_value < 0.0
    assert q_energy(spec_24, sol.v_min) == pytest.approx(1.0, rel=1e-12)
    assert sol.t_scale == pytest.approx(abs(sol.h_value) ** (1.0 / (q - p)), rel=1e-12)
    assert q_energy(spec_24, sol.u_sol) ** (1.0 / q) == pytest.approx(sol.t_scale, rel=1e-10)
    assert np.all(sol.u_sol.values >= 0.0)
    assert sol.kkt_residual < 1e-7
    assert sol.weak_residual < 1e-6
    # energy certificate: the eigenfunction is feasible, so the minimum is
    # at most its fiber value
    kern = EnergyKernel(spec_24)
    gap_phi = (pair_24.lambda1 - spec_24.lam) * float(kern.mass(pair_24.phi1.values))
    cert = reduced_energy_from_parts(p, q, gap_phi, 1.0)
    assert sol.m_energy <= cert + 1e-10 * abs(cert)


def test_solution_invariants_p_greater_q(spec_42, pair_42, sol_42):
    sol = sol_42
    p, q = spec_42.p, spec_42.q
    assert sol.converged
    assert sol.m_energy > 0.0  # minimum lies in (0, +inf) for p > q
    assert sol.h_value < 0.0
    assert q_energy(spec_42, sol.v_min) == pytest.approx(1.0, rel=1e-12)
    assert sol.t_scale == pytest.approx(abs(sol.h_value) ** (1.0 / (q - p)), rel=1e-12)
    assert np.all(sol.u_sol.values >= 0.0)


@pytest.mark.parametrize("use_42", [False, True])
def test_scale_relation_between_energy_and_gap(use_42, spec_24, spec_42, sol_24, sol_42):
    # |h| = (p q / |q - p| * |m|)^((q-p)/q)
    spec, sol = (spec_42, sol_42) if use_42 else (spec_24, sol_24)
    p, q = spec.p, spec.q
    expected = -((p * q / abs(q - p)) * abs(sol.m_energy)) ** ((q - p) / q)
    assert sol.h_value == pytest.approx(expected, rel=1e-10)


@pytest.mark.parametrize("use_42", [False, True])
def test_minimum_character_dichotomy(use_42, spec_24, spec_42, sol_24, sol_42):
    spec, sol = (spec_42, sol_42) if use_42 else (spec_24, sol_24)
    at = lambda s: total_energy(spec, GridFunction(sol.v_min.grid, s * sol.v_min.values))
    center = at(sol.t_scale)
    lo = at(sol.t_scale * (1.0 - 1e-3))
    hi = at(sol.t_scale * (1.0 + 1e-3))
    if spec.p < spec.q:
        assert lo > center and hi > center
    else:
        assert lo < center and hi < center


def test_value_phase_energy_monotone(spec_24, pair_24):
    # deeper iteration budgets never worsen the reached energy
    prob = _SphereProblem(spec_24)
    start = np.abs(pair_24.phi1.values.copy())
    opts = SolveOptions()
    energies = []
    for budget in (2, 5, 10, 20, 40):
        vals, _, _, _ = _minimize(prob, start.copy(), opts, budget)
        gap, qe = prob.parts(vals)
        energies.append(float(prob.reduced(gap, qe)))
    for a, b in zip(energies, energies[1:]):
        assert b <= a + 1e-12 * abs(a)


def test_infeasible_start_raises(spec_24, pair_24):
    prob = _SphereProblem(dataclasses.replace(spec_24, lam=0.5 * pair_24.lambda1))
    with pytest.raises(LeftFeasibleCone):
        _minimize(prob, np.abs(pair_24.phi1.values.copy()), SolveOptions(), 10)


def test_warm_start_equivalence(spec_24, pair_24, sol_24):
    spec_next = dataclasses.replace(spec_24, lam=1.3 * spec_24.lam)
    cold = solve(spec_next, pair_24)
    warm = solve(spec_next, pair_24, SolveOptions(init=sol_24.v_min))
    assert warm.m_energy == pytest.approx(cold.m_energy, rel=1e-8)


def test_verify_solution_report(spec_24, sol_24):
    rep = verify_solution(spec_24, sol_24)
    assert not rep.trivial
    assert rep.nehari_defect < 1e-10
    assert rep.positivity_margin > 0.0
    assert rep.weak_residual < 1e-6
    assert 0.0 < rep.tail_ratio < 1.0
    assert rep.luxemburg > 0.0
    assert rep.boundary_slope > 0.0  # profile rises away from the inner boundary


def test_verify_solution_trivial_flag(spec_24, small_grid):
    zero = GridFunction(small_grid, np.zeros(small_grid.n_nodes))
    rep = verify_solution(spec_24, zero)
    assert rep.trivial
    assert rep.weak_residual == 0.0


def test_tail_decay_improves_under_truncation_doubling():
    lam_fixed = None
    tails = []
    for r_out, n in ((20.0, 400), (40.0, 821)):
        grid = build_grid(1.0, r_out, n, "uniform", 7)
        weight = sample_weight(grid, "power_decay", 1.0, alpha=3.0)
        pair = compute_principal_pair(grid, weight, p=2.0, q=4.0)
        if lam_fixed is None:
            lam_fixed = 2.0 * pair.lambda1
        from pqfiber import ProblemSpec

        spec = ProblemSpec(p=2.0, q=4.0, dim_n=7, lam=lam_fixed, weight=weight)
        sol = solve(spec, pair)
        tails.append(verify_solution(spec, sol).tail_ratio)
    assert tails[0] < 1e-2
    assert tails[1] < tails[0]
