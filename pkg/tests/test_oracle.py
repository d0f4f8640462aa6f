import dataclasses

import numpy as np
import pytest

from pqfiber import (
    EmptyFeasibleSet,
    GridFunction,
    InvalidGeometry,
    ProblemSpec,
    TinyInstance,
    brute_force_lambda1,
    brute_force_reduced_min,
    build_grid,
    compute_principal_pair,
    linear_eigen_oracle,
    reduced_energy,
    sample_weight,
    solve,
)


def test_single_interior_node_hand_value():
    # stiffness 6 over weighted mass 0.375 leaves the 1x1 quotient 16
    g = build_grid(1.0, 2.0, 2, "uniform", 2)
    w = sample_weight(g, "custom_table", kappa=1.0, table=np.ones(2))
    assert linear_eigen_oracle(g, w) == pytest.approx(16.0, rel=1e-12)


def test_eigenvalue_decreases_under_refinement():
    vals = []
    for n in (25, 50, 100, 200, 400):
        g = build_grid(1.0, 20.0, n, "uniform", 3)
        w = sample_weight(g, "power_decay", 1.0, alpha=3.0)
        vals.append(linear_eigen_oracle(g, w))
    # observed on the refinement ladder: monotone convergence from above
    for a, b in zip(vals, vals[1:]):
        assert b < a


def test_eigenvalue_scales_inversely_with_weight():
    g = build_grid(1.0, 20.0, 120, "uniform", 3)
    w1 = sample_weight(g, "power_decay", 1.0, alpha=3.0)
    w3 = sample_weight(g, "custom_table", kappa=3.0, table=3.0 * w1.samples)
    assert linear_eigen_oracle(g, w3) == pytest.approx(linear_eigen_oracle(g, w1) / 3.0, rel=1e-12)


@pytest.fixture(scope="module")
def tiny_setup():
    g = build_grid(1.0, 3.0, 4, "uniform", 3)
    w = sample_weight(g, "power_decay", 1.0, alpha=3.0)
    spec0 = ProblemSpec(p=2.0, q=4.0, dim_n=3, lam=1.0, weight=w)
    lam1 = brute_force_lambda1(TinyInstance(spec0, samples_per_angle=241))
    return g, w, spec0, lam1


def test_brute_force_threshold_matches_eigensolver(tiny_setup):
    g, w, spec0, lam1 = tiny_setup
    pair = compute_principal_pair(g, w, p=2.0, q=4.0)
    assert lam1 == pytest.approx(pair.lambda1, rel=1e-6)


def test_brute_force_agrees_with_solver(tiny_setup):
    g, w, spec0, lam1 = tiny_setup
    spec = dataclasses.replace(spec0, lam=2.0 * lam1)
    bf = brute_force_reduced_min(TinyInstance(spec, samples_per_angle=241))
    pair = compute_principal_pair(g, w, p=2.0, q=4.0)
    sol = solve(spec, pair)
    assert sol.m_energy == pytest.approx(bf.m_bf, rel=1e-4)
    assert bf.evaluated > 0
    assert bf.lambda1_bf == pytest.approx(lam1, rel=1e-12)


def test_single_direction_branch_is_exact():
    g = build_grid(1.0, 2.0, 2, "uniform", 3)
    w = sample_weight(g, "power_decay", 1.0, alpha=3.0)
    spec0 = ProblemSpec(p=2.0, q=4.0, dim_n=3, lam=1.0, weight=w)
    lam1 = brute_force_lambda1(TinyInstance(spec0))
    spec = dataclasses.replace(spec0, lam=2.0 * lam1)
    bf = brute_force_reduced_min(TinyInstance(spec))
    v = GridFunction.from_interior(g, np.array([1.0]))
    assert bf.m_bf == reduced_energy(spec, v)


def test_empty_feasible_set_below_threshold(tiny_setup):
    g, w, spec0, lam1 = tiny_setup
    spec = dataclasses.replace(spec0, lam=0.5 * lam1)
    with pytest.raises(EmptyFeasibleSet) as err:
        brute_force_reduced_min(TinyInstance(spec, samples_per_angle=241))
    assert err.value.lambda1_estimate == pytest.approx(lam1, rel=1e-12)


def test_tiny_instance_size_guard():
    g = build_grid(1.0, 3.0, 8, "uniform", 3)  # 7 interior nodes
    w = sample_weight(g, "power_decay", 1.0, alpha=3.0)
    spec = ProblemSpec(p=2.0, q=4.0, dim_n=3, lam=10.0, weight=w)
    with pytest.raises(InvalidGeometry):
        TinyInstance(spec)


def test_four_interior_nodes_at_reduced_resolution():
    g = build_grid(1.0, 3.0, 5, "uniform", 3)
    w = sample_weight(g, "power_decay", 1.0, alpha=3.0)
    spec0 = ProblemSpec(p=2.0, q=4.0, dim_n=3, lam=1.0, weight=w)
    lam1 = brute_force_lambda1(TinyInstance(spec0, samples_per_angle=61))
    spec = dataclasses.replace(spec0, lam=2.0 * lam1)
    bf = brute_force_reduced_min(TinyInstance(spec, samples_per_angle=61))
    pair = compute_principal_pair(g, w, p=2.0, q=4.0)
    sol = solve(spec, pair)
    assert sol.m_energy == pytest.approx(bf.m_bf, rel=1e-3)
