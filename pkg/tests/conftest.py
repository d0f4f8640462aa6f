import numpy as np
import pytest

from pqfiber import (
    ProblemSpec,
    build_grid,
    compute_principal_pair,
    sample_weight,
)


@pytest.fixture(scope="session")
def small_grid():
    return build_grid(1.0, 20.0, 400, "uniform", 7)


@pytest.fixture(scope="session")
def small_weight_24(small_grid):
    return sample_weight(small_grid, "power_decay", 1.0, alpha=3.0)


@pytest.fixture(scope="session")
def small_weight_42(small_grid):
    return sample_weight(small_grid, "power_decay", 1.0, alpha=5.0)


@pytest.fixture(scope="session")
def pair_24(small_grid, small_weight_24):
    return compute_principal_pair(small_grid, small_weight_24, p=2.0, q=4.0)


@pytest.fixture(scope="session")
def pair_42(small_grid, small_weight_42):
    return compute_principal_pair(small_grid, small_weight_42, p=4.0, q=2.0)


@pytest.fixture(scope="session")
def spec_24(small_weight_24, pair_24):
    return ProblemSpec(p=2.0, q=4.0, dim_n=7, lam=2.0 * pair_24.lambda1, weight=small_weight_24)


@pytest.fixture(scope="session")
def spec_42(small_weight_42, pair_42):
    return ProblemSpec(p=4.0, q=2.0, dim_n=7, lam=2.0 * pair_42.lambda1, weight=small_weight_42)


def smooth_profile(grid, rng, decay=True):
    """Random smooth interior profile with zero trace."""
    interior = np.cumsum(rng.standard_normal(grid.n_interior))
    if decay:
        interior = interior * np.linspace(1.0, 0.0, grid.n_interior)
    return interior


def feasible_profile(spec, pair, rng, scale=0.3):
    """Random profile inside the negative-gap cone, built as a perturbation
    of the principal eigenfunction (the perturbation is shrunk until the
    gap stays negative; the cone is open around phi1 for lam > lambda1)."""
    from pqfiber import GridFunction, energy_gap

    grid = spec.grid
    noise = np.zeros(grid.n_nodes)
    noise[1:-1] = smooth_profile(grid, rng)
    noise /= max(1e-30, np.max(np.abs(noise)))
    base = pair.phi1.values
    s = scale * float(np.max(np.abs(base)))
    for _ in range(60):
        v = GridFunction(grid, base + s * noise)
        if energy_gap(spec, v) < 0.0:
            return v
        s *= 0.5
    return pair.phi1
