"""Independent certification oracles for tiny problem instances.

Two routes that share no code with the iterative solvers:

* a generalized tridiagonal eigenvalue solver (Sturm-count bisection on the
  pencil inertia) certifying the principal eigenvalue at p = 2, and
* exhaustive sampling of the unit sphere of directions, certifying the
  global minimum of the reduced energy on instances with at most four
  interior nodes (0-homogeneity makes the sphere restriction lossless).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyFeasibleSet, InvalidGeometry
from .functionals import EnergyKernel, ProblemSpec
from .grid import GridFunction, RadialGrid, WeightField

__all__ = [
    "TinyInstance",
    "BruteForceResult",
    "brute_force_reduced_min",
    "brute_force_lambda1",
    "linear_eigen_oracle",
]


# -- linear oracle ------------------------------------------------------------


def _pencil_arrays(grid: RadialGrid, weight: WeightField) -> tuple[np.ndarray, ...]:
    """Interior-node stiffness and weighted-mass tridiagonals for p = 2.

    Uses the same quadrature and midpoint |v| sampling as the energy kernel,
    under which the mass term is an exact quadratic form on sign-definite
    profiles (and the quotient infimum is attained on those).
    """
    w = grid.cell_weights
    dr = grid.widths
    wk = w * weight.samples
    cs = w / dr**2  # stiffness cell coefficients
    a_diag = cs[:-1] + cs[1:]
    a_off = -cs[1:-1]
    cm = 0.25 * wk  # mass cell coefficients: (v_i + v_{i+1})^2 / 4
    b_diag = cm[:-1] + cm[1:]
    b_off = cm[1:-1]
    return a_diag, a_off, b_diag, b_off


def _count_below(a_diag, a_off, b_diag, b_off, sigma: float) -> int:
    """Number of pencil eigenvalues below sigma via LDL^T pivot signs."""
    d = a_diag - sigma * b_diag
    e = a_off - sigma * b_off
    count = 0
    piv = d[0]
    if piv == 0.0:
        piv = -1e-300
    if piv < 0.0:
        count += 1
    for j in range(1, d.size):
        piv = d[j] - e[j - 1] ** 2 / piv
        if piv == 0.0:
            piv = -1e-300
        if piv < 0.0:
            count += 1
    return count


def linear_eigen_oracle(grid: RadialGrid, weight: WeightField, rel_tol: float = 1e-13) -> float:
    """Smallest generalized eigenvalue of the (stiffness, weighted mass) pair.

    Deterministic bisection on the Sturm count; no iteration knobs beyond the
    bracket-width target.
    """
    a_diag, a_off, b_diag, b_off = _pencil_arrays(grid, weight)
    if a_diag.size == 1:
        return float(a_diag[0] / b_diag[0])
    lo = 0.0
    hi = float(np.min(a_diag / b_diag))  # any basis vector's quotient bounds the min from above
    while _count_below(a_diag, a_off, b_diag, b_off, hi) < 1:
        hi *= 2.0
    while (hi - lo) > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if _count_below(a_diag, a_off, b_diag, b_off, mid) >= 1:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# -- brute-force sphere enumeration -------------------------------------------


@dataclass(frozen=True)
class TinyInstance:
    """Problem small enough for exhaustive search over profile directions.

    samples_per_angle fixes the angular resolution of the hyperspherical
    sweep (0.25 degree steps at the default 721 for up to three interior
    nodes; four-node instances should lower it, cost grows as the cube).
    refine_passes locally halve the step around the incumbent.
    """

    spec: ProblemSpec
    samples_per_angle: int = 721
    refine_passes: int = 8
    resolution_slack: float = 1e-2

    def __post_init__(self):
        n_int = self.spec.grid.n_interior
        if not (1 <= n_int <= 4):
            raise InvalidGeometry(f"tiny instances need 1..4 interior nodes, got {n_int}")


@dataclass(frozen=True)
class BruteForceResult:
    m_bf: float
    v_bf: GridFunction
    lambda1_bf: float
    evaluated: int


def _directions(angles: np.ndarray) -> np.ndarray:
    """Hyperspherical angles (rows) to unit vectors in R^(n_angles+1)."""
    n_samples, n_angles = angles.shape
    d = n_angles + 1
    out = np.ones((n_samples, d))
    sin_run = np.ones(n_samples)
    for j in range(n_angles):
        out[:, j] = sin_run * np.cos(angles[:, j])
        sin_run = sin_run * np.sin(angles[:, j])
    out[:, d - 1] = sin_run
    return out


def _angle_grid(n_angles: int, n_samples: int) -> np.ndarray:
    # evenness of the reduced energy halves the last angle's range
    axes = [np.linspace(0.0, np.pi, n_samples) for _ in range(n_angles - 1)]
    axes.append(np.linspace(0.0, np.pi, n_samples, endpoint=False))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


class _SphereEvaluator:
    """Vectorized energies over batches of interior-direction vectors."""

    def __init__(self, spec: ProblemSpec):
        grid = spec.grid
        self.spec = spec
        self.kern = EnergyKernel(spec)
        n_int = grid.n_interior
        n_cells = grid.n_cells
        diff = np.zeros((n_cells, n_int))
        mid = np.zeros((n_cells, n_int))
        for j in range(n_int):
            diff[j, j] += 1.0
            diff[j + 1, j] -= 1.0
            mid[j, j] += 0.5
            mid[j + 1, j] += 0.5
        self.diff = diff / grid.widths[:, None]
        self.mid = mid
        self.w = grid.cell_weights
        self.wk = self.w * spec.weight.samples

    def energies(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(p-energy, q-energy, mass) for each row of interior values x."""
        g = x @ self.diff.T
        m = np.abs(x) @ self.mid.T
        ag = np.abs(g)
        pe = ag ** self.spec.p @ self.w
        qe = ag ** self.spec.q @ self.w
        mass = m ** self.spec.p @ self.wk
        return pe, qe, mass


def _reduced_values(spec: ProblemSpec, pe, qe, mass):
    gap = pe - spec.lam * mass
    p, q = spec.p, spec.q
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = (1.0 / q - 1.0 / p) * (-gap) ** (q / (q - p)) / qe ** (p / (q - p))
    vals = np.where(gap < 0.0, vals, np.inf)
    return vals, gap


def brute_force_lambda1(inst: TinyInstance) -> float:
    """Minimum Rayleigh quotient over the angular sweep, locally refined."""
    spec = inst.spec
    ev = _SphereEvaluator(spec)
    n_int = spec.grid.n_interior
    if n_int == 1:
        pe, _, mass = ev.energies(np.array([[1.0]]))
        return float(pe[0] / mass[0])
    angles = _angle_grid(n_int - 1, inst.samples_per_angle)
    pe, _, mass = ev.energies(_directions(angles))
    quot = pe / mass
    best = int(np.argmin(quot))
    center = angles[best]
    step = np.pi / (inst.samples_per_angle - 1)
    best_val = float(quot[best])
    for _ in range(inst.refine_passes):
        step *= 0.5
        local = _local_offsets(center, step)
        pe, _, mass = ev.energies(_directions(local))
        quot = pe / mass
        k = int(np.argmin(quot))
        if quot[k] < best_val:
            best_val = float(quot[k])
            center = local[k]
    return best_val


def _local_offsets(center: np.ndarray, step: float) -> np.ndarray:
    axes = [center[j] + step * np.array([-1.0, 0.0, 1.0]) for j in range(center.size)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def brute_force_reduced_min(inst: TinyInstance) -> BruteForceResult:
    """Exhaustive minimum of the reduced energy over the direction sphere.

    Samples all hyperspherical angle tuples, keeps negative-gap directions,
    then refines the best cell by repeated step halving. Raises
    EmptyFeasibleSet when no sample is feasible (after asserting that the
    spectral parameter indeed sits at or below the brute-force threshold,
    up to the angular resolution slack).
    """
    spec = inst.spec
    ev = _SphereEvaluator(spec)
    n_int = spec.grid.n_interior
    lam1 = brute_force_lambda1(inst)

    if n_int == 1:
        x = np.array([[1.0]])
        pe, qe, mass = ev.energies(x)
        vals, gap = _reduced_values(spec, pe, qe, mass)
        if not np.isfinite(vals[0]):
            assert spec.lam <= lam1 * (1.0 + inst.resolution_slack)
            raise EmptyFeasibleSet(
                f"no feasible direction at lam={spec.lam} (threshold ~{lam1})", lam1
            )
        v = GridFunction.from_interior(spec.grid, x[0])
        return BruteForceResult(float(vals[0]), v, lam1, 1)

    angles = _angle_grid(n_int - 1, inst.samples_per_angle)
    evaluated = angles.shape[0]
    pe, qe, mass = ev.energies(_directions(angles))
    vals, gap = _reduced_values(spec, pe, qe, mass)
    best = int(np.argmin(vals))
    if not np.isfinite(vals[best]):
        assert spec.lam <= lam1 * (1.0 + inst.resolution_slack), (
            f"empty feasible set although lam={spec.lam} > brute-force threshold {lam1}"
        )
        raise EmptyFeasibleSet(
            f"no feasible direction at lam={spec.lam} (threshold ~{lam1})", lam1
        )
    best_val = float(vals[best])
    center = angles[best]
    step = np.pi / (inst.samples_per_angle - 1)
    for _ in range(inst.refine_passes):
        step *= 0.5
        local = _local_offsets(center, step)
        evaluated += local.shape[0]
        pe, qe, mass = ev.energies(_directions(local))
        lv, _ = _reduced_values(spec, pe, qe, mass)
        k = int(np.argmin(lv))
        if lv[k] < best_val:
            best_val = float(lv[k])
            center = local[k]
    x = _directions(center[None, :])[0]
    v = GridFunction.from_interior(spec.grid, x)
    return BruteForceResult(best_val, v, lam1, evaluated)
