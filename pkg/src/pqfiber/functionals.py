"""Discrete energies of the weighted (p,q)-Laplacian problem and their gradients.

For a profile v with cell gradients g and weight K, the building blocks are

    p-energy      sum_i w_i |g_i|^p
    q-energy      sum_i w_i |g_i|^q
    mass          sum_i w_i K_i m_i^p   with  m_i = (|v_i| + |v_{i+1}|) / 2
    energy gap    p-energy - lam * mass
    total energy  gap / p + q-energy / q

Profiles with a negative gap form an open cone; on it the ray t -> t*v meets
the Nehari set at the scale t_v = (|gap| / q-energy)^(1/(q-p)), and the value
of the total energy there is the 0-homogeneous reduced energy

    (1/q - 1/p) * |gap|^(q/(q-p)) / q-energy^(p/(q-p)).

Midpoint |v| sampling keeps the mass term differentiable in the nodal values
and pairs with the two-point cell gradient, so all gradients below are exact
gradients of the discrete (epsilon-regularized) functionals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGradient, DimensionMismatch, InfeasibleProfile, InvalidGeometry
from .grid import GridFunction, RadialGrid, WeightField

__all__ = [
    "ProblemSpec",
    "FunctionalReport",
    "EnergyKernel",
    "energy_gap",
    "q_energy",
    "total_energy",
    "energy_gradient",
    "functional_report",
    "nehari_scale",
    "reduced_energy",
    "reduced_energy_from_parts",
    "nehari_scale_from_parts",
    "reconstruct_solution",
    "luxemburg_norm",
    "nehari_residual",
]


@dataclass(frozen=True)
class ProblemSpec:
    """Exponents, dimension, spectral parameter and weight defining the energies.

    The continuum problem is posed for exponents inside (1, dim_n); that
    window is enforced where run configurations are validated. The discrete
    energies themselves only need p, q > 1 with p != q, which is what this
    constructor checks, together with alpha > p for a power-decay weight
    (integrability of the weight tail). grad_reg_eps regularizes the
    (s-2)-power factors of gradients when min(p, q) < 2; energy values
    themselves are never regularized.
    """

    p: float
    q: float
    dim_n: int
    lam: float
    weight: WeightField
    grad_reg_eps: float = 1e-8

    def __post_init__(self):
        n = self.dim_n
        if not self.p > 1.0:
            raise InvalidGeometry(f"p must exceed 1, got p={self.p}")
        if not self.q > 1.0:
            raise InvalidGeometry(f"q must exceed 1, got q={self.q}")
        if self.p == self.q:
            raise InvalidGeometry("p != q is required")
        if self.weight.grid.dim_n != n:
            raise DimensionMismatch(
                f"weight sampled for dimension {self.weight.grid.dim_n}, problem has {n}"
            )
        if self.weight.kind == "power_decay" and self.weight.alpha <= self.p:
            raise InvalidGeometry(
                f"power_decay weight needs alpha > p, got alpha={self.weight.alpha}, p={self.p}"
            )
        if self.grad_reg_eps < 0.0:
            raise InvalidGeometry("grad_reg_eps must be >= 0")

    @property
    def grid(self) -> RadialGrid:
        return self.weight.grid


@dataclass(frozen=True)
class FunctionalReport:
    """Snapshot of the three energies at one profile.

    ``in_cone`` is true iff the profile is nonzero with a negative gap,
    i.e. it admits a Nehari ray scale.
    """

    gap_value: float
    q_energy_value: float
    energy_value: float
    in_cone: bool


class EnergyKernel:
    """Array-level evaluation engine for one (grid, weight, p, q, lam, eps) set.

    All methods take and return plain arrays in the kernel's dtype; the
    module-level functions wrap this for GridFunction inputs, and the solvers
    reuse it directly (including at extended precision for residual polish).
    """

    def __init__(self, spec: ProblemSpec, dtype=np.float64):
        grid = spec.grid
        self.p = float(spec.p)
        self.q = float(spec.q)
        self.lam = dtype(spec.lam)
        self.eps = float(spec.grad_reg_eps)
        self.dtype = dtype
        self.n_nodes = grid.n_nodes
        self.dr = np.asarray(grid.widths, dtype=dtype)
        self.w = np.asarray(grid.cell_weights, dtype=dtype)
        self.wk = self.w * np.asarray(spec.weight.samples, dtype=dtype)

    # -- scalar functionals -------------------------------------------------

    def gradient(self, vals: np.ndarray) -> np.ndarray:
        return (vals[1:] - vals[:-1]) / self.dr

    def mid_abs(self, vals: np.ndarray) -> np.ndarray:
        a = np.abs(vals)
        return 0.5 * (a[:-1] + a[1:])

    def power_energy(self, vals: np.ndarray, s: float):
        g = self.gradient(vals)
        return (self.w * np.abs(g) ** s).sum()

    def mass(self, vals: np.ndarray):
        return (self.wk * self.mid_abs(vals) ** self.p).sum()

    def gap(self, vals: np.ndarray):
        return self.power_energy(vals, self.p) - self.lam * self.mass(vals)

    def qenergy(self, vals: np.ndarray):
        return self.power_energy(vals, self.q)

    def total(self, vals: np.ndarray):
        return self.gap(vals) / self.p + self.qenergy(vals) / self.q

    # -- gradients ----------------------------------------------------------

    def _odd_power(self, g: np.ndarray, s: float) -> np.ndarray:
        """|g|^(s-2) * g with the (s-2)-power factor regularized when s < 2."""
        if s >= 2.0:
            return np.abs(g) ** (s - 2.0) * g
        if self.eps == 0.0:
            if np.any(g == 0.0):
                raise DegenerateGradient(
                    f"zero cell gradient with exponent {s} < 2 and grad_reg_eps = 0"
                )
            return np.abs(g) ** (s - 2.0) * g
        return (g * g + self.dtype(self.eps) ** 2) ** ((s - 2.0) / 2.0) * g

    def _flux(self, g: np.ndarray, s: float) -> np.ndarray:
        return self.w * self._odd_power(g, s) / self.dr

    def _flux_divergence(self, flux: np.ndarray, out: np.ndarray) -> np.ndarray:
        out[1:-1] = flux[:-1] - flux[1:]
        return out

    def mass_half_coeff(self, vals: np.ndarray) -> np.ndarray:
        """Cell coefficients w_i K_i m_i^(p-1); the mass gradient at node j is
        p * (c_{j-1} + c_j) / 2 * sign(v_j)."""
        return self.wk * self.mid_abs(vals) ** (self.p - 1.0)

    def mass_gradient(self, vals: np.ndarray) -> np.ndarray:
        c = self.mass_half_coeff(vals)
        out = np.zeros_like(vals)
        out[1:-1] = 0.5 * self.p * (c[:-1] + c[1:]) * np.sign(vals[1:-1])
        return out

    def power_energy_gradient(self, vals: np.ndarray, s: float) -> np.ndarray:
        fl = self._flux(self.gradient(vals), s)
        out = np.zeros_like(vals)
        self._flux_divergence(fl, out)
        out *= s
        return out

    def gap_gradient(self, vals: np.ndarray) -> np.ndarray:
        return self.power_energy_gradient(vals, self.p) - self.lam * self.mass_gradient(vals)

    def qenergy_gradient(self, vals: np.ndarray) -> np.ndarray:
        return self.power_energy_gradient(vals, self.q)

    def total_gradient(self, vals: np.ndarray) -> np.ndarray:
        g = self.gradient(vals)
        fl = self._flux(g, self.p) + self._flux(g, self.q)
        out = np.zeros_like(vals)
        self._flux_divergence(fl, out)
        c = self.mass_half_coeff(vals)
        out[1:-1] -= self.lam * 0.5 * (c[:-1] + c[1:]) * np.sign(vals[1:-1])
        return out

    def gradient_scale(self, vals: np.ndarray) -> np.ndarray:
        """Sum of absolute term magnitudes entering total_gradient; bounds the
        float rounding noise of the assembled gradient and normalizes weak
        residuals."""
        g = self.gradient(vals)
        fl = np.abs(self._flux(g, self.p)) + np.abs(self._flux(g, self.q))
        out = np.zeros_like(vals)
        out[1:-1] = fl[:-1] + fl[1:]
        c = self.mass_half_coeff(vals)
        out[1:-1] += abs(self.lam) * 0.5 * (c[:-1] + c[1:])
        return out

    def gap_gradient_scale(self, vals: np.ndarray) -> np.ndarray:
        """Absolute-term magnitudes of the gap gradient assembly."""
        fl = np.abs(self._flux(self.gradient(vals), self.p))
        out = np.zeros_like(vals)
        out[1:-1] = self.p * (fl[:-1] + fl[1:])
        c = self.mass_half_coeff(vals)
        out[1:-1] += abs(self.lam) * 0.5 * self.p * (c[:-1] + c[1:])
        return out

    def qenergy_gradient_scale(self, vals: np.ndarray) -> np.ndarray:
        """Absolute-term magnitudes of the q-energy gradient assembly."""
        fl = np.abs(self._flux(self.gradient(vals), self.q))
        out = np.zeros_like(vals)
        out[1:-1] = self.q * (fl[:-1] + fl[1:])
        return out

    def hessian_cell_coeffs(self, vals: np.ndarray) -> np.ndarray:
        """Per-cell curvature weights of the two gradient energies, used to
        assemble the tridiagonal preconditioner. Always mollified so the
        assembled matrix stays positive definite."""
        g = self.gradient(vals)
        e2 = max(self.eps, 1e-9) ** 2
        gg = g * g + self.dtype(e2)
        p, q = self.p, self.q
        c = self.w * (p * (p - 1.0) * gg ** ((p - 2.0) / 2.0) + q * (q - 1.0) * gg ** ((q - 2.0) / 2.0))
        c /= self.dr**2
        floor = 1e-14 * float(np.max(c)) if c.size else 0.0
        return np.maximum(c, self.dtype(floor))


def _kernel(spec: ProblemSpec, v: GridFunction) -> EnergyKernel:
    if v.grid.n_cells != spec.grid.n_cells:
        raise DimensionMismatch(
            f"profile lives on {v.grid.n_cells} cells, weight on {spec.grid.n_cells}"
        )
    return EnergyKernel(spec)


def energy_gap(spec: ProblemSpec, v: GridFunction) -> float:
    """Difference between the p-gradient energy and the lam-weighted mass.

    Its sign classifies profiles: a negative gap is required for a ray scale
    onto the Nehari set to exist.
    """
    return float(_kernel(spec, v).gap(v.values))


def q_energy(spec: ProblemSpec, v: GridFunction) -> float:
    """Integral of |grad v|^q; positive for every nonzero profile."""
    return float(_kernel(spec, v).qenergy(v.values))


def total_energy(spec: ProblemSpec, u: GridFunction) -> float:
    """Full energy, equal to gap/p + q-energy/q by construction."""
    k = _kernel(spec, u)
    return float(k.gap(u.values) / k.p + k.qenergy(u.values) / k.q)


def functional_report(spec: ProblemSpec, v: GridFunction) -> FunctionalReport:
    k = _kernel(spec, v)
    gap = float(k.gap(v.values))
    qe = float(k.qenergy(v.values))
    return FunctionalReport(
        gap_value=gap,
        q_energy_value=qe,
        energy_value=gap / k.p + qe / k.q,
        in_cone=gap < 0.0 and not v.is_zero(),
    )


def energy_gradient(spec: ProblemSpec, u: GridFunction) -> GridFunction:
    """Exact nodal gradient of the (regularized) discrete total energy.

    Boundary entries are forced to zero: test directions carry zero trace.
    """
    k = _kernel(spec, u)
    return GridFunction(u.grid, k.total_gradient(u.values))


def nehari_scale_from_parts(p: float, q: float, gap: float, qe: float) -> float:
    if gap >= 0.0:
        raise InfeasibleProfile(f"nonnegative energy gap {gap}; no ray scale exists")
    return float((-gap / qe) ** (1.0 / (q - p)))


def nehari_scale(spec: ProblemSpec, v: GridFunction) -> float:
    """Positive scale t at which t*v crosses the Nehari set.

    The negative root generates the same solution up to sign (the reduced
    energy is even); only the positive branch is returned.
    """
    k = _kernel(spec, v)
    return nehari_scale_from_parts(k.p, k.q, float(k.gap(v.values)), float(k.qenergy(v.values)))


def reduced_energy_from_parts(p: float, q: float, gap, qe):
    if gap >= 0.0:
        raise InfeasibleProfile(f"nonnegative energy gap {gap}; reduced energy undefined")
    return (1.0 / q - 1.0 / p) * (-gap) ** (q / (q - p)) / qe ** (p / (q - p))


def reduced_energy(spec: ProblemSpec, v: GridFunction) -> float:
    """Total energy evaluated at the Nehari scale of v.

    0-homogeneous and even in v; negative iff p < q, positive iff p > q.
    """
    k = _kernel(spec, v)
    return float(
        reduced_energy_from_parts(k.p, k.q, float(k.gap(v.values)), float(k.qenergy(v.values)))
    )


def reconstruct_solution(spec: ProblemSpec, v: GridFunction) -> GridFunction:
    """Nonnegative representative t * |v| of the solution on v's ray.

    The scale is computed on the nodal absolute value |v| (which has a
    negative gap whenever v does), so the result lies on the Nehari set
    exactly, also for sign-changing v where nodal |.| alters the discrete
    gradients.
    """
    a = np.abs(v.values)
    nonneg = GridFunction(v.grid, a)
    t = nehari_scale(spec, nonneg)
    return GridFunction(v.grid, t * a)


def luxemburg_norm(spec: ProblemSpec, v: GridFunction, rel_tol: float = 1e-10) -> float:
    """Gauge norm of |grad v| for the Young function t^p/p + t^q/q.

    Returns the unique alpha > 0 with sum_i w_i Psi(|g_i| / alpha) = 1, found
    by bisection (the modular is continuous and strictly decreasing in alpha).
    Returns 0 for the zero profile by convention.
    """
    if v.is_zero():
        return 0.0
    k = _kernel(spec, v)
    g = np.abs(k.gradient(v.values))
    w, p, q = k.w, k.p, k.q

    def modular(alpha: float) -> float:
        t = g / alpha
        return float((w * (t**p / p + t**q / q)).sum())

    hi = max(1.0, float(g.max()))
    while modular(hi) >= 1.0:
        hi *= 2.0
    lo = hi
    while modular(lo) < 1.0:
        lo *= 0.5
        if lo < 1e-300:
            break
    while (hi - lo) > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if modular(mid) >= 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def nehari_residual(spec: ProblemSpec, u: GridFunction) -> float:
    """Normalized defect |gap(u) + q_energy(u)| / (|gap(u)| + q_energy(u)).

    Zero exactly when u lies on the Nehari set, i.e. the full energy
    derivative paired with u itself vanishes.
    """
    k = _kernel(spec, u)
    gap = float(k.gap(u.values))
    qe = float(k.qenergy(u.values))
    denom = abs(gap) + qe
    if denom == 0.0:
        return 0.0
    return abs(gap + qe) / denom
