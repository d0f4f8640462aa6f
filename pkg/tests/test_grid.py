import numpy as np
import pytest

from pqfiber import (
    DimensionMismatch,
    GridFunction,
    InvalidGeometry,
    NonIntegrableWeight,
    build_grid,
    discrete_gradient,
    extend_grid,
    integrate_cells,
    parabolic_profile,
    refine_grid,
    sample_weight,
)


def test_two_cell_grid_matches_hand_values():
    g = build_grid(1.0, 2.0, 2, "uniform", 2)
    assert np.allclose(g.nodes, [1.0, 1.5, 2.0])
    assert np.allclose(g.midpoints, [1.25, 1.75])
    assert np.allclose(g.cell_weights, [0.625, 0.875])


def test_quadrature_mass_matches_stated_rule():
    g = build_grid(1.0, 3.0, 4, "uniform", 3)
    mids = np.array([1.25, 1.75, 2.25, 2.75])
    assert g.measure() == pytest.approx(float(np.sum(mids**2 * 0.5)), rel=1e-15)


def test_reversed_radii_rejected():
    with pytest.raises(InvalidGeometry):
        build_grid(2.0, 1.0, 4, "uniform", 2)
    with pytest.raises(InvalidGeometry):
        build_grid(1.0, 2.0, 1, "uniform", 2)
    with pytest.raises(InvalidGeometry):
        build_grid(1.0, 2.0, 4, "uniform", 1)
    with pytest.raises(InvalidGeometry):
        build_grid(1.0, 2.0, 4, "hexagonal", 2)


def test_geometric_spacing_spans_domain():
    g = build_grid(1.0, 20.0, 100, "geometric", 3, ratio=1.03)
    assert g.nodes[0] == 1.0 and g.nodes[-1] == 20.0
    ratios = g.widths[1:] / g.widths[:-1]
    assert np.allclose(ratios, 1.03, rtol=1e-9)
    assert np.all(g.cell_weights > 0.0)


def test_constant_weight_is_all_ones():
    g = build_grid(1.0, 2.0, 8, "uniform", 2)
    w = sample_weight(g, "power_decay", kappa=1.0, alpha=0.0)
    assert np.all(w.samples == 1.0)


def test_power_decay_sample_value():
    g = build_grid(1.0, 2.0, 2, "uniform", 2)
    w = sample_weight(g, "power_decay", kappa=2.0, alpha=1.0)
    assert w.samples[0] == pytest.approx(2.0 / 2.25, rel=1e-15)


def test_custom_table_zero_entry_rejected():
    g = build_grid(1.0, 2.0, 2, "uniform", 2)
    with pytest.raises(InvalidGeometry):
        sample_weight(g, "custom_table", kappa=1.0, table=np.array([1.0, 0.0]))


def test_weight_samples_bounded_by_amplitude():
    g = build_grid(1.0, 2.0, 4, "uniform", 2)
    with pytest.raises(InvalidGeometry):
        sample_weight(g, "custom_table", kappa=1.0, table=np.array([1.0, 2.0, 1.0, 1.0]))


def test_integrability_proxy_accepts_decaying_weight():
    g = build_grid(1.0, 20.0, 200, "uniform", 5)
    sample_weight(g, "power_decay", 1.0, alpha=3.0, integrability_p=2.0)


def test_integrability_proxy_rejects_flat_weight():
    g = build_grid(1.0, 20.0, 200, "uniform", 5)
    with pytest.raises(NonIntegrableWeight):
        sample_weight(g, "power_decay", 1.0, alpha=0.5, integrability_p=2.0)


def test_gradient_of_zero_profile():
    g = build_grid(1.0, 2.0, 2, "uniform", 2)
    v = GridFunction(g, np.zeros(3))
    assert np.all(discrete_gradient(v) == 0.0)


def test_gradient_of_hat():
    g = build_grid(1.0, 2.0, 2, "uniform", 2)
    v = GridFunction(g, np.array([0.0, 1.0, 0.0]))
    assert np.allclose(discrete_gradient(v), [2.0, -2.0])


def test_gradient_linearity():
    rng = np.random.default_rng(0)
    g = build_grid(1.0, 5.0, 30, "uniform", 3)
    v = GridFunction.from_interior(g, rng.standard_normal(29))
    assert np.allclose(discrete_gradient(GridFunction(g, 3.5 * v.values)),
                       3.5 * discrete_gradient(v), rtol=1e-14)


def test_integrate_cells_values():
    g = build_grid(1.0, 2.0, 2, "uniform", 2)
    assert integrate_cells(g, np.ones(2)) == pytest.approx(1.5, rel=1e-15)
    assert integrate_cells(g, np.zeros(2)) == 0.0
    with pytest.raises(DimensionMismatch):
        integrate_cells(g, np.ones(3))


def test_integrate_cells_linearity_and_positivity():
    rng = np.random.default_rng(1)
    g = build_grid(1.0, 4.0, 25, "uniform", 4)
    f, h = rng.standard_normal(25), rng.standard_normal(25)
    a, b = 2.3, -0.7
    lhs = integrate_cells(g, a * f + b * h)
    rhs = a * integrate_cells(g, f) + b * integrate_cells(g, h)
    assert lhs == pytest.approx(rhs, rel=1e-12)
    assert integrate_cells(g, np.abs(f)) >= 0.0


def test_refinement_consistency_second_order():
    # oracle: exact polynomial integral of |v'|^2 r^(N-1) for the parabola
    # v = (r - a)(b - r), computed by polynomial integration
    a, b, dim = 1.0, 20.0, 3
    deriv = np.polynomial.Polynomial([a + b, -2.0])  # v'(r)
    integrand = deriv * deriv * np.polynomial.Polynomial([0.0, 0.0, 1.0])  # r^2 measure
    anti = integrand.integ()
    exact = anti(b) - anti(a)

    errs = []
    for n in (50, 100, 200, 400):
        g = build_grid(a, b, n, "uniform", dim)
        v = GridFunction(g, (g.nodes - a) * (b - g.nodes))
        val = integrate_cells(g, discrete_gradient(v) ** 2)
        errs.append(abs(val - exact))
    orders = [np.log2(e1 / e2) for e1, e2 in zip(errs, errs[1:])]
    assert min(orders) >= 1.9


def test_weight_proxy_stable_under_outer_doubling():
    p = 2.0
    g = build_grid(1.0, 20.0, 400, "uniform", 5)
    gd = extend_grid(g, 40.0)
    # per-unit resolution is preserved up to integer rounding of the cell count
    assert gd.widths[0] == pytest.approx(g.widths[0], rel=1e-3)
    w = sample_weight(g, "power_decay", 1.0, alpha=p + 1.0)
    wd = sample_weight(gd, "power_decay", 1.0, alpha=p + 1.0)
    expo = g.dim_n / p
    s = integrate_cells(g, w.samples**expo)
    sd = integrate_cells(gd, wd.samples**expo)
    assert abs(sd - s) / s < 0.1


def test_refine_grid_preserves_geometry():
    g = build_grid(1.0, 20.0, 100, "uniform", 3)
    g2 = refine_grid(g)
    assert g2.n_cells == 200
    # quadrature mass agrees to the midpoint-rule error of the coarser grid
    assert g2.measure() == pytest.approx(g.measure(), rel=1e-4)


def test_grid_function_trace_enforced():
    g = build_grid(1.0, 2.0, 4, "uniform", 2)
    with pytest.raises(InvalidGeometry):
        GridFunction(g, np.array([0.1, 1.0, 1.0, 1.0, 0.0]))
    with pytest.raises(DimensionMismatch):
        GridFunction(g, np.zeros(4))


def test_grid_arrays_immutable():
    g = build_grid(1.0, 2.0, 4, "uniform", 2)
    with pytest.raises(ValueError):
        g.nodes[0] = 5.0
    v = parabolic_profile(g)
    with pytest.raises(ValueError):
        v.values[1] = 5.0
