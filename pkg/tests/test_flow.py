import math

import numpy as np
import pytest

from polar_ray import Monomial, check_commuting_formula, check_product_law, closed_flow, lie_series
from polar_ray.errors import DomainEscape
from polar_ray.flow import check_composition_law, required_truncation

E2 = 7.38905609893065


def test_closed_flow_cylinder(cyl, cyl_e):
    assert closed_flow(cyl.model, cyl.rho, cyl.phi, cyl_e, 1.0).w_t[0] == pytest.approx(E2, rel=1e-15)
    unit = cyl.model.point([np.exp(0.7j)])
    for t in (0.0, 3.0, 100.0):
        assert closed_flow(cyl.model, cyl.rho, cyl.phi, unit, t).w_t[0] == pytest.approx(np.exp(0.7j))


def test_closed_flow_weighted(wc2):
    p = wc2.model.point([], [1, 0])
    z = closed_flow(wc2.model, wc2.rho, wc2.phi, p, 1.0).z_t
    assert np.allclose(z, [math.e, 0])
    assert lie_series(wc2.model, wc2.rho, wc2.phi, p, 1.0, "z1")[0] == pytest.approx(math.e)


def test_flow_jacobian_against_finite_differences(mixed):
    from polar_ray.calculus import fd_real_jacobian

    for p in mixed.regular_points():
        state = closed_flow(mixed.model, mixed.rho, mixed.phi, p, 1.0)
        fd = fd_real_jacobian(
            mixed.model, lambda q: closed_flow(mixed.model, mixed.rho, mixed.phi, q, 1.0).coords, p
        )
        assert np.allclose(state.jac, fd, rtol=1e-6, atol=1e-6 * np.max(np.abs(fd)))


def test_lie_series_partial_sums(cyl, cyl_e):
    val, diag = lie_series(cyl.model, cyl.rho, cyl.phi, cyl_e, 1.0, "w1", N=2)
    assert val == pytest.approx(2.5 * math.e, rel=1e-15)
    val, diag = lie_series(cyl.model, cyl.rho, cyl.phi, cyl_e, 1.0, "w1", N=30)
    assert abs(val - E2) <= 1e-12 * E2
    assert diag.converged
    for N in (1, 5, 30):
        assert lie_series(cyl.model, cyl.rho, cyl.phi, cyl_e, 0.0, "w1", N=N)[0] == math.e


def test_required_truncation_meets_tail(cyl, cyl_e):
    for t in (10.0, 100.0):
        N = required_truncation(1.0, t)
        val, _ = lie_series(cyl.model, cyl.rho, cyl.phi, cyl_e, t, "w1", N=N)
        exact = math.e * math.exp(t)
        assert abs(val - exact) / exact <= 1e-12


def test_product_law_examples(cyl, cyl_e):
    args = (cyl.model, cyl.rho, cyl.phi, cyl_e)
    assert check_product_law(*args, 1.0, "w1", "w1", 30) <= 1e-9
    assert check_product_law(*args, 0.0, "w1", "w1", 30) == 0
    assert check_product_law(*args, 1.0, "w1", "1", 30) == 0


def test_commuting_formula_examples(cyl, cyl_e):
    w = Monomial.coordinate(cyl.model, "w1")
    args = (cyl.model, cyl.rho, cyl.phi, cyl_e)
    assert check_commuting_formula(*args, 1.0, w**2, 30) <= 1e-9
    assert check_commuting_formula(*args, 1.0, w**-1, 30) <= 1e-9
    assert check_commuting_formula(*args, 0.0, w**2, 30) == 0
    # rhs for 1/w is exp(-2) at w = e, t = 1
    assert lie_series(*args, 1.0, w**-1, 30)[0] == pytest.approx(math.exp(-2), rel=1e-12)


def test_laurent_monomial_at_zero_coordinate(wc2):
    p = wc2.model.point([], [1, 0])
    inv = Monomial.coordinate(wc2.model, "z2") ** -1
    with pytest.raises(DomainEscape):
        lie_series(wc2.model, wc2.rho, wc2.phi, p, 1.0, inv)


def test_composition_law(cyl, cyl_e, mixed):
    assert check_composition_law(cyl.model, cyl.rho, cyl.phi, cyl_e, 1.0) == 0
    for p in mixed.points:
        assert check_composition_law(mixed.model, mixed.rho, mixed.phi, p, 1.0, relative=True) <= 1e-9
        assert check_composition_law(mixed.model, mixed.rho, mixed.phi, p, 0.0) == 0


def test_no_overflow_at_large_t(mixed):
    for p in mixed.points:
        state = closed_flow(mixed.model, mixed.rho, mixed.phi, p, 100.0)
        assert np.all(np.isfinite(state.coords))
        assert np.all(np.isfinite(state.jac_unit))
