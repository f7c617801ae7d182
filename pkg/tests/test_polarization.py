import math

import numpy as np
import pytest

from polar_ray import (
    build_D_and_I,
    build_P_J,
    build_P_mix,
    build_P_t,
    build_frame,
    convergence_sweep,
    principal_angles,
)
from polar_ray.errors import AmbiguousRank, DimensionMismatch
from polar_ray.polarization import ComplexSubspace, orth


def _angle_between_lines(u, v):
    # |<u, v>| / (|u| |v|) = cos(angle), computed by hand
    c = abs(np.vdot(u, v)) / (np.linalg.norm(u) * np.linalg.norm(v))
    return math.acos(min(1.0, c))


def test_P_J_examples(plane, cyl, wc2):
    model, _ = plane
    P = build_P_J(model)
    assert P.d == 1 and np.allclose(P.basis[:, 0] / P.basis[0, 0], [1, 1j])
    P = build_P_J(cyl.model)
    assert np.allclose(P.basis[:, 0] / P.basis[0, 0], [1, 1j])
    assert build_P_J(wc2.model).d == 2


def test_D_and_I_examples(cyl, cyl_e, wc2, mixed):
    D, I = build_D_and_I(cyl.model, cyl.rho, cyl_e)
    assert D.d == I.d == 1
    assert principal_angles(D, I)[0] == pytest.approx(0, abs=1e-12)
    assert abs(D.basis[0, 0]) < 1e-12
    D, I = build_D_and_I(wc2.model, wc2.rho, wc2.model.point([], [0, 0]))
    assert I.d == 0 and D.d == 4
    for p in mixed.regular_points():
        D, I = build_D_and_I(mixed.model, mixed.rho, p)
        assert D.d == 2 and I.d == 2
        assert D.contains(I)


def test_P_mix_cylinder(cyl, cyl_e):
    P, rep = build_P_mix(cyl.model, cyl.rho, cyl_e)
    assert (rep.dim, rep.real_rank, rep.is_lagrangian) == (1, 1, True)
    assert abs(P.basis[0, 0]) < 1e-12


@pytest.mark.parametrize("name", ["cyl", "wc2", "mixed"])
def test_P_mix_regular_points(name, request):
    s = request.getfixturevalue(name)
    for p in s.regular_points():
        _, rep = build_P_mix(s.model, s.rho, p)
        assert rep.dim == s.model.m_complex
        assert rep.lagrangian_residual <= 1e-9
        assert rep.real_rank == s.model.n_torus


def test_P_mix_non_regular_is_reported(wc2, mixed):
    _, rep = build_P_mix(wc2.model, wc2.rho, wc2.model.point([], [0, 0]))
    assert not rep.is_regular
    _, rep = build_P_mix(mixed.model, mixed.rho, mixed.points[-1])
    assert not rep.is_regular


def test_P_t_examples(cyl, cyl_e):
    P0 = build_P_t(cyl.model, cyl.rho, cyl.phi, cyl_e, 0.0)
    assert principal_angles(P0, build_P_J(cyl.model))[-1] <= 1e-10
    P1 = build_P_t(cyl.model, cyl.rho, cyl.phi, cyl_e, 1.0)
    # kernel of dw^t = 2 dy + i dtheta is spanned by (1/2, i)
    assert _angle_between_lines(P1.basis[:, 0], np.array([0.5, 1j])) <= 1e-12


@pytest.mark.parametrize("name", ["cyl", "wc2", "mixed"])
def test_P_t_lagrangian_and_kaehler(name, request):
    s = request.getfixturevalue(name)
    for p in s.regular_points():
        omega = build_frame(s.model, s.rho, p).omega
        for t in s.scenario.t_grid:
            P = build_P_t(s.model, s.rho, s.phi, p, t)
            assert P.omega_residual(omega) <= 1e-9
            assert principal_angles(P, P.conj())[0] > 1e-6


def test_principal_angles_basic(cyl):
    P = build_P_J(cyl.model)
    assert np.allclose(principal_angles(P, P), 0)
    with pytest.raises(DimensionMismatch):
        principal_angles(P, ComplexSubspace(np.eye(2, dtype=complex)))


def test_cylinder_angles_closed_form(cyl, cyl_e):
    P_mix, _ = build_P_mix(cyl.model, cyl.rho, cyl_e)
    P0 = build_P_t(cyl.model, cyl.rho, cyl.phi, cyl_e, 0.0)
    assert principal_angles(P0, P_mix)[-1] == pytest.approx(math.pi / 4, abs=1e-12)
    for t in (0.0, 1.0, 10.0, 100.0):
        Pt = build_P_t(cyl.model, cyl.rho, cyl.phi, cyl_e, t)
        hand = _angle_between_lines(np.array([1 / (1 + t), 1j]), np.array([0, 1]))
        assert principal_angles(Pt, P_mix)[-1] == pytest.approx(hand, abs=1e-12)
        assert hand == pytest.approx(math.atan(1 / (1 + t)), abs=1e-12)


def test_convergence_sweep_cylinder(cyl, cyl_e):
    table = convergence_sweep(cyl.model, cyl.rho, cyl.phi, cyl_e, [0, 1, 10, 100])
    assert np.allclose(table.angle_max, [math.atan(1 / (1 + t)) for t in table.t], atol=1e-12)
    assert 0.98 <= table.angle_max[-1] * 101 <= 1.02
    assert table.strictly_decreasing()
    assert table.fitted_rate() == pytest.approx((1.0, 1.0))
    assert table.rate_bound_holds()


def test_convergence_weighted_point(wc2):
    # at z = (1, 0): mu = 1, rate 2t in the z1 direction, angle arctan(1/(1+2t))
    p = wc2.model.point([], [1, 0])
    table = convergence_sweep(wc2.model, wc2.rho, wc2.phi, p, [0, 1, 5, 10, 100])
    assert np.allclose(table.angle_max, [math.atan(1 / (1 + 2 * t)) for t in table.t], atol=1e-10)


def test_convergence_sweep_rejects_unsorted_grid(cyl, cyl_e):
    with pytest.raises(ValueError):
        convergence_sweep(cyl.model, cyl.rho, cyl.phi, cyl_e, [1, 0])


def test_ambiguous_rank_fails_loudly():
    M = np.array([[1, 1], [0, 1e-8]], dtype=complex)  # nearly parallel columns
    with pytest.raises(AmbiguousRank) as info:
        orth(M)
    assert info.value.candidates == (1, 2)
