import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from polar_ray import (
    ScalarField,
    build_frame,
    build_model,
    build_P_t,
    check_moment_identity,
    closed_flow,
    lie_series,
    moment_map,
    poisson_bracket,
    principal_angles,
)
from polar_ray.flow import required_truncation, coordinate_eigenvalues
from polar_ray.model import require_invariant

MODEL = build_model(2, 1, 1, [[3]])
RHO = require_invariant(MODEL, ScalarField.parse("y1^2 + exp(y1)*z1*zb1"), [MODEL.point([1.0], [0.5])])
PHI = ScalarField.parse("(mu1^2 + mu1*mu2 + mu2^2)/2")

coord = st.floats(-1.5, 1.5, allow_nan=False)
angle = st.floats(0, 2 * np.pi, allow_nan=False)
radius = st.floats(0.05, 1.0, allow_nan=False)
SETTINGS = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])


def _point(y, th, r, a):
    return MODEL.point([np.exp(y + 1j * th)], [r * np.exp(1j * a)])


@SETTINGS
@given(st.lists(st.floats(-10, 10), min_size=8, max_size=8), coord, angle, radius, angle)
def test_bracket_antisymmetric(vals, y, th, r, a):
    frame = build_frame(MODEL, RHO, _point(y, th, r, a))
    f, g = np.array(vals[:4]), np.array(vals[4:])
    scale = 1e-9 * (1 + np.abs(vals).max() ** 2)
    assert abs(poisson_bracket(frame, f, g) + poisson_bracket(frame, g, f)) <= scale
    assert abs(poisson_bracket(frame, f, f)) <= scale


@SETTINGS
@given(coord, angle, radius, angle, st.lists(angle, min_size=2, max_size=2))
def test_moment_map_torus_invariant(y, th, r, a, s):
    p = _point(y, th, r, a)
    q = MODEL.act(s, p)
    assert np.allclose(moment_map(MODEL, RHO, p).mu, moment_map(MODEL, RHO, q).mu, atol=1e-12)


@SETTINGS
@given(coord, angle, radius, angle)
def test_moment_identity_random_points(y, th, r, a):
    assert check_moment_identity(MODEL, RHO, _point(y, th, r, a)) <= 1e-7


@SETTINGS
@given(coord, angle, radius, angle, st.floats(0, 5))
def test_flow_equals_series(y, th, r, a, t):
    p = _point(y, th, r, a)
    lam = np.abs(coordinate_eigenvalues(MODEL, RHO, PHI, p))
    closed = closed_flow(MODEL, RHO, PHI, p, t).coords
    for i, name in enumerate(["w1", "z1"]):
        N = required_truncation(lam[i], t)
        val, _ = lie_series(MODEL, RHO, PHI, p, t, name, N)
        assert abs(val - closed[i]) <= 1e-9 * (1 + abs(closed[i]))


@SETTINGS
@given(coord, angle, radius, angle, st.floats(0, 20))
def test_P_t_lagrangian_and_transverse(y, th, r, a, t):
    p = _point(y, th, r, a)
    P = build_P_t(MODEL, RHO, PHI, p, t)
    assert P.d == 2
    assert P.omega_residual(build_frame(MODEL, RHO, p).omega) <= 1e-9
    assert principal_angles(P, P.conj())[0] > 1e-6
