import numpy as np
import pytest

from polar_ray import ScalarField, build_model, regularity, validate_invariance
from polar_ray.errors import DimensionMismatch, NonInvariantPotential, ParseError
from polar_ray.model import parse_expression, require_invariant


@pytest.mark.parametrize(
    "n,k,r,B,m",
    [(1, 0, 0, [], 1), (1, 1, 2, [[1, 2]], 2), (2, 1, 1, [[3]], 2)],
)
def test_build_model_dimensions(n, k, r, B, m):
    model = build_model(n, k, r, B)
    assert model.m_complex == m
    assert model.real_dim == 2 * m


def test_build_model_rejects_bad_shapes():
    with pytest.raises(DimensionMismatch):
        build_model(1, 1, 2, [[1]])
    with pytest.raises(DimensionMismatch):
        build_model(1, 0, 0, [], m=2)
    with pytest.raises(DimensionMismatch):
        build_model(2, 2, 1, [[1], [2]])  # rank deficient weights


def test_parse_rejects_unknown_tokens():
    with pytest.raises(ParseError):
        parse_expression("sin(y1)")
    with pytest.raises(ParseError):
        parse_expression("y1 +")
    with pytest.raises(ParseError):
        parse_expression("q1")


def test_format_round_trip():
    f = ScalarField.parse("y1^2 + exp(y1)*z1*zb1")
    assert ScalarField.parse(f.text).expr == f.expr
    assert "^" in f.text


def test_invariance_examples(cyl, wc2):
    assert validate_invariance(cyl.model, ScalarField.parse("y1^2"), cyl.points)
    assert validate_invariance(wc2.model, ScalarField.parse("z1*zb1 + z2*zb2"), wc2.points)
    bad = ScalarField.parse("(z1 + zb1)/2")
    pts = [wc2.model.point([], [1.0, 0.0])]
    assert not validate_invariance(wc2.model, bad, pts)
    with pytest.raises(NonInvariantPotential):
        require_invariant(wc2.model, bad, pts)


def test_rotation_by_pi_flips_real_part(wc2):
    # independent oracle for the non-invariance example: rotate by pi by hand
    f = ScalarField.parse("(z1 + zb1)/2")
    p = wc2.model.point([], [1.0, 0.0])
    q = wc2.model.act([np.pi], p)
    assert f.real(p.env()) == pytest.approx(1.0)
    assert f.real(q.env()) == pytest.approx(-1.0)


def test_regularity_examples(cyl_e, cyl, wc2):
    assert regularity(cyl.model, cyl_e).stab_dim == 0
    origin = regularity(wc2.model, wc2.model.point([], [0, 0]))
    assert origin.stab_dim == 1 and not origin.is_regular
    assert regularity(wc2.model, wc2.model.point([], [1, 0])).is_regular


def test_point_real_round_trip(mixed):
    for p in mixed.points:
        q = mixed.model.point_from_real(p.to_real())
        assert np.allclose(q.coords, p.coords, atol=1e-14)


def test_zero_torus_coordinate_rejected(cyl):
    with pytest.raises(DimensionMismatch):
        cyl.model.point([0.0])
