import math

import numpy as np
import pytest

from src.dapoly import (
    AlgebraSpec,
    TaylorPoly,
    atan2,
    compose,
    cos,
    embed,
    exp,
    from_json,
    make_variable,
    sin,
    sqrt,
    to_json,
    wrap_angle,
)
from src.exceptions import DomainError


def _random_poly(spec: AlgebraSpec, rng: np.random.Generator) -> TaylorPoly:
    return TaylorPoly(spec, rng.normal(size=spec.size))


def test_affine_products_are_exact(spec2: AlgebraSpec) -> None:
    x = make_variable(spec2, 0, center=1.5, scale=0.2)
    y = make_variable(spec2, 1, center=-0.5, scale=0.1)
    product = x * y + 2.0 * x - y / 4.0 + 1.0
    for point in ([0.0, 0.0], [1.0, -1.0], [0.3, 0.7]):
        xv, yv = 1.5 + 0.2 * point[0], -0.5 + 0.1 * point[1]
        assert product.eval(point) == pytest.approx(xv * yv + 2.0 * xv - yv / 4.0 + 1.0, abs=1e-14)


def test_elementary_functions_match_floats_near_the_center(spec3: AlgebraSpec) -> None:
    x = make_variable(spec3, 0, center=0.4, scale=1.0)
    y = make_variable(spec3, 1, center=2.0, scale=1.0)
    z = make_variable(spec3, 2, center=1.2, scale=1.0)
    poly = sin(x) * y + sqrt(z) / y + atan2(y, x) + exp(z) * cos(x)
    point = np.array([1e-3, -2e-3, 1.5e-3])
    xv, yv, zv = 0.4 + point[0], 2.0 + point[1], 1.2 + point[2]
    expected = math.sin(xv) * yv + math.sqrt(zv) / yv + math.atan2(yv, xv) + math.exp(zv) * math.cos(xv)
    assert poly.eval(point) == pytest.approx(expected, abs=1e-9)


def test_bounds_enclose_every_value() -> None:
    rng = np.random.default_rng(3)
    spec = AlgebraSpec(order=3, nvars=2)
    violations = 0
    # 10^5 polynomial and point pairs
    for _ in range(1000):
        poly = _random_poly(spec, rng)
        bound = poly.bound()
        for point in rng.uniform(-1.0, 1.0, size=(100, 2)):
            value = poly.eval(point)
            violations += not (bound.lower - 1e-12 <= value <= bound.upper + 1e-12)
    assert violations == 0


def test_first_order_bound_is_tight() -> None:
    spec = AlgebraSpec(order=1, nvars=3)
    poly = TaylorPoly(spec, [1.0, 0.5, -2.0, 0.25])
    bound = poly.bound()
    assert bound.lower == pytest.approx(1.0 - 2.75, abs=1e-12)
    assert bound.upper == pytest.approx(1.0 + 2.75, abs=1e-12)


def test_truncation_error_scales_with_the_order() -> None:
    spec = AlgebraSpec(order=2, nvars=1)

    def error(h: float) -> float:
        return abs(exp(make_variable(spec, 0, scale=h)).eval([1.0]) - math.exp(h))

    assert error(0.1) / error(0.05) >= 6.0


def test_substitute_affine_is_exact(spec3: AlgebraSpec) -> None:
    rng = np.random.default_rng(5)
    poly = _random_poly(spec3, rng)
    moved = poly.substitute_affine(1, 2.0 / 3.0, 1.0 / 3.0)
    for point in rng.uniform(-1.0, 1.0, size=(10, 3)):
        shifted = point.copy()
        shifted[1] = 2.0 / 3.0 + point[1] / 3.0
        assert moved.eval(point) == pytest.approx(poly.eval(shifted), abs=1e-12)


def test_gradient_and_hessian(spec2: AlgebraSpec) -> None:
    x = make_variable(spec2, 0)
    y = make_variable(spec2, 1)
    poly = x * x + 3.0 * x * y + 2.0 * y + 5.0
    assert poly.cst == 5.0
    np.testing.assert_allclose(poly.gradient, [0.0, 2.0])
    np.testing.assert_allclose(poly.hessian(), [[2.0, 3.0], [3.0, 0.0]])
    np.testing.assert_allclose(poly.partial(0).gradient, [2.0, 3.0])


def test_compose_and_embed(spec2: AlgebraSpec) -> None:
    x = make_variable(spec2, 0)
    y = make_variable(spec2, 1)
    one = AlgebraSpec(order=2, nvars=1)
    u = make_variable(one, 0)
    composed = compose(x * y, [u + 1.0, u - 1.0])
    assert composed.eval([0.5]) == pytest.approx(0.25 - 1.0)
    wide = AlgebraSpec(order=2, nvars=4)
    lifted = embed(x * y + x, wide, var_offset=2)
    assert lifted.eval([0.9, -0.4, 0.3, 0.2]) == pytest.approx(0.3 * 0.2 + 0.3)


def test_atan2_quadrants(spec2: AlgebraSpec) -> None:
    for y0, x0 in ((1.0, 1.0), (1.0, -1.0), (-1.0, -1.0), (-1.0, 1.0)):
        y = make_variable(spec2, 0, center=y0, scale=1e-3)
        x = make_variable(spec2, 1, center=x0, scale=1e-3)
        assert atan2(y, x).cst == pytest.approx(math.atan2(y0, x0))
    with pytest.raises(DomainError):
        atan2(make_variable(spec2, 0), make_variable(spec2, 1))


def test_wrap_angle() -> None:
    assert wrap_angle(2.5 * math.pi) == pytest.approx(0.5 * math.pi)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert wrap_angle(0.5) == 0.5


def test_domain_errors(spec2: AlgebraSpec) -> None:
    x = make_variable(spec2, 0)
    with pytest.raises(DomainError):
        sqrt(x)
    with pytest.raises(DomainError):
        x.log()
    with pytest.raises(DomainError):
        x + make_variable(AlgebraSpec(order=3, nvars=2), 0)
    with pytest.raises(DomainError):
        make_variable(spec2, 2)
    with pytest.raises(DomainError):
        AlgebraSpec(order=0, nvars=2)


def test_json_preserves_coefficients(spec3: AlgebraSpec) -> None:
    poly = _random_poly(spec3, np.random.default_rng(11))
    np.testing.assert_array_equal(from_json(to_json(poly)).coeffs, poly.coeffs)
