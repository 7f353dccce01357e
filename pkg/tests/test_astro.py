import math

import numpy as np
import pytest

from src.astro import (
    AltEquinoctialState,
    CartesianState,
    KeplerianState,
    altequi_to_cart,
    cart_to_altequi,
    cart_to_kep,
    elevation,
    epoch_from_iso,
    gmst,
    iso_from_epoch,
    kep_to_altequi,
    kep_to_cart,
    kepler_propagate,
    lambert,
    site_zenith,
    solve_equinoctial_kepler,
)
from src.constants import MU_EARTH
from src.dapoly import AlgebraSpec, make_variable
from src.data_classes import Site
from src.exceptions import DomainError, LambertError


def _energy(cart: CartesianState) -> float:
    r = np.array(cart.r, dtype=float)
    v = np.array(cart.v, dtype=float)
    return 0.5 * float(v @ v) - MU_EARTH / float(np.linalg.norm(r))


def test_cartesian_roundtrip(gto: KeplerianState, leo: KeplerianState) -> None:
    for kep in (gto, leo):
        cart = np.array(kep_to_cart(kep), dtype=float)
        back = np.array(altequi_to_cart(cart_to_altequi(CartesianState(*cart))), dtype=float)
        np.testing.assert_allclose(back, cart, rtol=1e-9, atol=1e-9)


def test_keplerian_roundtrip(gto: KeplerianState) -> None:
    cart = kep_to_cart(gto)
    kep = cart_to_kep(cart)
    assert kep.a == pytest.approx(gto.a, rel=1e-9)
    assert kep.e == pytest.approx(gto.e, abs=1e-9)
    assert kep.i == pytest.approx(gto.i, abs=1e-9)
    np.testing.assert_allclose(np.array(kep_to_cart(kep), dtype=float), np.array(cart, dtype=float), atol=1e-7)


def test_equinoctial_elements_of_the_target(gto: KeplerianState) -> None:
    ae = kep_to_altequi(gto)
    assert ae.n == pytest.approx(math.sqrt(MU_EARTH / gto.a ** 3))
    assert math.hypot(ae.f, ae.g) == pytest.approx(gto.e)
    assert math.hypot(ae.h, ae.k) == pytest.approx(math.tan(gto.i / 2.0))


def test_non_elliptic_input_is_rejected() -> None:
    with pytest.raises(DomainError):
        kep_to_altequi(KeplerianState(7000.0, 1.2, 0.1, 0.0, 0.0, 0.0))
    with pytest.raises(DomainError):
        kep_to_altequi(KeplerianState(-7000.0, 0.1, 0.1, 0.0, 0.0, 0.0))
    with pytest.raises(DomainError):
        altequi_to_cart(AltEquinoctialState(1e-3, 0.8, 0.8, 0.0, 0.0, 0.0))


def test_kepler_equation() -> None:
    f, g = 0.3, -0.4
    for lam in np.linspace(-3.0, 3.0, 13):
        F = solve_equinoctial_kepler(lam, f, g)
        assert F - f * math.sin(F) + g * math.cos(F) == pytest.approx(lam, abs=1e-12)


def test_two_body_energy_is_conserved(gto: KeplerianState) -> None:
    cart = kep_to_cart(gto)
    energy = _energy(cart)
    for dt in (600.0, 3600.0, 36000.0, 86400.0 * 3):
        assert _energy(kepler_propagate(cart, dt)) == pytest.approx(energy, rel=1e-12)


def test_lambert_recovers_the_velocity() -> None:
    rng = np.random.default_rng(17)
    checked = 0
    for _ in range(100):
        a = rng.uniform(7000.0, 40000.0)
        e = rng.uniform(0.0, 0.7)
        if a * (1.0 - e) < 6700.0:
            continue
        kep = KeplerianState(a, e, rng.uniform(0.0, math.radians(80.0)), *rng.uniform(-math.pi, math.pi, 3))
        period = 2.0 * math.pi * math.sqrt(a ** 3 / MU_EARTH)
        dt = rng.uniform(0.05, 0.9) * period
        start = kep_to_cart(kep)
        end = kepler_propagate(start, dt)
        r1, r2 = np.array(start.r, dtype=float), np.array(end.r, dtype=float)
        sine = np.linalg.norm(np.cross(r1, r2)) / (np.linalg.norm(r1) * np.linalg.norm(r2))
        if sine < 0.05:
            continue
        v1, v2 = lambert(r1, r2, dt)
        np.testing.assert_allclose(v1, np.array(start.v, dtype=float), atol=1e-7)
        np.testing.assert_allclose(v2, np.array(end.v, dtype=float), atol=1e-7)
        checked += 1
    assert checked > 50


def test_lambert_errors() -> None:
    r1 = [7000.0, 0.0, 0.0]
    with pytest.raises(LambertError):
        lambert(r1, [14000.0, 0.0, 0.0], 1000.0)
    with pytest.raises(LambertError):
        lambert(r1, [0.0, 7000.0, 0.0], 0.0)


def test_lambert_over_polynomials(gto: KeplerianState) -> None:
    spec = AlgebraSpec(order=2, nvars=3)
    start = kep_to_cart(gto)
    end = kepler_propagate(start, 3600.0)
    r2 = [make_variable(spec, j, center=float(end.r[j]), scale=1.0) for j in range(3)]
    v1, _ = lambert(np.array(start.r, dtype=float), r2, 3600.0)
    np.testing.assert_allclose([c.cst for c in v1], np.array(start.v, dtype=float), atol=1e-7)
    shifted = np.array(end.r, dtype=float) + np.array([0.5, -0.3, 0.2])
    exact, _ = lambert(np.array(start.r, dtype=float), shifted, 3600.0)
    np.testing.assert_allclose([c.eval([0.5, -0.3, 0.2]) for c in v1], exact, atol=1e-9)


def test_polynomial_conversion_gradient(gto: KeplerianState) -> None:
    spec = AlgebraSpec(order=1, nvars=1)
    a = make_variable(spec, 0, center=gto.a, scale=1.0)
    cart = kep_to_cart(gto._replace(a=a))
    step = 1e-2
    plus = np.array(kep_to_cart(gto._replace(a=gto.a + step)), dtype=float)
    minus = np.array(kep_to_cart(gto._replace(a=gto.a - step)), dtype=float)
    numeric = (plus - minus) / (2.0 * step)
    np.testing.assert_allclose([c.gradient[0] for c in cart], numeric, rtol=1e-5, atol=1e-10)


def test_time_scale() -> None:
    assert epoch_from_iso("2000-01-01T12:00:00") == 0.0
    assert epoch_from_iso("2000-01-02T12:00:00Z") == pytest.approx(86400.0, abs=1e-9)
    stamp = "2019-02-25T18:49:01.148000"
    assert iso_from_epoch(epoch_from_iso(stamp)) == stamp
    for epoch in (0.0, 1e8, -3e7):
        assert 0.0 <= gmst(epoch) < 2.0 * math.pi


def test_elevation_of_an_object_overhead() -> None:
    site = Site.from_degrees("equator", 0.0, 0.0, 0.0)
    epoch = 1e6
    overhead = 42000.0 * site_zenith(site, epoch)
    assert elevation(overhead, site, epoch) == pytest.approx(math.pi / 2.0, abs=1e-9)
    assert elevation(-overhead, site, epoch) < 0.0
