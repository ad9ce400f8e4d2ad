"""Generalized polar coordinates: adapted norms, radial parts, envelopes."""

from __future__ import annotations

import numpy as np
import pytest

from opfield.errors import InvalidOperatorError
from opfield.polar import (
    adapted_norm,
    adapted_norm_many,
    polar,
    radial_envelope,
    radial_part,
    sphere_sample,
)


def test_adapted_norm_vanishes_at_origin():
    assert adapted_norm(np.diag([1.0, 2.0]), np.zeros(2)) == 0.0


def test_adapted_norm_isotropic_closed_form():
    # integral_0^1 t^(a-1) ||x|| dt = ||x|| / a
    g = np.random.default_rng(1)
    for a in (0.5, 1.0, 3.0):
        x = g.normal(size=3)
        expected = np.linalg.norm(x) / a
        assert adapted_norm(a * np.eye(3), x) == pytest.approx(expected, rel=1e-10)


def test_adapted_norm_diagonal_axis_closed_form():
    # along e_j the integrand is t^(a_j) ||e_j|| dt/t, so the norm is 1/a_j
    a = np.diag([1.0, 2.0])
    assert adapted_norm(a, np.array([1.0, 0.0])) == pytest.approx(1.0, rel=1e-10)
    assert adapted_norm(a, np.array([0.0, 1.0])) == pytest.approx(0.5, rel=1e-10)


def test_adapted_norm_many_matches_scalar_calls():
    a = np.array([[1.0, 0.5], [0.0, 2.0]])
    xs = np.random.default_rng(2).normal(size=(8, 2))
    batch = adapted_norm_many(a, xs)
    for k in range(8):
        assert batch[k] == pytest.approx(adapted_norm(a, xs[k]), rel=1e-12)


def test_radial_part_isotropic_closed_form():
    # solve ||r^(-aI) x||_(aI) = 1  =>  r = (||x|| / a)^(1/a)
    g = np.random.default_rng(3)
    for a in (0.5, 1.0, 2.5):
        xs = g.normal(size=(16, 2))
        tau = radial_part(a * np.eye(2), xs)
        expected = (np.linalg.norm(xs, axis=1) / a) ** (1.0 / a)
        assert np.allclose(tau, expected, rtol=1e-10)


def test_radial_part_is_even():
    a = np.array([[1.0, 1.0], [0.0, 1.0]])
    xs = np.random.default_rng(4).normal(size=(12, 2))
    assert np.allclose(radial_part(a, xs), radial_part(a, -xs), rtol=1e-10)


def test_radial_part_zero_rows_give_zero():
    out = radial_part(np.diag([1.0, 2.0]), np.zeros((3, 2)))
    assert np.all(out == 0.0)


def test_radial_scaling_law():
    # tau(s^A x) = s * tau(x) for diagonal and non-normal exponents
    g = np.random.default_rng(5)
    for entries in (np.diag([1.0, 2.0]), np.array([[1.5, 1.0], [0.0, 1.5]])):
        from opfield.operators import as_operator

        spec = as_operator(entries)
        xs = g.normal(size=(32, 2))
        base = radial_part(spec, xs)
        for s in (0.2, 1.0, 5.0):
            scaled = radial_part(spec, xs @ spec.pow(s).T)
            assert np.allclose(scaled, s * base, rtol=1e-9)


def test_polar_on_unit_sphere_is_identity():
    a = np.diag([1.0, 2.0])
    x = np.array([0.3, 0.4])
    # rescale x onto the adapted-norm unit sphere first
    tau = float(radial_part(a, x[None, :])[0])
    from opfield.operators import mat_exp

    direction = mat_exp(a, 1.0 / tau) @ x
    assert adapted_norm(a, direction) == pytest.approx(1.0, rel=1e-9)
    dec = polar(a, direction)
    assert dec.radial == pytest.approx(1.0, rel=1e-9)
    assert np.allclose(dec.direction, direction, rtol=1e-8)


def test_polar_roundtrip_recomposes_point():
    from opfield.operators import mat_exp

    a = np.array([[1.0, 0.7], [0.0, 2.0]])
    g = np.random.default_rng(6)
    for _ in range(10):
        x = g.normal(size=2) * g.choice([0.01, 1.0, 100.0])
        dec = polar(a, x)
        recomposed = mat_exp(a, dec.radial) @ dec.direction
        assert np.allclose(recomposed, x, rtol=1e-8, atol=1e-12)


def test_polar_rejects_origin():
    with pytest.raises(ValueError):
        polar(np.eye(2), np.zeros(2))


def test_polar_requires_positive_spectrum():
    with pytest.raises(InvalidOperatorError):
        radial_part(np.diag([1.0, -0.5]), np.ones((1, 2)))


def test_sphere_sample_lies_on_unit_sphere():
    a = np.diag([1.0, 2.0])
    pts = sphere_sample(a, 64, np.random.default_rng(7))
    assert pts.shape[1] == 2
    assert np.allclose(radial_part(a, pts), 1.0, rtol=1e-8)


def test_radial_envelope_isotropic_power_law():
    # for A = a I both envelope branches scale like ||x||^(1/a): doubling the
    # point multiplies lower and upper bounds by exactly 2^(1/a)
    from opfield.operators import as_operator

    a = as_operator(2.0 * np.eye(2))
    x = np.array([0.3, -0.7])
    lo1, hi1 = radial_envelope(a, x, delta=1e-9)
    lo2, hi2 = radial_envelope(a, 2.0 * x, delta=1e-9)
    assert lo2 / lo1 == pytest.approx(2.0 ** 0.5, rel=1e-9)
    assert hi2 / hi1 == pytest.approx(2.0 ** 0.5, rel=1e-9)
    tau = float(radial_part(a, x[None, :])[0])
    assert lo1 <= tau <= hi1


def test_radial_envelope_contains_radial_part():
    from opfield.operators import as_operator

    a = as_operator(np.diag([1.0, 2.0]))
    g = np.random.default_rng(9)
    xs = g.normal(size=(40, 2)) * np.exp(g.normal(size=(40, 1)))
    tau = radial_part(a, xs)
    for k in range(40):
        lo, hi = radial_envelope(a, xs[k], delta=0.05)
        assert lo <= tau[k] <= hi


def test_radial_envelope_contains_one_on_sphere():
    from opfield.operators import as_operator

    a = as_operator(np.diag([1.0, 2.0]))
    pts = sphere_sample(a, 32, np.random.default_rng(10))
    for x in pts:
        lo, hi = radial_envelope(a, x, delta=0.05)
        assert lo <= 1.0 <= hi
