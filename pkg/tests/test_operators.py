"""Exponent-matrix algebra: powers s^A, norm envelopes, commutation tests."""

from __future__ import annotations

import math

import numpy as np
import pytest

from opfield.errors import InvalidOperatorError
from opfield.operators import (
    OperatorSpec,
    as_operator,
    commutes,
    is_multiple_of_identity,
    mat_exp,
    matrix_powers,
    norm_bound,
)


def series_power(a: np.ndarray, s: float, terms: int = 30) -> np.ndarray:
    """Oracle: s^A = exp(ln(s) A) summed directly from the power series."""
    x = math.log(s) * np.asarray(a, dtype=float)
    acc = np.eye(a.shape[0])
    term = np.eye(a.shape[0])
    for k in range(1, terms):
        term = term @ x / k
        acc = acc + term
    return acc


def test_identity_scale_gives_identity_matrix():
    for entries in ([[2.0]], np.diag([1.0, 2.0]), [[1.5, 1.0], [0.0, 1.5]]):
        assert np.allclose(mat_exp(entries, 1.0), np.eye(len(entries)))


def test_diagonal_power_is_elementwise():
    a = np.diag([0.5, 1.0, 2.0])
    for s in (0.25, 1.7, 9.0):
        assert np.allclose(mat_exp(a, s), np.diag([s**0.5, s, s**2]), rtol=1e-13)


def test_skew_power_is_rotation_by_log_scale():
    a = np.array([[0.0, -1.0], [1.0, 0.0]])
    for s in (0.5, 2.0, 7.3):
        theta = math.log(s)
        expected = np.array(
            [[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]]
        )
        assert np.allclose(mat_exp(a, s), expected, atol=1e-12)
        assert np.allclose(mat_exp(a, s), series_power(a, s), atol=1e-12)


def test_power_strategies_agree_on_jordan_block():
    entries = np.array([[1.5, 1.0], [0.0, 1.5]])
    tagged = OperatorSpec(entries, jordan_blocks=((1.5, 2),))
    plain = OperatorSpec(entries)
    for s in (0.3, 1.0, 4.2):
        assert np.allclose(tagged.pow(s), series_power(entries, s), atol=1e-11)
        assert np.allclose(plain.pow(s), series_power(entries, s), atol=1e-10)


def test_pow_many_matches_scalar_pow():
    spec = as_operator(np.array([[1.0, 0.3], [0.0, 2.0]]))
    scales = np.array([0.1, 0.9, 3.7, 20.0])
    stack = spec.pow_many(scales)
    for k, s in enumerate(scales):
        assert np.allclose(stack[k], spec.pow(s), rtol=1e-12)


def test_matrix_powers_zero_convention_and_pow_domain():
    # matrix_powers maps v = 0 to the zero matrix (keeps difference kernels
    # finite at their singular points); scalar pow rejects s <= 0 outright
    spec = as_operator(np.diag([0.5, 2.0]))
    stack = matrix_powers(spec, np.array([1.0, 0.0, 4.0]))
    assert np.allclose(stack[0], np.eye(2))
    assert np.all(stack[1] == 0.0)
    assert np.allclose(stack[2], np.diag([2.0, 16.0]))
    with pytest.raises(ValueError):
        spec.pow(-2.0)
    with pytest.raises(ValueError):
        spec.pow(0.0)


def test_norm_bound_dominates_isotropic_norm():
    # exact operator norm of s^I is s
    bound = norm_bound(np.eye(2), 2.0, 0.1)
    assert bound >= 2.0


def test_norm_bound_dominates_diagonal_norm():
    # exact operator norm of 4^diag(1,2) is 16
    bound = norm_bound(np.diag([1.0, 2.0]), 4.0, 0.01)
    assert bound >= 16.0


def test_norm_bound_envelopes_jordan_growth():
    # ||s^A|| for a Jordan block grows like s * (1 + ln s); the fitted bound
    # s^(lambda + delta) must dominate the exact norm on a wide scale range
    a = np.array([[1.0, 1.0], [0.0, 1.0]])
    for s in np.geomspace(1.0, 1e5, 25):
        exact = np.linalg.norm(mat_exp(a, s), 2)
        assert norm_bound(a, s, 0.2) >= exact
        assert exact >= s * 1.0  # sanity: super-linear growth side


def test_norm_bound_covers_small_scales():
    a = np.diag([0.5, 1.5])
    for s in np.geomspace(1e-6, 1.0, 17):
        exact = np.linalg.norm(mat_exp(a, s), 2)
        assert norm_bound(a, s, 0.05) >= exact


def test_commutes_scalar_multiple_and_diagonal():
    b = np.array([[2.0 / 3.0, 0.0], [0.0, 2.0 / 3.0]])
    assert commutes(0.75 * b, b)
    assert commutes(np.diag([1.0, 2.0]), np.diag([3.0, 4.0]))


def test_commutes_rejects_generic_pair():
    g = np.random.default_rng(7)
    found = False
    for _ in range(20):
        a, b = g.normal(size=(2, 3, 3))
        if np.linalg.norm(a @ b - b @ a) > 1e-6:
            assert not commutes(a, b)
            found = True
            break
    assert found


def test_is_multiple_of_identity():
    assert is_multiple_of_identity(2.5 * np.eye(3)) == pytest.approx(2.5)
    assert is_multiple_of_identity(np.diag([1.0, 2.0])) is None


def test_spectral_attributes():
    spec = as_operator(np.array([[1.0, 0.0], [0.0, 3.0]]))
    assert spec.lambda_min == pytest.approx(1.0)
    assert spec.lambda_max == pytest.approx(3.0)
    assert spec.trace == pytest.approx(4.0)
    assert spec.has_positive_spectrum
    assert not as_operator(np.diag([-1.0, 2.0])).has_positive_spectrum


def test_transpose_roundtrip():
    spec = as_operator(np.array([[1.0, 2.0], [0.0, 3.0]]))
    assert np.allclose(spec.transpose().entries, spec.entries.T)
    assert spec.transpose().transpose() is spec


def test_jordan_metadata_validation():
    with pytest.raises(InvalidOperatorError):
        OperatorSpec(np.eye(2), jordan_blocks=((1.0, 3),))
    with pytest.raises(InvalidOperatorError):
        OperatorSpec(np.array([[1.0, 2.0], [0.0, 1.0]]), jordan_blocks=((1.0, 2),))


def test_as_operator_is_idempotent_and_validates():
    spec = as_operator([[2.0]])
    assert spec.entries.shape == (1, 1)
    assert as_operator(spec) is spec
    with pytest.raises(InvalidOperatorError):
        as_operator([1.0, 2.0])
    with pytest.raises(InvalidOperatorError):
        as_operator([[np.inf]])
