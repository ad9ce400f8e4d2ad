"""Homogeneous gauges: power sums, radial gauges, extrema, admissibility."""

from __future__ import annotations

import numpy as np
import pytest

from opfield.homogeneous import (
    admissibility_probe,
    phi_extrema,
    power_sum,
    tau_radial,
    user_supplied,
)
from opfield.operators import as_operator, mat_exp
from opfield.polar import radial_part, sphere_sample


def test_power_sum_is_plain_one_norm_for_unit_powers():
    phi = power_sum((1.0, 1.0))
    assert phi(np.array([3.0, 4.0])) == pytest.approx(7.0)


def test_power_sum_square_root_branch():
    phi = power_sum((2.0,))
    assert phi(np.array([9.0])) == pytest.approx(3.0)


def test_power_sum_homogeneity_spot_value():
    # a = (1, 2), c = 4: phi(4^E (1,1)) = phi((4, 16)) = 4 + 4 = 8 = 4 phi((1,1))
    phi = power_sum((1.0, 2.0))
    e = phi.exponent
    x = np.array([1.0, 1.0])
    scaled = mat_exp(e, 4.0) @ x
    assert np.allclose(scaled, [4.0, 16.0])
    assert phi(scaled) == pytest.approx(8.0)
    assert phi(scaled) == pytest.approx(4.0 * phi(x))


def test_power_sum_homogeneity_property():
    phi = power_sum((1.0, 2.0))
    e = phi.exponent
    g = np.random.default_rng(0)
    xs = g.normal(size=(200, 2))
    for c in (0.3, 2.0, 11.0):
        scaled = xs @ mat_exp(e, c).T
        assert np.allclose(phi(scaled), c * phi(xs), rtol=1e-12)


def test_power_sum_rejects_bad_powers():
    with pytest.raises(ValueError):
        power_sum(())
    with pytest.raises(ValueError):
        power_sum((1.0, -2.0))


def test_power_sum_warns_below_one():
    with pytest.warns(UserWarning):
        power_sum((0.5, 1.0))


def test_tau_radial_extrema_are_unit():
    phi = tau_radial(as_operator(np.diag([1.0, 2.0])))
    assert phi.extrema() == (1.0, 1.0)


def test_tau_radial_scale_doubles_extrema():
    phi = tau_radial(as_operator(np.diag([1.0, 2.0])), scale=2.0)
    assert phi.extrema() == (2.0, 2.0)
    assert phi(np.array([0.0, 1.0])) == pytest.approx(
        2.0 * radial_part(np.diag([1.0, 2.0]), np.array([[0.0, 1.0]]))[0]
    )


def test_phi_extrema_match_dense_sampling_oracle():
    phi = power_sum((1.0, 1.0))
    lo, hi = phi_extrema(phi, n_samples=2000)
    # oracle: dense directional sweep of the 1-norm over the adapted sphere
    spec = phi.exponent
    theta = sphere_sample(spec, 100_000, np.random.default_rng(42))
    vals = np.abs(theta).sum(axis=1)
    assert lo <= vals.min() + 1e-9
    assert hi >= vals.max() - 1e-9
    assert lo == pytest.approx(vals.min(), rel=5e-3)
    assert hi == pytest.approx(vals.max(), rel=5e-3)


def test_extrema_sandwich_bounds_phi():
    # m_phi tau(x) <= phi(x) <= M_phi tau(x) on random points
    phi = power_sum((1.0, 2.0))
    lo, hi = phi.extrema()
    g = np.random.default_rng(1)
    xs = g.normal(size=(500, 2)) * np.exp(g.normal(size=(500, 1)))
    tau = radial_part(phi.exponent, xs)
    vals = phi(xs)
    assert np.all(vals >= lo * tau * (1 - 1e-9))
    assert np.all(vals <= hi * tau * (1 + 1e-9))


def test_admissibility_probe_finite_for_power_sum():
    phi = power_sum((1.0, 1.0))
    ratio = admissibility_probe(phi, n=500)
    assert np.isfinite(ratio)
    assert ratio > 0.0


def test_admissibility_probe_euclidean_lipschitz():
    # tau for E = I is ||x||, a 1-Lipschitz function: ratios stay near 1
    phi = tau_radial(as_operator(np.eye(2)))
    ratio = admissibility_probe(phi, beta=1.0, n=500)
    assert ratio <= 1.0 + 1e-6


def test_user_supplied_wraps_callable():
    spec = as_operator(np.eye(2))
    phi = user_supplied(lambda x: np.linalg.norm(x, axis=-1), spec, beta=1.0)
    assert phi(np.array([3.0, 4.0])) == pytest.approx(5.0)
    assert phi.kind == "user-supplied"
    assert phi.beta == 1.0


def test_batched_and_single_evaluation_agree():
    phi = power_sum((1.0, 2.0))
    xs = np.random.default_rng(2).normal(size=(5, 2))
    batch = phi(xs)
    for k in range(5):
        assert batch[k] == pytest.approx(phi(xs[k]))
