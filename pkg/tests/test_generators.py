"""Cell-law generators: exact transforms, log-CFs, and the scaling identity.

Closed-form oracles: the Chambers-Mallows-Stuck transform has CF
exp(-|u|^alpha); the Kanter transform has Laplace transform exp(-s^alpha);
the Levy constant satisfies the defining cosine integral.  Sampled laws are
checked against the module's exact log-CFs with the 4/sqrt(N) empirical-CF
threshold, and the spectral closed form is cross-checked by independent
quadrature of the radial cosine integral.
"""

import numpy as np
import pytest
import scipy.integrate

from opfield.errors import InvalidOperatorError, UnsupportedConfigError
from opfield.generators import (
    GeneratorSpec,
    gaussian,
    isotropic_pair_from_uniforms,
    log_cf,
    make_complex_isotropic,
    per_component,
    positive_stable_from_uniforms,
    sample_operator_stable,
    sample_positive_stable,
    sample_sas,
    sas_from_uniforms,
    sas_levy_constant,
    spectral,
    spectral_decomposition,
    verify_ops_scaling,
)
from opfield.operators import OperatorSpec, as_operator
from opfield.polar import radial_part

from conftest import ecf, rng, rotation


# -- scalar sampling transforms ---------------------------------------------------


@pytest.mark.parametrize("alpha", [0.7, 1.0, 1.5, 2.0])
def test_sas_samples_match_closed_form_cf(alpha):
    n = 40_000
    x = sample_sas(alpha, rng(11), size=n)
    for u in (0.3, 1.0, 2.5):
        gap = abs(ecf(x[:, None], np.array([u])) - np.exp(-abs(u) ** alpha))
        assert gap < 4.0 / np.sqrt(n)


def test_sas_alpha_two_is_variance_two_normal():
    x = sample_sas(2.0, rng(3), size=50_000)
    assert abs(np.var(x) - 2.0) < 0.05
    assert abs(np.mean(x)) < 0.03


def test_sas_antithetic_angle_flips_sign_exactly():
    u_angle = rng(5).random(256)
    u_exp = rng(6).random(256)
    for alpha in (0.7, 1.0, 1.6):
        a = sas_from_uniforms(alpha, u_angle, u_exp)
        b = sas_from_uniforms(alpha, 1.0 - u_angle, u_exp)
        np.testing.assert_allclose(b, -a, rtol=1e-9, atol=1e-12)


def test_sas_rejects_alpha_out_of_range():
    with pytest.raises(ValueError):
        sample_sas(0.0, rng(0), size=4)
    with pytest.raises(ValueError):
        sample_sas(2.1, rng(0), size=4)


@pytest.mark.parametrize("alpha", [0.4, 0.5, 0.8])
def test_positive_stable_laplace_transform(alpha):
    n = 40_000
    x = sample_positive_stable(alpha, rng(21), size=n)
    assert np.all(x > 0)
    for s in (0.5, 1.0, 3.0):
        lt = np.mean(np.exp(-s * x))
        assert abs(lt - np.exp(-(s**alpha))) < 4.0 / np.sqrt(n)


def test_positive_stable_half_matches_levy_quantiles():
    # at alpha = 1/2 the Kanter form is the Levy(0, 1/2) law whose CDF is
    # erfc(sqrt(1/(4 x))), hence quantile x_p = 1 / (4 erfcinv(p)^2)
    from scipy.special import erfcinv

    x = sample_positive_stable(0.5, rng(8), size=80_000)
    for p in (0.25, 0.5, 0.75):
        exact = 1.0 / (4.0 * erfcinv(p) ** 2)
        emp = np.quantile(x, p)
        assert abs(emp / exact - 1.0) < 0.03


def test_isotropic_pair_cf_depends_only_on_radius():
    n = 60_000
    alpha = 1.3
    pts = isotropic_pair_from_uniforms(alpha, rng(31).random((n, 4)))
    for r in (0.5, 1.5):
        probes = [r * np.array([np.cos(t), np.sin(t)]) for t in (0.0, 0.9, 2.2)]
        vals = [ecf(pts, u) for u in probes]
        for v in vals:
            assert abs(v - np.exp(-(r**alpha))) < 4.0 / np.sqrt(n)


def _one_minus_cos_tail(alpha):
    """integral_0^inf (1 - cos v) v^(-1-alpha) dv by splitting at v = 1: a smooth
    head, an exact power tail, and a cosine-weighted (QAWF) oscillatory tail."""
    head, _ = scipy.integrate.quad(
        lambda v: (1.0 - np.cos(v)) * v ** (-1.0 - alpha), 0.0, 1.0, limit=200
    )
    osc, _ = scipy.integrate.quad(
        lambda v: v ** (-1.0 - alpha), 1.0, np.inf, weight="cos", wvar=1.0
    )
    return head + 1.0 / alpha - osc


def test_levy_constant_matches_defining_integral():
    assert sas_levy_constant(1.0) == pytest.approx(np.pi / 2.0, rel=1e-12)
    for alpha in (0.5, 1.3, 1.9):
        assert sas_levy_constant(alpha) == pytest.approx(
            alpha * _one_minus_cos_tail(alpha), rel=1e-8
        )


# -- per-component generators -----------------------------------------------------


def test_per_component_log_cf_exact_values():
    gen = per_component([0.8, 1.5])
    psi = log_cf(gen)
    assert psi.exact
    u = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [2.0, 3.0]])
    expected = np.array([0.0, -1.0, -1.0, -(2.0**0.8) - 3.0**1.5])
    np.testing.assert_allclose(psi(u), expected, rtol=1e-12, atol=1e-15)


def test_per_component_exponent_is_reciprocal_diag():
    gen = per_component([0.8, 1.5])
    np.testing.assert_allclose(gen.exponent.entries, np.diag([1.25, 1.0 / 1.5]))


def test_per_component_samples_match_exact_cf():
    gen = per_component([0.8, 1.5])
    n = 30_000
    x = gen.sample(rng(41), size=n)
    psi = log_cf(gen)
    probes = np.array([[0.5, 0.0], [0.0, 1.0], [0.7, -0.4], [1.5, 1.0]])
    target = np.exp(psi(probes))
    for u, t in zip(probes, target):
        assert abs(ecf(x, u) - t) < 4.0 / np.sqrt(n)


def test_per_component_cauchy_marginal_quantiles():
    gen = per_component([1.0, 1.0])
    x = gen.sample(rng(43), size=60_000)
    # standard Cauchy quartiles are +/- 1
    assert abs(np.quantile(x[:, 0], 0.75) - 1.0) < 0.04
    assert abs(np.quantile(x[:, 1], 0.25) + 1.0) < 0.04


def test_stability_identity_under_folding():
    # n^(-B) (X_1 + ... + X_n) has the generator law itself
    gen = per_component([0.8, 1.5])
    psi = log_cf(gen)
    n_fold, n = 4, 30_000
    draws = gen.sample(rng(47), size=n * n_fold).reshape(n_fold, n, 2)
    folded = draws.sum(axis=0) @ gen.exponent.pow(1.0 / n_fold).T
    probes = np.array([[0.6, 0.0], [0.0, 0.8], [0.5, 0.5]])
    for u in probes:
        assert abs(ecf(folded, u) - np.exp(psi(u[None])[0])) < 4.0 / np.sqrt(n)


def test_generator_rejects_exponent_below_half():
    with pytest.raises(InvalidOperatorError):
        GeneratorSpec("per-component", 2, as_operator(0.4 * np.eye(2)), alphas=[2.0, 2.0])


# -- isotropic complex pairs ------------------------------------------------------


def test_complex_isotropic_log_cf_is_rotation_invariant_exactly():
    gen = make_complex_isotropic([1.2, 1.8])
    assert gen.isotropy_flag
    psi = log_cf(gen)
    u = rng(51).normal(size=(64, 4))
    base = psi(u)
    for theta in (0.3, 1.1, 2.7):
        c, s = np.cos(theta), np.sin(theta)
        v = u.copy()
        # rotate each complex pair (j, m + j) by the same angle
        v[:, 0], v[:, 2] = c * u[:, 0] - s * u[:, 2], s * u[:, 0] + c * u[:, 2]
        v[:, 1], v[:, 3] = c * u[:, 1] - s * u[:, 3], s * u[:, 1] + c * u[:, 3]
        np.testing.assert_allclose(psi(v), base, rtol=1e-12, atol=1e-14)


def test_complex_isotropic_samples_match_exact_cf():
    gen = make_complex_isotropic([1.2, 1.8])
    n = 30_000
    x = gen.sample(rng(53), size=n)
    assert x.shape == (n, 4)
    psi = log_cf(gen)
    probes = np.array([[0.8, 0.0, 0.0, 0.0], [0.4, 0.3, -0.2, 0.6]])
    for u in probes:
        assert abs(ecf(x, u) - np.exp(psi(u[None])[0])) < 4.0 / np.sqrt(n)


# -- spectral generators -----------------------------------------------------------


def _uniform_circle_generator(alpha=1.2, n_atoms=32):
    angles = (np.arange(n_atoms) + 0.5) * (2.0 * np.pi / n_atoms)
    atoms = np.column_stack([np.cos(angles), np.sin(angles)])
    weights = np.full(n_atoms, 1.0 / n_atoms)
    return spectral(atoms, weights, np.eye(2) / alpha)


def test_spectral_atoms_are_projected_onto_unit_sphere():
    b = np.diag([0.8, 1.4])
    raw = np.array([[2.0, 0.0], [0.0, -3.0], [1.0, 1.0]])
    gen = spectral(raw, [1.0, 2.0, 0.5], b)
    taus = radial_part(gen.exponent, gen.atoms)
    np.testing.assert_allclose(taus, 1.0, rtol=1e-9)
    # projection re-weights by the radial part, conserving the Levy measure
    orig_taus = radial_part(as_operator(b), raw)
    np.testing.assert_allclose(gen.weights, np.array([1.0, 2.0, 0.5]) * orig_taus)


def test_spectral_log_cf_matches_independent_quadrature():
    # oracle: psi(u) = sum_i w_i int_0^inf (cos(r <u, b^r zeta_i>) - 1) r^-2 dr
    # evaluated by adaptive quadrature in v = log r, independent of the module
    alpha = 1.2
    gen = _uniform_circle_generator(alpha, n_atoms=8)
    psi = log_cf(gen)
    u = np.array([0.9, -0.6])

    def one_atom(zeta):
        # substituting t = r^(1/alpha) turns the radial integral into
        # alpha * integral_0^inf (cos(z t) - 1) t^(-1-alpha) dt, z = <zeta, u>,
        # split as in the Levy-constant oracle with oscillation frequency z
        z = abs(float(zeta @ u))
        if z < 1e-30:
            return 0.0
        head, _ = scipy.integrate.quad(
            lambda t: (np.cos(z * t) - 1.0) * t ** (-1.0 - alpha), 0.0, 1.0, limit=200
        )
        osc, _ = scipy.integrate.quad(
            lambda t: t ** (-1.0 - alpha), 1.0, np.inf, weight="cos", wvar=z
        )
        return alpha * (head - 1.0 / alpha + osc)

    oracle = sum(w * one_atom(z) for z, w in zip(gen.atoms, gen.weights))
    assert psi(u[None])[0] == pytest.approx(oracle, rel=1e-9)


def test_spectral_uniform_atoms_give_near_isotropic_cf():
    gen = _uniform_circle_generator(alpha=1.2, n_atoms=32)
    psi = log_cf(gen)
    u = np.array([[1.3, 0.0]])
    base = psi(u)[0]
    # exact invariance under the 2 pi / 32 atom symmetry ...
    sym = psi(u @ rotation(2.0 * np.pi / 32).T)[0]
    assert sym == pytest.approx(base, rel=1e-12)
    # ... and near-invariance at a generic angle (32 atoms resolve alpha = 1.2)
    gen_angle = psi(u @ rotation(0.37).T)[0]
    assert gen_angle == pytest.approx(base, rel=1e-4)


def test_spectral_lepage_samples_match_exact_cf():
    gen = _uniform_circle_generator(alpha=1.2, n_atoms=16)
    n = 20_000
    x = sample_operator_stable(gen, rng(61), n_terms=1500, size=n)
    psi = log_cf(gen)
    probes = np.array([[0.7, 0.0], [0.3, 0.4], [-0.5, 0.8]])
    for u in probes:
        assert abs(ecf(x, u) - np.exp(psi(u[None])[0])) < 4.0 / np.sqrt(n)


def test_spectral_requires_full_atom_span_and_positive_weights():
    with pytest.raises(ValueError):
        spectral([[1.0, 0.0], [-1.0, 0.0]], [1.0, 1.0], np.eye(2) / 1.2)
    with pytest.raises(ValueError):
        spectral([[1.0, 0.0], [0.0, 1.0]], [1.0, -1.0], np.eye(2) / 1.2)
    with pytest.raises(InvalidOperatorError):
        spectral([[1.0, 0.0], [0.0, 1.0]], [1.0, 1.0], np.eye(2) / 2.0)


def test_lepage_warns_when_heavily_truncated():
    gen = _uniform_circle_generator(alpha=1.2, n_atoms=4)
    with pytest.warns(UserWarning, match="truncated"):
        gen.sample(rng(1), size=8, n_terms=50)


# -- scaling identity ---------------------------------------------------------------


def test_ops_scaling_defect_tiny_for_exact_generators():
    s_values = np.array([0.5, 1.0, 2.0, 7.3])
    u_values = rng(71).normal(size=(40, 2))
    for gen in (
        per_component([0.8, 1.5]),
        _uniform_circle_generator(alpha=1.2, n_atoms=32),
        gaussian(np.array([[2.0, 0.3], [0.3, 1.0]])),
    ):
        u = u_values if gen.dim == 2 else rng(72).normal(size=(40, gen.dim))
        assert verify_ops_scaling(gen, s_values, u) < 1e-10


def test_ops_scaling_trivial_at_s_one():
    gen = per_component([1.1])
    assert verify_ops_scaling(gen, [1.0], np.array([[0.4], [2.0]])) == 0.0


def test_ops_scaling_detects_wrong_exponent():
    # a Gaussian law scales with B = I/2 only; a wrong exponent leaves a defect
    wrong = gaussian(np.eye(2), exponent=0.8 * np.eye(2))
    defect = verify_ops_scaling(wrong, [4.0], np.array([[1.0, 0.0]]))
    assert defect > 0.1


# -- spectral measure round trip ---------------------------------------------------


def test_per_component_spectral_decomposition_closes_the_loop():
    alphas = [0.8, 1.5]
    gen = per_component(alphas)
    atoms, weights = spectral_decomposition(gen)
    assert atoms.shape == (4, 2)
    for j, a in enumerate(alphas):
        w = a**a / (2.0 * sas_levy_constant(a))
        assert np.any(np.all(np.isclose(atoms, np.eye(2)[j] / a), axis=1))
        np.testing.assert_allclose(weights[2 * j : 2 * j + 2], w)
    # rebuilding a spectral generator from the decomposition reproduces the CF
    rebuilt = spectral(atoms, weights, gen.exponent.entries)
    u = rng(81).normal(size=(32, 2))
    np.testing.assert_allclose(log_cf(rebuilt)(u), log_cf(gen)(u), rtol=1e-10)


def test_spectral_decomposition_rejects_unsupported_modes():
    with pytest.raises(UnsupportedConfigError):
        spectral_decomposition(gaussian(np.eye(2)))
    with pytest.raises(UnsupportedConfigError):
        spectral_decomposition(per_component([2.0, 1.5]))
    with pytest.raises(UnsupportedConfigError):
        spectral_decomposition(make_complex_isotropic([1.2]))
