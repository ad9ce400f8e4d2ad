"""Shared fixtures: canonical field configurations and small statistics helpers.

Two benchmark families recur throughout the suite:

* the anisotropic moving-average benchmark on R^2 (diagonal domain exponent
  a = (1, 2), per-component alpha = 1.5 noise, D = 0.75 B), and
* the scalar moving-average benchmark on R (E = 1, B = 1/alpha, D = H), whose
  marginals reduce to symmetric stable laws with quadrature-computable scale.

Statistical tests compare empirical characteristic functions of two ensembles
against the noise floor 4/sqrt(N); fixtures keep replicate counts small so the
module tests stay fast, while the acceptance tests re-run the same
configurations at their full sizes.
"""

from __future__ import annotations

import numpy as np
import pytest

from opfield import (
    GridSpec,
    make_complex_isotropic,
    make_config,
    per_component,
    power_sum,
    tau_radial,
)
from opfield.operators import as_operator


# ---------------------------------------------------------------------------
# canonical configurations
# ---------------------------------------------------------------------------


def aniso_ma_config(h: float = 0.2, seed: int = 0):
    """Anisotropic moving-average benchmark: d = m = 2, a = (1, 2),
    alpha = (1.5, 1.5), B = I/alpha, D = c B with c = 0.5 / Lambda_B = 0.75."""
    a = (1.0, 2.0)
    alpha = 1.5
    e = np.diag(a)
    b = np.eye(2) / alpha
    c = 0.5 / as_operator(b).lambda_max
    d = c * b
    return make_config(
        "moving-average",
        e,
        d,
        b,
        power_sum(a),
        per_component([alpha, alpha]),
        grid=GridSpec(r_int=10.0, h=h),
        seed=seed,
    )


def scalar_ma_config(alpha: float = 1.5, hurst: float = 0.4, r_int: float = 10.0,
                     h: float = 0.1, seed: int = 0):
    """Scalar moving-average benchmark: E = 1, B = 1/alpha, D = H."""
    e = [[1.0]]
    return make_config(
        "moving-average",
        e,
        [[hurst]],
        [[1.0 / alpha]],
        tau_radial(as_operator(e)),
        per_component([alpha]),
        grid=GridSpec(r_int=r_int, h=h),
        seed=seed,
    )


def harm_aniso_config(h: float = 0.25, r_int: float = 8.0, seed: int = 0):
    """Anisotropic harmonizable benchmark: E = diag(1, 2), B = I/alpha with
    alpha = 1.5, D = gamma B with gamma = 0.5 * min a_j, isotropic noise."""
    a = (1.0, 2.0)
    alpha = 1.5
    e = np.diag(a)
    b = np.eye(2) / alpha
    gamma = 0.5 * min(a)
    d = gamma * b
    return make_config(
        "harmonizable",
        e,
        d,
        b,
        power_sum(a),  # E is diagonal, so E-transpose homogeneity coincides
        make_complex_isotropic([alpha, alpha]),
        grid=GridSpec(r_int=r_int, h=h),
        seed=seed,
    )


def harm_scalar_config(alphas=(1.2, 1.8), gamma: float = 0.5, r0: float = 1e-4,
                       r_int: float = 1e4, ratio: float = 1.02, seed: int = 0):
    """Scalar-domain harmonizable benchmark on a geometric grid: d = 1, m = 2,
    E = 1, B = diag(1/alpha_j), D = gamma B, isotropic complex noise."""
    alphas = np.asarray(alphas, dtype=float)
    e = [[1.0]]
    b = np.diag(1.0 / alphas)
    d = gamma * b
    return make_config(
        "harmonizable",
        e,
        d,
        b,
        tau_radial(as_operator(e)),
        make_complex_isotropic(alphas),
        grid=GridSpec(kind="geometric", r_int=r_int, r0=r0, ratio=ratio),
        seed=seed,
    )


@pytest.fixture(scope="session")
def aniso_ma():
    return aniso_ma_config()


@pytest.fixture(scope="session")
def scalar_ma():
    return scalar_ma_config()


@pytest.fixture(scope="session")
def harm_aniso():
    return harm_aniso_config()


@pytest.fixture(scope="session")
def harm_scalar():
    return harm_scalar_config()


# ---------------------------------------------------------------------------
# statistics helpers
# ---------------------------------------------------------------------------


def ecf(values: np.ndarray, u) -> complex:
    """Empirical characteristic function of rows of ``values`` at probe u."""
    u = np.asarray(u, dtype=float).ravel()
    phases = np.asarray(values).reshape(values.shape[0], -1) @ u
    return complex(np.exp(1j * phases).mean())


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)
