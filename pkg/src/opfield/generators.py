"""Strictly operator-stable noise generators and their log-characteristic functions.

A generator describes the cell law of the independently scattered random
measure driving a field: a full, symmetric (hence strictly stable) law mu on
R^m with exponent B, meaning mu-hat(u)^s = mu-hat(s^B u), or equivalently
s * psi(u) = psi(s^(B^T) u) for the log-CF psi.  Three modes:

* ``per-component``  independent symmetric alpha_j-stable coordinates,
                     B = diag(1/alpha_j); with ``complex_pairs`` the law lives
                     on R^(2m) and coordinate pairs (j, m+j) are isotropic
                     alpha_j-stable, invariant under simultaneous rotation of
                     all pairs.
* ``spectral``       a discrete symmetric spectral measure sigma on the unit
                     sphere S_B; exact log-CF by the polar desintegration of
                     the Levy measure, sampling by a truncated LePage series.
* ``gaussian``       centered normal with covariance Q (the alpha = 2 case),
                     exponent B = I/2.

Symmetric alpha-stable scalars are drawn with the Chambers-Mallows-Stuck
transform; isotropic pairs use the sub-Gaussian representation sqrt(2 A) * G
with A positive (alpha/2)-stable.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.special import ndtri

from .errors import InvalidOperatorError, UnsupportedConfigError
from .operators import OperatorSpec, as_operator, is_multiple_of_identity
from .polar import radial_part

_LEPAGE_TAIL_FRACTION = 1e-3
_GL16 = np.polynomial.legendre.leggauss(16)


def sas_levy_constant(alpha: float) -> float:
    """c_alpha with integral_0^inf (1 - cos v) v^(-1-alpha) dv = c_alpha / alpha,
    so that the standard SaS law has Levy density (alpha/(2 c_alpha)) |y|^(-1-alpha)."""
    if not 0 < alpha < 2:
        raise ValueError("alpha must lie in (0, 2)")
    if abs(alpha - 1.0) < 1e-9:
        return math.pi / 2.0
    return math.gamma(2.0 - alpha) * math.cos(math.pi * alpha / 2.0) / (1.0 - alpha)


def _exp_from_uniform(u):
    """Unit-exponential draws from uniforms in [0, 1), clipped away from 0."""
    return np.maximum(-np.log1p(-np.asarray(u, dtype=float)), 1e-15)


def _normal_from_uniform(u):
    """Standard normal draws from uniforms via the inverse CDF (fixed budget)."""
    return ndtri(np.clip(np.asarray(u, dtype=float), 1e-17, 1.0 - 1e-16))


def sas_from_uniforms(alpha: float, u_angle, u_exp):
    """Chambers-Mallows-Stuck transform of two uniform arrays to standard SaS.

    With phi = pi (u_angle - 1/2) and W = -log(1 - u_exp),
        X = sin(alpha phi) / cos(phi)^(1/alpha) * (cos((1-alpha) phi) / W)^((1-alpha)/alpha)
    has CF exp(-|u|^alpha).  At alpha = 1 this is tan(phi) (Cauchy); at
    alpha = 2 it reduces to 2 sin(phi) sqrt(W), a centered normal of variance 2.
    """
    phi = math.pi * (np.asarray(u_angle, dtype=float) - 0.5)
    x = np.sin(alpha * phi) / np.cos(phi) ** (1.0 / alpha)
    if alpha != 1.0:
        w = _exp_from_uniform(u_exp)
        x = x * (np.cos((1.0 - alpha) * phi) / w) ** ((1.0 - alpha) / alpha)
    return x


def positive_stable_from_uniforms(alpha: float, u_angle, u_exp):
    """Totally skewed positive alpha-stable draws (Laplace transform
    exp(-s^alpha), 0 < alpha < 1) from two uniform arrays.

    This is the Kanter form: with V = pi (u_angle - 1/2) and W exponential,
    sin(alpha (V + pi/2)) / cos(V)^(1/alpha)
        * (cos(V - alpha (V + pi/2)) / W)^((1-alpha)/alpha)
    already carries the exp(-s^alpha) normalization (at alpha = 1/2 it
    reproduces the Levy distribution with scale 1/2)."""
    v = math.pi * (np.asarray(u_angle, dtype=float) - 0.5)
    w = _exp_from_uniform(u_exp)
    shifted = alpha * (v + math.pi / 2)
    return (
        np.sin(shifted)
        / np.cos(v) ** (1.0 / alpha)
        * (np.cos(v - shifted) / w) ** ((1.0 - alpha) / alpha)
    )


def isotropic_pair_from_uniforms(alpha: float, u4) -> np.ndarray:
    """Isotropic alpha-stable points in R^2 (CF exp(-||u||^alpha)) from four
    uniform columns: a positive (alpha/2)-stable radius times a normal pair."""
    u4 = np.asarray(u4, dtype=float)
    g = _normal_from_uniform(u4[..., 2:4])
    if alpha == 2.0:
        return math.sqrt(2.0) * g
    a = positive_stable_from_uniforms(alpha / 2.0, u4[..., 0], u4[..., 1])
    return np.sqrt(2.0 * a)[..., None] * g


def sample_sas(alpha: float, rng, size=None):
    """Standard symmetric alpha-stable draws with CF exp(-|u|^alpha), 0 < alpha <= 2."""
    if not 0 < alpha <= 2:
        raise ValueError("alpha must lie in (0, 2]")
    scalar = size is None
    n = 1 if scalar else size
    x = sas_from_uniforms(alpha, rng.random(n), rng.random(n))
    return float(x[0]) if scalar else x


def sample_positive_stable(alpha: float, rng, size=None):
    """Totally skewed positive alpha-stable draws with Laplace transform
    exp(-s^alpha), 0 < alpha < 1 (the sub-Gaussian subordinator)."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    scalar = size is None
    n = 1 if scalar else size
    s = positive_stable_from_uniforms(alpha, rng.random(n), rng.random(n))
    return float(s[0]) if scalar else s


def _sample_isotropic_pair(alpha: float, rng, n: int) -> np.ndarray:
    """n isotropic alpha-stable points in R^2 with CF exp(-||u||^alpha)."""
    return isotropic_pair_from_uniforms(alpha, rng.random((n, 4)))


class LogCF:
    """Callable log-characteristic function psi with strictness metadata.

    All generators here are symmetric, so psi is real and nonpositive and the
    conjugate symmetry psi(-u) = conj(psi(u)) holds trivially.
    """

    def __init__(self, evaluate, gen, exact: bool):
        self._evaluate = evaluate
        self.gen = gen
        self.strict = True
        self.exact = exact

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if u.ndim == 1:
            return float(self._evaluate(u[None, :])[0])
        return self._evaluate(u)


class GeneratorSpec:
    """Cell-law description; use the module constructors, not __init__ directly."""

    def __init__(self, mode, dim, exponent, alphas=None, atoms=None, weights=None,
                 covariance=None, complex_pairs=False, isotropy_flag=False):
        self.mode = mode
        self.dim = int(dim)
        self.exponent = exponent
        self.alphas = None if alphas is None else np.asarray(alphas, dtype=float)
        self.atoms = atoms
        self.weights = weights
        self.covariance = covariance
        self.complex_pairs = bool(complex_pairs)
        self.isotropy_flag = bool(isotropy_flag)
        if exponent.lambda_min < 0.5 - 1e-12:
            raise InvalidOperatorError(
                "stable exponents satisfy lambda_B >= 1/2; got "
                f"lambda_min = {exponent.lambda_min:.6g}"
            )

    # -- sampling -------------------------------------------------------------

    def sample(self, rng, size=None, n_terms: int = 1000) -> np.ndarray:
        scalar = size is None
        n = 1 if scalar else int(size)
        if self.mode == "gaussian":
            out = rng.standard_normal((n, self.dim)) @ self._chol.T
        elif self.mode == "per-component":
            out = self._sample_per_component(rng, n)
        else:
            out = self._sample_lepage(rng, n, n_terms)
        return out[0] if scalar else out

    def _sample_per_component(self, rng, n):
        m = self.alphas.size
        if self.complex_pairs:
            out = np.empty((n, 2 * m))
            for j, a in enumerate(self.alphas):
                pair = _sample_isotropic_pair(a, rng, n)
                out[:, j] = pair[:, 0]
                out[:, m + j] = pair[:, 1]
        else:
            out = np.empty((n, m))
            for j, a in enumerate(self.alphas):
                out[:, j] = sample_sas(a, rng, size=n)
        return out

    def lepage_from_uniforms(self, u_triples: np.ndarray):
        """Series samples from uniform triples of shape (n, n_terms, 3).

        Columns per term: arrival-gap exponential, Rademacher sign, atom index.
        Returns (samples (n, dim), tail_exceeded flag).
        """
        mass = float(np.sum(self.weights))
        cumw = np.cumsum(self.weights) / mass
        lam = self.exponent.lambda_min
        iso = is_multiple_of_identity(self.exponent)
        diag = np.diagonal(self.exponent.entries) if self.exponent._strategy[0] == "diag" else None
        gam = np.cumsum(_exp_from_uniform(u_triples[:, :, 0]), axis=1) / mass
        eps = np.where(u_triples[:, :, 1] < 0.5, -1.0, 1.0)
        idx = np.searchsorted(cumw, u_triples[:, :, 2])
        w_vec = self.atoms[idx]  # (n, n_terms, dim)
        if iso is not None:
            terms = (eps * gam**(-iso))[:, :, None] * w_vec
        elif diag is not None:
            terms = eps[:, :, None] * gam[:, :, None] ** (-diag) * w_vec
        else:
            mats = self.exponent.pow_many(1.0 / gam.ravel())
            rotated = np.einsum("kij,kj->ki", mats, w_vec.reshape(-1, self.dim))
            terms = eps[:, :, None] * rotated.reshape(gam.shape + (self.dim,))
        x = terms.sum(axis=1)
        tail = gam[:, -1] ** (-lam)
        mag = np.linalg.norm(x, axis=1)
        exceeded = bool(np.any(tail > _LEPAGE_TAIL_FRACTION * np.maximum(mag, 1e-300)))
        return x, exceeded

    def _sample_lepage(self, rng, n, n_terms):
        if n_terms < 100:
            warnings.warn(
                f"LePage series with n_terms = {n_terms} < 100 is heavily truncated",
                stacklevel=3,
            )
        out = np.empty((n, self.dim))
        tail_flag = False
        chunk = max(1, (1 << 21) // n_terms)
        for start in range(0, n, chunk):
            nn = min(chunk, n - start)
            x, exceeded = self.lepage_from_uniforms(rng.random((nn, n_terms, 3)))
            out[start : start + nn] = x
            tail_flag = tail_flag or exceeded
        if tail_flag:
            warnings.warn(
                "LePage tail estimate exceeds 1e-3 of the sample magnitude; "
                "increase n_terms",
                stacklevel=3,
            )
        return out

    # -- log-CF ---------------------------------------------------------------

    def log_cf(self) -> LogCF:
        if self.mode == "gaussian":
            q = self.covariance

            def ev(u):
                return -0.5 * np.einsum("ni,ij,nj->n", u, q, u)

            return LogCF(ev, self, exact=True)
        if self.mode == "per-component":
            alphas = self.alphas
            m = alphas.size
            if self.complex_pairs:

                def ev(u):
                    sq = u[:, :m] ** 2 + u[:, m:] ** 2
                    return -np.sum(sq ** (alphas / 2.0), axis=1)

            else:

                def ev(u):
                    return -np.sum(np.abs(u) ** alphas, axis=1)

            return LogCF(ev, self, exact=True)
        return self._spectral_log_cf()

    def _spectral_log_cf(self) -> LogCF:
        iso = is_multiple_of_identity(self.exponent)
        if iso is not None:
            alpha = 1.0 / iso
            c = sas_levy_constant(alpha)
            atoms, weights = self.atoms, self.weights

            def ev(u):
                return -c * np.sum(weights * np.abs(u @ atoms.T) ** alpha, axis=1)

            return LogCF(ev, self, exact=True)
        if self.exponent._strategy[0] == "diag":
            # axis atoms reduce to scalar radial actions with a closed form
            diag = np.diagonal(self.exponent.entries)
            axis = [np.flatnonzero(z)[0] for z in self.atoms if np.count_nonzero(z) == 1]
            if len(axis) == len(self.atoms):
                alphas = 1.0 / diag[np.array(axis)]
                consts = np.array([sas_levy_constant(a) for a in alphas])
                atoms, weights = self.atoms, self.weights

                def ev(u):
                    inner = np.abs(u @ atoms.T) ** alphas
                    return -np.sum(weights * consts * inner, axis=1)

                return LogCF(ev, self, exact=True)

        def ev(u):
            u = np.atleast_2d(u)
            out = np.empty(u.shape[0])
            for i, row in enumerate(u):
                out[i] = sum(
                    w * _radial_cos_integral(self.exponent, z, row)
                    for z, w in zip(self.atoms, self.weights)
                )
            return out

        return LogCF(ev, self, exact=False)

    @property
    def _chol(self):
        if getattr(self, "_chol_cache", None) is None:
            self._chol_cache = np.linalg.cholesky(self.covariance)
        return self._chol_cache


def _radial_cos_integral(b_spec: OperatorSpec, zeta, u, atol: float = 1e-12) -> float:
    """integral_0^inf (cos<u, r^B zeta> - 1) r^-2 dr via v = ln r.

    Panels sized to the local phase derivative resolve the oscillation; once
    the phase runs faster than the e^-v envelope can matter, the cosine tail
    is dropped (integration-by-parts bound ~ e^-v / |theta'|) and the constant
    part -e^-v is added in closed form.
    """
    zeta = np.asarray(zeta, dtype=float)
    u = np.asarray(u, dtype=float)
    b_mat = b_spec.entries
    two_lam = 2.0 * b_spec.lambda_min - 1.0

    def theta(v):
        return np.einsum("kij,j->ki", b_spec.pow_many(np.exp(v)), zeta) @ u

    def theta_prime_abs(v):
        y = b_spec.pow(math.exp(v)) @ zeta
        return abs(float(u @ (b_mat @ y)))

    v = 0.0
    for _ in range(400):
        if abs(theta(np.array([v]))[0]) ** 2 / 2.0 * math.exp(-v) < atol * two_lam / 4.0:
            break
        v -= 2.0
    total = 0.0
    gx, gw = _GL16
    for _ in range(100_000):
        tp = theta_prime_abs(v)
        width = min(1.0, max(0.02, math.pi / 4.0 / max(tp, 1e-9)))
        nodes = v + 0.5 * width * (gx + 1.0)
        vals = (np.cos(theta(nodes)) - 1.0) * np.exp(-nodes)
        total += 0.5 * width * float(gw @ vals)
        v += width
        env = math.exp(-v)
        if 2.0 * env < atol:
            break
        tp = theta_prime_abs(v)
        if tp > 100.0 and 3.0 * env / tp < atol:
            total -= env  # exact tail of the "-1" part; cosine tail < atol
            break
        if v > 250.0:
            break
    return total


# -- constructors ---------------------------------------------------------------


def per_component(alphas) -> GeneratorSpec:
    """Independent SaS(alpha_j) coordinates; exponent B = diag(1/alpha_j)."""
    a = np.asarray(alphas, dtype=float)
    if a.ndim != 1 or a.size == 0 or np.any(a <= 0) or np.any(a > 2):
        raise ValueError("alphas must be a vector with entries in (0, 2]")
    b = OperatorSpec(np.diag(1.0 / a))
    return GeneratorSpec("per-component", a.size, b, alphas=a)


def make_complex_isotropic(alphas) -> GeneratorSpec:
    """Rotation-invariant complex generator on R^(2m): pair (j, m+j) is
    isotropic alpha_j-stable; exponent is the block diagonal B + B."""
    a = np.asarray(alphas, dtype=float)
    if a.ndim != 1 or a.size == 0 or np.any(a <= 0) or np.any(a > 2):
        raise ValueError("alphas must be a vector with entries in (0, 2]")
    b = OperatorSpec(np.diag(np.concatenate([1.0 / a, 1.0 / a])))
    return GeneratorSpec(
        "per-component", 2 * a.size, b, alphas=a, complex_pairs=True, isotropy_flag=True
    )


def spectral(atoms, weights, exponent) -> GeneratorSpec:
    """Discrete symmetric spectral measure sum_i w_i delta(zeta_i) on S_B.

    Atoms are projected onto S_B: an off-sphere atom x with weight w is
    replaced by (l_B(x), w * tau_B(x)), which leaves the Levy measure
    unchanged.  The atom set must span R^m (fullness).
    """
    b = as_operator(exponent)
    atoms = np.atleast_2d(np.asarray(atoms, dtype=float))
    weights = np.asarray(weights, dtype=float)
    if atoms.shape[0] != weights.size:
        raise ValueError("one weight per atom required")
    if np.any(weights <= 0):
        raise ValueError("atom weights must be positive")
    if atoms.shape[1] != b.dim:
        raise InvalidOperatorError("atom dimension does not match the exponent")
    if b.lambda_min <= 0.5:
        raise InvalidOperatorError(
            "spectral mode requires lambda_B > 1/2 (no Gaussian component)"
        )
    if np.linalg.matrix_rank(atoms) < b.dim:
        raise ValueError("spectral atoms must span the full space")
    taus = radial_part(b, atoms)
    mats = b.pow_many(1.0 / taus)
    proj = np.einsum("nij,nj->ni", mats, atoms)
    return GeneratorSpec("spectral", b.dim, b, atoms=proj, weights=weights * taus)


def gaussian(covariance, exponent=None) -> GeneratorSpec:
    """Centered normal cell law; the strict exponent defaults to B = I/2."""
    q = np.asarray(covariance, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ValueError("covariance must be square")
    if np.max(np.abs(q - q.T)) > 1e-12:
        raise ValueError("covariance must be symmetric")
    try:
        np.linalg.cholesky(q)
    except np.linalg.LinAlgError as exc:
        raise ValueError("covariance must be positive definite") from exc
    b = as_operator(exponent) if exponent is not None else OperatorSpec(0.5 * np.eye(q.shape[0]))
    return GeneratorSpec("gaussian", q.shape[0], b, covariance=q)


# -- module-level operations -----------------------------------------------------


def sample_operator_stable(gen: GeneratorSpec, rng, n_terms: int = 1000, size=None):
    """Draw from the generator law (LePage series in spectral mode, exact
    transforms otherwise)."""
    return gen.sample(rng, size=size, n_terms=n_terms)


def log_cf(gen: GeneratorSpec) -> LogCF:
    return gen.log_cf()


def verify_ops_scaling(gen: GeneratorSpec, s_values, u_values) -> float:
    """Max defect of the strict scaling identity s psi(u) = psi(s^(B^T) u)."""
    psi = gen.log_cf()
    bt = gen.exponent.transpose()
    u = np.atleast_2d(np.asarray(u_values, dtype=float))
    base = psi(u)
    worst = 0.0
    for s in np.asarray(s_values, dtype=float):
        scaled = psi(u @ bt.pow(s).T)
        worst = max(worst, float(np.max(np.abs(s * base - scaled))))
    return worst


def spectral_decomposition(gen: GeneratorSpec):
    """(atoms, weights) of the spectral measure on S_B for jump generators.

    Per-component laws decompose into axis atoms +/- e_j / alpha_j with weight
    alpha_j^alpha_j / (2 c_alpha_j), reproducing the SaS Levy density per
    coordinate.
    """
    if gen.mode == "spectral":
        return gen.atoms, gen.weights
    if gen.mode != "per-component":
        raise UnsupportedConfigError("only jump generators have a spectral measure")
    if np.any(gen.alphas >= 2):
        raise UnsupportedConfigError("alpha = 2 coordinates have no jump part")
    if gen.complex_pairs:
        raise UnsupportedConfigError(
            "isotropic complex generators have a continuous spectral measure"
        )
    dim = gen.dim
    atoms, weights = [], []
    for j, a in enumerate(gen.alphas):
        w = a**a / (2.0 * sas_levy_constant(a))
        for sign in (+1.0, -1.0):
            z = np.zeros(dim)
            z[j] = sign / a
            atoms.append(z)
            weights.append(w)
    return np.asarray(atoms), np.asarray(weights)
