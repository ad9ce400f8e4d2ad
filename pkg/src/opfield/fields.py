"""Simulation of operator-scaling stable random fields.

A field configuration couples three operators (a space-scaling exponent E on
the parameter domain, a field exponent D and a noise-stability exponent B on
the value space), a positive E-homogeneous gauge ``phi``, and an
operator-stable noise generator.  Two integral representations are supported:

* moving-average: ``X(t) = int [phi(t-s)^{D-qB} - phi(-s)^{D-qB}] M(ds)``
  with ``q = trace(E)``, driven by noise whose cell law is operator-stable
  with exponent B;
* harmonizable: ``X(t) = Re int (e^{i<t,s>} - 1) phi(s)^{-D} phi(s)^{-qB}
  M~(ds)`` with ``phi`` homogeneous for the transpose exponent E* and a
  complex (R^{2m}-valued) noise with exponent ``B (+) B``.

Discretization replaces the independently scattered noise by one generator
draw per grid cell, scaled by ``|cell|^B``.  The resulting discrete field has
log-characteristic function ``sum_c |cell| psi(K(s_c)^T u)`` exactly, where
``K`` is the (scale-free) kernel and ``psi`` the generator's log-CF; mesh
refinement drives this to the integral form.  Replicates are seeded
counter-style by ``(seed, stream, replicate)`` with a fixed per-cell budget of
uniforms, so draws are reproducible bit-for-bit and independent of chunking.
"""

from __future__ import annotations

import hashlib
import math
import struct
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, InvalidOperatorError, UnsupportedConfigError
from .generators import (
    GeneratorSpec,
    _normal_from_uniform,
    isotropic_pair_from_uniforms,
    sas_from_uniforms,
)
from .homogeneous import HomogeneousFn
from .integrability import (
    harm_kernel_family,
    ma_kernel_family,
    validate_harm_parameters,
    validate_ma_parameters,
)
from .operators import (
    OperatorSpec,
    as_operator,
    commutes,
    is_multiple_of_identity,
    matrix_powers,
)
from .polar import radial_part, sphere_sample

__all__ = [
    "GridSpec",
    "IntegrationGrid",
    "FieldConfig",
    "FieldSample",
    "build_grid",
    "truncation_gauge",
    "ma_kernel",
    "harm_kernel",
    "kernel_family_from_config",
    "validate_config",
    "fingerprint",
    "simulate",
    "simulate_ensemble",
    "component_profile",
    "replicate_rng",
]

_MAX_CELLS = 5_000_000
_MAX_KERNEL_BYTES = 8e8
_TAIL_TARGET = 1e-3


# ---------------------------------------------------------------------------
# configuration containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Integration-grid parameters, measured in gauge (radial) units.

    ``kind`` is "uniform" (anisotropic rectangular lattice masked to the
    gauge ball of radius ``r_int``) or "geometric" (one-dimensional
    harmonizable grids whose cell edges grow by ``ratio``, resolving the
    spectral singularity at the origin).  ``h`` is the mesh pitch, ``r0`` the
    inner excision radius for harmonizable grids (default: ``h``).  ``r_int``
    defaults to the radius at which the kernel-decay estimate predicts a
    relative truncation tail below 1e-3.
    """

    kind: str = "uniform"
    r_int: Optional[float] = None
    h: float = 0.05
    r0: Optional[float] = None
    ratio: float = 1.05


@dataclass(frozen=True, eq=False)
class IntegrationGrid:
    """Concrete cell decomposition: midpoints, Lebesgue measures, metadata."""

    centers: np.ndarray
    measures: np.ndarray
    kind: str
    r_int: float
    r0: Optional[float] = None
    pitches: Optional[np.ndarray] = None

    @property
    def n_cells(self) -> int:
        return int(self.centers.shape[0])


@dataclass(frozen=True, eq=False)
class FieldConfig:
    """Full specification of one field model.

    ``e`` scales the parameter space (d x d, positive spectrum), ``d`` is the
    field self-similarity exponent and ``b`` the noise stability exponent
    (both m x m).  ``phi`` must be homogeneous for ``e`` (moving-average) or
    for its transpose (harmonizable).  ``gen`` supplies the cell noise: an
    m-dimensional generator with exponent ``b`` for moving averages, a
    2m-dimensional complex-pair generator with exponent ``b (+) b`` for
    harmonizable fields.
    """

    representation: str
    e: OperatorSpec
    d: OperatorSpec
    b: OperatorSpec
    phi: HomogeneousFn
    gen: GeneratorSpec
    grid: GridSpec
    seed: int = 0
    n_terms: int = 1000

    @property
    def q(self) -> float:
        return float(self.e.trace)

    @property
    def dim_domain(self) -> int:
        return self.e.dim

    @property
    def dim_value(self) -> int:
        return self.d.dim


@dataclass(frozen=True, eq=False)
class FieldSample:
    """One simulated replicate: values (P, m) on points (P, d)."""

    config_hash: str
    points: np.ndarray
    values: np.ndarray
    replicate: int


def _as_config(representation, e, d, b, phi, gen, grid=None, seed=0, n_terms=1000):
    return FieldConfig(
        representation=str(representation),
        e=as_operator(e),
        d=as_operator(d),
        b=as_operator(b),
        phi=phi,
        gen=gen,
        grid=grid if grid is not None else GridSpec(),
        seed=int(seed),
        n_terms=int(n_terms),
    )


def make_config(representation, e, d, b, phi, gen, grid=None, seed=0, n_terms=1000) -> FieldConfig:
    """Build and validate a :class:`FieldConfig` from loose arguments."""
    config = _as_config(representation, e, d, b, phi, gen, grid, seed, n_terms)
    validate_config(config)
    return config


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def validate_config(config: FieldConfig) -> None:
    """Check every existence condition; raise ConfigError listing all failures."""
    issues = []
    rep = config.representation
    if rep not in ("moving-average", "harmonizable"):
        raise ConfigError(
            f"representation must be 'moving-average' or 'harmonizable', got {rep!r}"
        )
    d_dom = config.e.dim
    m = config.d.dim
    if config.b.dim != m:
        issues.append(f"D is {m}x{m} but B is {config.b.dim}x{config.b.dim}")
    if config.phi.dim != d_dom:
        issues.append(
            f"phi acts on R^{config.phi.dim} but E acts on R^{d_dom}"
        )

    target = config.e.entries if rep == "moving-average" else config.e.entries.T
    if config.phi.dim == d_dom and not np.allclose(
        config.phi.exponent.entries, target, atol=1e-9
    ):
        which = "E" if rep == "moving-average" else "the transpose of E"
        issues.append(
            f"phi must be homogeneous for {which}; its exponent does not match"
        )

    if config.b.dim == m:
        try:
            if rep == "moving-average":
                report = validate_ma_parameters(
                    config.e, config.d, config.b, config.phi.beta
                )
                if report.verdict != "pass":
                    issues.append(
                        "moving-average existence margins violated: need "
                        "lambda_{D-qB} + lambda_{qB} > 0 and "
                        "Lambda_{D-qB} + Lambda_{qB} < beta, got margins "
                        f"({report.margin_low:+.6g}, {report.margin_high:+.6g})"
                    )
            else:
                hreport = validate_harm_parameters(config.e, config.d)
                if hreport.verdict != "pass":
                    issues.append(
                        "harmonizable existence requires the spectral gap "
                        "lambda_E > Lambda_D; got margin "
                        f"{hreport.margin:+.6g}"
                    )
        except InvalidOperatorError as exc:
            issues.append(str(exc))

    gen = config.gen
    if rep == "moving-average":
        if gen.dim != m:
            issues.append(
                f"moving-average noise must be {m}-dimensional, got {gen.dim}"
            )
        elif gen.exponent is not None and not np.allclose(
            gen.exponent.entries, config.b.entries, atol=1e-9
        ):
            issues.append("noise generator exponent does not match B")
    else:
        if gen.dim != 2 * m:
            issues.append(
                "harmonizable noise must be a complex-pair generator on "
                f"R^{2 * m}, got dimension {gen.dim}"
            )
        else:
            bb = np.zeros((2 * m, 2 * m))
            bb[:m, :m] = config.b.entries
            bb[m:, m:] = config.b.entries
            if gen.exponent is not None and not np.allclose(
                gen.exponent.entries, bb, atol=1e-9
            ):
                issues.append(
                    "harmonizable noise exponent must be the block sum B (+) B"
                )
        if gen.mode == "per-component" and not gen.complex_pairs:
            issues.append(
                "harmonizable per-component noise must pair coordinates into "
                "complex components (complex_pairs)"
            )

    grid = config.grid
    if grid.kind not in ("uniform", "geometric"):
        issues.append(f"grid kind must be 'uniform' or 'geometric', got {grid.kind!r}")
    if grid.kind == "geometric":
        if d_dom != 1:
            issues.append("geometric grids are only defined on a 1-dimensional domain")
        if rep != "harmonizable":
            issues.append("geometric grids support the harmonizable representation only")
        if grid.ratio <= 1.0:
            issues.append(f"geometric grid ratio must exceed 1, got {grid.ratio}")
    if not (grid.h > 0.0):
        issues.append(f"grid pitch h must be positive, got {grid.h}")
    if grid.r_int is not None and not (grid.r_int > 0.0):
        issues.append(f"grid r_int must be positive, got {grid.r_int}")
    if grid.r0 is not None and not (grid.r0 > 0.0):
        issues.append(f"grid r0 must be positive, got {grid.r0}")
    if config.n_terms < 1:
        issues.append(f"n_terms must be at least 1, got {config.n_terms}")

    if issues:
        raise ConfigError("invalid field configuration:\n- " + "\n- ".join(issues))


# ---------------------------------------------------------------------------
# truncation gauge and grids
# ---------------------------------------------------------------------------


def truncation_gauge(op):
    """Radial gauge and axis extents used to clip grids to operator balls.

    Returns ``(gauge, extents)``: ``gauge(pts)`` maps (n, d) points to radial
    coordinates, ``extents(r)`` returns per-axis half-widths of a rectangle
    covering ``{gauge <= r}``.  Scalar exponents use the exact closed form,
    diagonal exponents the power-sum gauge ``sum_j |x_j|^{1/a_j}`` (an
    equivalent homogeneous gauge with exact rectangular extents ``r^{a_j}``),
    and general exponents fall back to the bisection radial coordinate with a
    sampled envelope.
    """
    op = as_operator(op)
    dim = op.dim
    c = is_multiple_of_identity(op.entries)
    if c is not None:

        def gauge(pts):
            pts = np.asarray(pts, dtype=float).reshape(-1, dim)
            return np.linalg.norm(pts, axis=1) ** (1.0 / c)

        def extents(r):
            return np.full(dim, float(r) ** c)

        return gauge, extents

    diag = np.diagonal(op.entries).astype(float)
    if np.allclose(op.entries, np.diag(diag), atol=1e-12) and np.all(diag > 0):

        def gauge(pts):
            pts = np.asarray(pts, dtype=float).reshape(-1, dim)
            return np.sum(np.abs(pts) ** (1.0 / diag[None, :]), axis=1)

        def extents(r):
            return float(r) ** diag

        return gauge, extents

    def gauge(pts):
        return radial_part(op, np.asarray(pts, dtype=float).reshape(-1, dim))

    sphere = sphere_sample(op, 512, np.random.default_rng(0))

    def extents(r):
        image = sphere @ op.pow(float(r)).T
        return 1.1 * np.max(np.abs(image), axis=0)

    return gauge, extents


def _default_r_int(config: FieldConfig) -> float:
    """Truncation radius at which the kernel tail estimate drops below 1e-3."""
    q = config.q
    if config.representation == "moving-average":
        a = as_operator(config.d.entries - q * config.b.entries)
        # tail of int ||f||^{1/lambda_B} outside radius R decays like
        # R^{(Lambda_{D-qB} - beta)/lambda_B + q}
        xi = (a.lambda_max - config.phi.beta) / config.b.lambda_min + q
    else:
        # harmonizable kernels decay like r^{-lambda_D - q lambda_B}; the
        # slowest-decaying CF channel is the 1/Lambda_B power
        xi = q - (config.d.lambda_min + q * config.b.lambda_min) / config.b.lambda_max
    if xi > -0.05:
        raise ConfigError(
            "kernel tail decays too slowly to pick a default truncation "
            f"radius (tail exponent {xi:+.4g}); set grid.r_int explicitly"
        )
    r = _TAIL_TARGET ** (1.0 / xi)
    r = max(r, 2.0)
    if r > 256.0 and config.grid.kind == "uniform":
        warnings.warn(
            f"default truncation radius {r:.3g} is large; consider setting "
            "grid.r_int (and h) explicitly",
            stacklevel=3,
        )
    return float(r)


def build_grid(config: FieldConfig, points=None) -> IntegrationGrid:
    """Build the integration grid for a configuration.

    Moving-average grids must cover the kernel supports around every
    evaluation point, so ``points`` (P, d) is required there; harmonizable
    grids are evaluation-independent.
    """
    rep = config.representation
    d_dom = config.dim_domain
    gauge_op = config.e if rep == "moving-average" else config.e.transpose()
    gauge, extents = truncation_gauge(gauge_op)
    r_int = config.grid.r_int if config.grid.r_int is not None else _default_r_int(config)
    h = float(config.grid.h)
    if h >= r_int:
        raise ConfigError(f"grid pitch h = {h} must be smaller than r_int = {r_int}")

    if config.grid.kind == "geometric":
        return _geometric_grid(config, gauge_op, r_int)

    ext = np.asarray(extents(r_int), dtype=float)
    n_half = max(2, int(math.ceil(r_int / h)))
    pitches = ext / n_half

    lo = -ext.copy()
    hi = ext.copy()
    translates = np.zeros((0, d_dom))
    if rep == "moving-average":
        if points is None:
            raise ConfigError("moving-average grids need the evaluation points")
        translates = np.asarray(points, dtype=float).reshape(-1, d_dom)
        if translates.size:
            lo = np.minimum(lo, translates.min(axis=0) - ext)
            hi = np.maximum(hi, translates.max(axis=0) + ext)

    k_lo = np.floor(lo / pitches - 0.5).astype(int)
    k_hi = np.ceil(hi / pitches - 0.5).astype(int)
    counts = k_hi - k_lo + 1
    total = int(np.prod(counts.astype(float)))
    if total > _MAX_CELLS:
        raise ConfigError(
            f"integration grid would have {total} cells (> {_MAX_CELLS}); "
            "coarsen h or reduce r_int"
        )
    axes = [
        (np.arange(k_lo[j], k_hi[j] + 1) + 0.5) * pitches[j] for j in range(d_dom)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([g.ravel() for g in mesh], axis=1)

    mask = gauge(centers) <= r_int
    for t in translates:
        mask |= gauge(t[None, :] - centers) <= r_int
    if rep == "harmonizable":
        r0 = config.grid.r0 if config.grid.r0 is not None else h
        mask &= gauge(centers) > r0
    else:
        r0 = None
    centers = centers[mask]
    if centers.shape[0] == 0:
        raise ConfigError("integration grid is empty; check r_int, r0 and h")
    measures = np.full(centers.shape[0], float(np.prod(pitches)))
    return IntegrationGrid(
        centers=centers,
        measures=measures,
        kind="uniform",
        r_int=float(r_int),
        r0=r0,
        pitches=pitches,
    )


def _geometric_grid(config: FieldConfig, gauge_op, r_int: float) -> IntegrationGrid:
    """Mirrored geometric cells on the line, graded toward the origin."""
    r0 = config.grid.r0 if config.grid.r0 is not None else config.grid.h
    ratio = float(config.grid.ratio)
    if not (0.0 < r0 < r_int):
        raise ConfigError(f"geometric grid needs 0 < r0 < r_int, got ({r0}, {r_int})")
    n_cells = max(1, int(math.ceil(math.log(r_int / r0) / math.log(ratio))))
    if n_cells > _MAX_CELLS:
        raise ConfigError("geometric grid would exceed the cell budget")
    edges_gauge = r0 * ratio ** np.arange(n_cells + 1)
    edges_gauge[-1] = r_int
    a = float(gauge_op.entries[0, 0])
    edges = edges_gauge**a
    centers_pos = 0.5 * (edges[:-1] + edges[1:])
    widths = np.diff(edges)
    centers = np.concatenate([centers_pos, -centers_pos])[:, None]
    measures = np.concatenate([widths, widths])
    return IntegrationGrid(
        centers=centers,
        measures=measures,
        kind="geometric",
        r_int=float(r_int),
        r0=float(r0),
        pitches=None,
    )


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


def ma_kernel(t, s, e, d, b, phi) -> np.ndarray:
    """Moving-average kernel matrix phi(t-s)^{D-qB} - phi(-s)^{D-qB}."""
    e = as_operator(e)
    d = as_operator(d)
    b = as_operator(b)
    t = np.asarray(t, dtype=float).ravel()
    s = np.asarray(s, dtype=float).ravel()
    a_op = as_operator(d.entries - float(e.trace) * b.entries)
    vals = np.asarray(phi(np.stack([t - s, -s])), dtype=float)
    powers = matrix_powers(a_op, vals)
    return powers[0] - powers[1]


def harm_kernel(t, s, e, d, b, phi) -> np.ndarray:
    """Harmonizable kernel as a real 2m x 2m block matrix.

    The complex kernel w(t, s) K(s) with w = e^{i<t,s>} - 1 and
    K = phi(s)^{-D} phi(s)^{-qB} is returned in the complex-as-real encoding
    [[Re w K, -Im w K], [Im w K, Re w K]].  The point s = 0 carries no
    spectral mass and is excluded.
    """
    e = as_operator(e)
    d = as_operator(d)
    b = as_operator(b)
    t = np.asarray(t, dtype=float).ravel()
    s = np.asarray(s, dtype=float).ravel()
    v = float(np.asarray(phi(s[None, :]), dtype=float)[0])
    if v <= 0.0:
        raise ValueError("harmonizable kernel is excluded where phi(s) = 0")
    q = float(e.trace)
    k = d.pow(1.0 / v) @ b.pow(v ** (-q))
    theta = float(t @ s)
    re_w = math.cos(theta) - 1.0
    im_w = math.sin(theta)
    m = d.dim
    out = np.zeros((2 * m, 2 * m))
    out[:m, :m] = re_w * k
    out[:m, m:] = -im_w * k
    out[m:, :m] = im_w * k
    out[m:, m:] = re_w * k
    return out


def kernel_family_from_config(config: FieldConfig, t):
    """The integrability-check kernel family of this configuration at lag t."""
    if config.representation == "moving-average":
        a_op = as_operator(config.d.entries - config.q * config.b.entries)
        return ma_kernel_family(t, config.phi, a_op)
    return harm_kernel_family(t, config.phi, config.d, config.b, config.q)


def _ma_kernel_tensor(points, centers, phi, a_op) -> np.ndarray:
    """Kernel stack K[p, c] = phi(t_p - s_c)^A - phi(-s_c)^A, shape (P,n,m,m)."""
    p, n = points.shape[0], centers.shape[0]
    m = a_op.dim
    if p * n * m * m * 8 > _MAX_KERNEL_BYTES:
        raise ConfigError(
            "kernel tensor would exceed the memory budget; evaluate fewer "
            "points at a time or coarsen the grid"
        )
    diffs = points[:, None, :] - centers[None, :, :]
    left = matrix_powers(a_op, np.asarray(phi(diffs.reshape(p * n, -1)), dtype=float))
    right = matrix_powers(a_op, np.asarray(phi(-centers), dtype=float))
    return left.reshape(p, n, m, m) - right[None]


def _harm_kernel_tensor(centers, phi, d_op, b_op, q: float) -> np.ndarray:
    """Scale-free harmonizable kernels K(s_c) = phi^{-D} phi^{-qB}, (n,m,m)."""
    n = centers.shape[0]
    m = d_op.dim
    v = np.asarray(phi(centers), dtype=float)
    out = np.zeros((n, m, m))
    pos = v > 0.0
    if np.any(pos):
        vp = v[pos]
        out[pos] = d_op.pow_many(1.0 / vp) @ b_op.pow_many(vp ** (-q))
    return out


# ---------------------------------------------------------------------------
# seeding and cell draws
# ---------------------------------------------------------------------------


def _philox_key(seed: int, stream: int, replicate: int) -> np.ndarray:
    digest = hashlib.sha256(
        struct.pack("<qqq", int(seed), int(stream), int(replicate))
    ).digest()
    return np.frombuffer(digest[:16], dtype="<u8")


def replicate_rng(seed: int, stream: int, replicate: int) -> np.random.Generator:
    """Counter-style generator for one replicate: distinct (seed, stream,
    replicate) triples yield independent, platform-stable Philox streams."""
    return np.random.Generator(np.random.Philox(key=_philox_key(seed, stream, replicate)))


def _uniform_budget(gen: GeneratorSpec, n_terms: int) -> int:
    """Fixed number of uniforms consumed per grid cell, by generator type."""
    if gen.mode == "gaussian":
        return gen.dim
    if gen.mode == "per-component":
        return 2 * gen.dim
    return 3 * int(n_terms)


def _cell_draws(gen: GeneratorSpec, u: np.ndarray, n_terms: int):
    """Transform a (k, budget) block of uniforms into k generator draws.

    Returns ``(draws (k, dim), tail_exceeded)``; the flag is only meaningful
    for series (spectral-measure) generators.
    """
    k = u.shape[0]
    if gen.mode == "gaussian":
        return _normal_from_uniform(u) @ gen._chol.T, False
    if gen.mode == "per-component":
        out = np.empty((k, gen.dim))
        if gen.complex_pairs:
            m = gen.alphas.size
            for j, alpha in enumerate(gen.alphas):
                pair = isotropic_pair_from_uniforms(float(alpha), u[:, 4 * j : 4 * j + 4])
                out[:, j] = pair[:, 0]
                out[:, m + j] = pair[:, 1]
        else:
            for j, alpha in enumerate(gen.alphas):
                out[:, j] = sas_from_uniforms(float(alpha), u[:, 2 * j], u[:, 2 * j + 1])
        return out, False
    return gen.lepage_from_uniforms(u.reshape(k, int(n_terms), 3))


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------


def simulate_ensemble(
    config: FieldConfig,
    points,
    n_replicates: int,
    stream: int = 0,
    grid: Optional[IntegrationGrid] = None,
) -> np.ndarray:
    """Simulate ``n_replicates`` independent copies of the field.

    Returns an array of shape ``(n_replicates, P, m)``.  ``stream``
    namespaces independent ensembles under the same seed (each verification
    comparison uses distinct streams).  ``grid`` overrides the built-in grid
    construction; corresponding cells across calls reuse the same underlying
    uniforms, which makes grid-covariant law identities exact in distribution.
    """
    validate_config(config)
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != config.dim_domain:
        raise ConfigError(
            f"evaluation points must have shape (P, {config.dim_domain})"
        )
    if grid is None:
        grid = build_grid(config, points)
    gen = config.gen
    n = grid.n_cells
    m = config.dim_value
    budget = _uniform_budget(gen, config.n_terms)
    if n * budget > 2e8:
        raise ConfigError(
            f"each replicate would consume {n * budget:.3g} uniforms; "
            "coarsen the grid or reduce n_terms"
        )

    scale = config.b.pow_many(grid.measures)  # (n, m, m): |cell|^B
    n_rep = int(n_replicates)
    out = np.empty((n_rep, points.shape[0], m))
    tail_flag = False
    batch = max(1, int(2e7 // max(n * max(budget, gen.dim), 1)))

    if config.representation == "moving-average":
        a_op = as_operator(config.d.entries - config.q * config.b.entries)
        kern = _ma_kernel_tensor(points, grid.centers, config.phi, a_op)
        kern = np.einsum("pcij,cjk->pcik", kern, scale)
        for start in range(0, n_rep, batch):
            nb = min(batch, n_rep - start)
            u = np.empty((nb, n, budget))
            for i in range(nb):
                u[i] = replicate_rng(config.seed, stream, start + i).random((n, budget))
            x, exceeded = _cell_draws(gen, u.reshape(nb * n, budget), config.n_terms)
            tail_flag |= exceeded
            out[start : start + nb] = np.einsum(
                "pcik,rck->rpi", kern, x.reshape(nb, n, gen.dim)
            )
    else:
        kern = _harm_kernel_tensor(grid.centers, config.phi, config.d, config.b, config.q)
        kern = np.einsum("cij,cjk->cik", kern, scale)
        w = np.exp(1j * points @ grid.centers.T)
        w -= 1.0
        for start in range(0, n_rep, batch):
            nb = min(batch, n_rep - start)
            u = np.empty((nb, n, budget))
            for i in range(nb):
                u[i] = replicate_rng(config.seed, stream, start + i).random((n, budget))
            x, exceeded = _cell_draws(gen, u.reshape(nb * n, budget), config.n_terms)
            tail_flag |= exceeded
            x = x.reshape(nb, n, gen.dim)
            z = x[:, :, :m] + 1j * x[:, :, m:]
            y = np.einsum("cik,rck->rci", kern, z)
            out[start : start + nb] = np.einsum("pc,rci->rpi", w, y).real

    origin = np.all(points == 0.0, axis=1)
    if np.any(origin):
        out[:, origin, :] = 0.0
    if tail_flag:
        warnings.warn(
            "series-generator tail estimate exceeded 1e-3 of the sample "
            "magnitude for some cells; increase n_terms",
            stacklevel=2,
        )
    return out


def simulate(
    config: FieldConfig,
    points,
    n_replicates: int = 1,
    stream: int = 0,
    grid: Optional[IntegrationGrid] = None,
):
    """Simulate replicates and wrap them as :class:`FieldSample` records."""
    values = simulate_ensemble(config, points, n_replicates, stream=stream, grid=grid)
    digest = fingerprint(config)
    pts = np.asarray(points, dtype=float)
    return [
        FieldSample(config_hash=digest, points=pts, values=values[r], replicate=r)
        for r in range(values.shape[0])
    ]


# ---------------------------------------------------------------------------
# component profiles and fingerprints
# ---------------------------------------------------------------------------


def component_profile(config: FieldConfig, j: int, s_points) -> np.ndarray:
    """Per-component spectral-density profile f_j of a harmonizable field.

    For diagonal B = diag(1/alpha_j) commuting with D and an isotropic
    complex generator, component j of the field is a scalar harmonizable
    alpha_j-stable field with spectral density

        f_j(s) = |psi((phi(s)^{-(D + qB)*} e_j, 0))|^{1/alpha_j},

    where psi is the generator's log-CF.  Requires those structural
    hypotheses; raises UnsupportedConfigError otherwise.
    """
    if config.representation != "harmonizable":
        raise UnsupportedConfigError(
            "component profiles are defined for harmonizable fields"
        )
    if not commutes(config.d.entries, config.b.entries):
        raise UnsupportedConfigError("component profiles require D and B to commute")
    m = config.dim_value
    diag = np.diagonal(config.b.entries)
    if not np.allclose(config.b.entries, np.diag(diag), atol=1e-12):
        raise UnsupportedConfigError("component profiles require diagonal B")
    gen = config.gen
    if not (gen.mode == "per-component" and gen.complex_pairs and gen.isotropy_flag):
        raise UnsupportedConfigError(
            "component profiles require an isotropic complex per-component generator"
        )
    j = int(j)
    if not 0 <= j < m:
        raise ValueError(f"component index {j} out of range for m = {m}")
    alpha = float(gen.alphas[j])
    if not math.isclose(diag[j], 1.0 / alpha, rel_tol=1e-9):
        raise UnsupportedConfigError(
            "component profiles require B = diag(1/alpha_j) matching the generator"
        )
    s_points = np.asarray(s_points, dtype=float).reshape(-1, config.dim_domain)
    a_t = as_operator((config.d.entries + config.q * config.b.entries).T)
    v = np.asarray(config.phi(s_points), dtype=float)
    out = np.zeros(v.shape[0])
    pos = v > 0.0
    if np.any(pos):
        mats = matrix_powers(a_t, 1.0 / v[pos])  # phi^{-(D+qB)*}
        vecs = mats[:, :, j]  # phi^{-(D+qB)*} e_j
        embedded = np.zeros((vecs.shape[0], 2 * m))
        embedded[:, :m] = vecs
        log_cf = gen.log_cf()
        out[pos] = np.abs(np.asarray(log_cf(embedded), dtype=float)) ** (1.0 / alpha)
    return out


def fingerprint(config: FieldConfig) -> str:
    """Deterministic SHA-256 hash of every law-relevant configuration field."""
    h = hashlib.sha256()

    def put(tag: str, arr) -> None:
        h.update(tag.encode())
        a = np.ascontiguousarray(np.asarray(arr, dtype=float))
        h.update(str(a.shape).encode())
        h.update(a.tobytes())

    h.update(config.representation.encode())
    put("E", config.e.entries)
    put("D", config.d.entries)
    put("B", config.b.entries)
    h.update(config.phi.kind.encode())
    put("beta", [config.phi.beta])
    put("phi-scale", [config.phi.scale])
    if config.phi.powers is not None:
        put("phi-powers", config.phi.powers)
    put("phi-exponent", config.phi.exponent.entries)
    gen = config.gen
    h.update(gen.mode.encode())
    h.update(bytes([gen.complex_pairs, gen.isotropy_flag]))
    if gen.alphas is not None:
        put("alphas", gen.alphas)
    if gen.atoms is not None:
        put("atoms", gen.atoms)
        put("weights", gen.weights)
    if gen.covariance is not None:
        put("covariance", gen.covariance)
    if gen.exponent is not None:
        put("gen-exponent", gen.exponent.entries)
    grid = config.grid
    h.update(grid.kind.encode())
    put(
        "grid",
        [
            math.nan if grid.r_int is None else grid.r_int,
            grid.h,
            math.nan if grid.r0 is None else grid.r0,
            grid.ratio,
        ],
    )
    put("seed", [config.seed])
    put("n_terms", [config.n_terms])
    return h.hexdigest()
