"""Experiment configuration documents: parsing, validation, serialization.

One TOML document describes a full run: the field model (operators, gauge,
noise generator, integration grid), the evaluation points, and the settings
of the verification commands.  Parsing aggregates every violated condition
into a single error; serialization is canonical (sorted keys, shortest
round-trip float format) so that semantically identical configurations hash
identically.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import tomli

from .errors import ConfigError
from .fields import FieldConfig, GridSpec, make_config
from .generators import gaussian, make_complex_isotropic, per_component, spectral
from .homogeneous import power_sum, tau_radial
from .operators import as_operator

__all__ = [
    "CheckSettings",
    "VerifySettings",
    "ExperimentConfig",
    "parse_config",
    "serialize_config",
    "config_hash",
]

COMMANDS = (
    "simulate",
    "check",
    "verify-oss",
    "verify-increments",
    "verify-stability",
    "estimate-holder",
)


@dataclass(frozen=True, eq=False)
class VerifySettings:
    """Probe grids and sizes for the statistical verification commands."""

    r_values: tuple
    h_values: np.ndarray
    t_probes: np.ndarray
    u_probes: tuple
    n_fold: int
    n_replicates: int
    component: int
    stability_t: np.ndarray


@dataclass(frozen=True, eq=False)
class CheckSettings:
    """Lag point and tolerances for the integrability check command."""

    t: np.ndarray
    tolerance: float
    radius: float
    delta1: Optional[float]
    delta2: Optional[float]


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """A parsed, fully validated experiment document."""

    command: Optional[str]
    field: FieldConfig
    replicates: int
    eval_mode: str  # "points" | "grid"
    eval_points: np.ndarray
    eval_dims: tuple
    eval_start: Optional[np.ndarray]
    eval_extent: Optional[np.ndarray]
    verify: VerifySettings
    check: CheckSettings

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, field=replace(self.field, seed=int(seed)))


def _matrix(value, name: str, issues) -> Optional[np.ndarray]:
    try:
        m = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        issues.append(f"{name} must be a numeric matrix")
        return None
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        issues.append(f"{name} must be a square matrix, got shape {m.shape}")
        return None
    return m


def _vector(value, name: str, issues) -> Optional[np.ndarray]:
    try:
        v = np.asarray(value, dtype=float).ravel()
    except (TypeError, ValueError):
        issues.append(f"{name} must be a numeric vector")
        return None
    return v


def _points(value, d: int, name: str, issues) -> Optional[np.ndarray]:
    try:
        pts = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        issues.append(f"{name} must be numeric")
        return None
    pts = pts.reshape(-1, 1) if pts.ndim == 1 and d == 1 else np.atleast_2d(pts)
    if pts.shape[1] != d:
        issues.append(f"{name} must be points in R^{d}, got shape {pts.shape}")
        return None
    return pts


def parse_config(text: str) -> ExperimentConfig:
    """Parse a TOML experiment document into a validated configuration.

    Syntax errors carry the parser's line information; semantic problems are
    aggregated so one round trip surfaces every violated condition.
    """
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config syntax error: {exc}") from exc
    if not data:
        raise ConfigError("config syntax error: empty document")

    issues = []
    command = data.get("command")
    if command is not None and command not in COMMANDS:
        issues.append(
            f"command must be one of {', '.join(COMMANDS)}; got {command!r}"
        )
    seed = int(data.get("seed", 0))
    replicates = int(data.get("replicates", 1))
    if replicates < 1:
        issues.append(f"replicates must be positive, got {replicates}")

    field_tbl = data.get("field")
    if not isinstance(field_tbl, dict):
        raise ConfigError("invalid config: missing [field] table")

    representation = field_tbl.get("representation")
    if representation not in ("moving-average", "harmonizable"):
        issues.append(
            "field.representation must be 'moving-average' or 'harmonizable'"
        )
    e = _matrix(field_tbl.get("e"), "field.e", issues)
    d_mat = _matrix(field_tbl.get("d"), "field.d", issues)
    b = _matrix(field_tbl.get("b"), "field.b", issues)
    if e is None or d_mat is None or b is None or issues:
        # operators are needed to build everything downstream
        if issues:
            raise ConfigError("invalid config:\n- " + "\n- ".join(issues))
        raise ConfigError("invalid config: field.e, field.d, field.b are required")

    phi_tbl = field_tbl.get("phi", {})
    phi_kind = phi_tbl.get("kind", "tau-radial")
    phi_exponent = e if representation == "moving-average" else e.T
    phi = None
    if phi_kind == "power-sum":
        powers = _vector(phi_tbl.get("powers"), "field.phi.powers", issues)
        if powers is not None:
            try:
                phi = power_sum(powers)
            except Exception as exc:
                issues.append(f"field.phi: {exc}")
    elif phi_kind == "tau-radial":
        scale = float(phi_tbl.get("scale", 1.0))
        try:
            phi = tau_radial(as_operator(phi_exponent), scale=scale)
        except Exception as exc:
            issues.append(f"field.phi: {exc}")
    else:
        issues.append(
            f"field.phi.kind must be 'power-sum' or 'tau-radial', got {phi_kind!r}"
        )

    gen_tbl = field_tbl.get("generator", {})
    gen_mode = gen_tbl.get("mode")
    gen = None
    n_terms = int(gen_tbl.get("n_terms", 1000))
    try:
        if gen_mode == "per-component":
            alphas = _vector(gen_tbl.get("alphas"), "field.generator.alphas", issues)
            if alphas is not None:
                gen = per_component(alphas)
        elif gen_mode == "complex-isotropic":
            alphas = _vector(gen_tbl.get("alphas"), "field.generator.alphas", issues)
            if alphas is not None:
                gen = make_complex_isotropic(alphas)
        elif gen_mode == "gaussian":
            cov = _matrix(gen_tbl.get("covariance"), "field.generator.covariance", issues)
            if cov is not None:
                gen = gaussian(cov)
        elif gen_mode == "spectral":
            atoms = gen_tbl.get("atoms")
            weights = gen_tbl.get("weights")
            if atoms is None or weights is None:
                issues.append("field.generator: spectral mode needs atoms and weights")
            else:
                gen = spectral(np.asarray(atoms, dtype=float), np.asarray(weights, dtype=float), as_operator(b))
        else:
            issues.append(
                "field.generator.mode must be one of per-component, "
                f"complex-isotropic, gaussian, spectral; got {gen_mode!r}"
            )
    except Exception as exc:
        issues.append(f"field.generator: {exc}")

    grid_tbl = field_tbl.get("grid", {})
    grid = GridSpec(
        kind=grid_tbl.get("kind", "uniform"),
        r_int=(float(grid_tbl["r_int"]) if "r_int" in grid_tbl else None),
        h=float(grid_tbl.get("h", 0.05)),
        r0=(float(grid_tbl["r0"]) if "r0" in grid_tbl else None),
        ratio=float(grid_tbl.get("ratio", 1.05)),
    )

    if issues:
        raise ConfigError("invalid config:\n- " + "\n- ".join(issues))

    field = make_config(
        representation, e, d_mat, b, phi, gen, grid=grid, seed=seed, n_terms=n_terms
    )

    d_dom = field.dim_domain
    m = field.dim_value

    eval_tbl = data.get("eval", {})
    eval_start = None
    eval_extent = None
    if "points" in eval_tbl:
        eval_mode = "points"
        pts = _points(eval_tbl["points"], d_dom, "eval.points", issues)
        dims = (int(pts.shape[0]),) if pts is not None else ()
    elif "counts" in eval_tbl:
        eval_mode = "grid"
        counts = [int(c) for c in np.asarray(eval_tbl["counts"]).ravel()]
        extent = _vector(eval_tbl.get("extent", [1.0] * d_dom), "eval.extent", issues)
        start = _vector(eval_tbl.get("start", [0.0] * d_dom), "eval.start", issues)
        if len(counts) != d_dom or (extent is not None and extent.size != d_dom):
            issues.append(
                f"eval.counts and eval.extent must have {d_dom} entries"
            )
            pts, dims = None, ()
        elif any(c < 1 for c in counts):
            issues.append("eval.counts entries must be positive")
            pts, dims = None, ()
        else:
            axes = [
                start[j] + np.linspace(0.0, extent[j], counts[j])
                for j in range(d_dom)
            ]
            mesh = np.meshgrid(*axes, indexing="ij")
            pts = np.stack([g.ravel() for g in mesh], axis=1)
            dims = tuple(counts)
            eval_start = start
            eval_extent = extent
    else:
        eval_mode = "points"
        pts = np.concatenate([np.zeros((1, d_dom)), np.eye(d_dom)[:1]], axis=0)
        dims = (2,)

    verify_tbl = data.get("verify", {})
    t_default = np.concatenate([np.eye(d_dom)[:1], np.ones((1, d_dom))], axis=0)
    if d_dom == 1:
        t_default = t_default[:1]
    u_default = list(np.eye(m)) + [np.full(m, 0.5)]
    t_probes = (
        _points(verify_tbl["t_probes"], d_dom, "verify.t_probes", issues)
        if "t_probes" in verify_tbl
        else t_default
    )
    u_raw = verify_tbl.get("u_probes")
    if u_raw is not None:
        u_arr = _points(u_raw, m, "verify.u_probes", issues)
        u_probes = tuple(u_arr) if u_arr is not None else tuple(u_default)
    else:
        u_probes = tuple(u_default)
    h_values = (
        _points(verify_tbl["h_values"], d_dom, "verify.h_values", issues)
        if "h_values" in verify_tbl
        else t_default.copy()
    )
    stability_t = (
        _points(verify_tbl["stability_t"], d_dom, "verify.stability_t", issues)
        if "stability_t" in verify_tbl
        else np.eye(d_dom)[:1]
    )
    verify = VerifySettings(
        r_values=tuple(float(r) for r in verify_tbl.get("r_values", (0.5, 2.0))),
        h_values=h_values if h_values is not None else t_default.copy(),
        t_probes=t_probes if t_probes is not None else t_default,
        u_probes=u_probes,
        n_fold=int(verify_tbl.get("n_fold", 4)),
        n_replicates=int(verify_tbl.get("n_replicates", 10_000)),
        component=int(verify_tbl.get("component", 0)),
        stability_t=stability_t if stability_t is not None else np.eye(d_dom)[:1],
    )

    check_tbl = data.get("check", {})
    check_t = (
        _points(check_tbl["t"], d_dom, "check.t", issues)
        if "t" in check_tbl
        else np.ones((1, d_dom))
    )
    check = CheckSettings(
        t=(check_t[0] if check_t is not None else np.ones(d_dom)),
        tolerance=float(check_tbl.get("tolerance", 1e-3)),
        radius=float(check_tbl.get("radius", 1.0)),
        delta1=(float(check_tbl["delta1"]) if "delta1" in check_tbl else None),
        delta2=(float(check_tbl["delta2"]) if "delta2" in check_tbl else None),
    )

    if issues:
        raise ConfigError("invalid config:\n- " + "\n- ".join(issues))
    return ExperimentConfig(
        command=command,
        field=field,
        replicates=replicates,
        eval_mode=eval_mode,
        eval_points=pts,
        eval_dims=dims,
        eval_start=eval_start,
        eval_extent=eval_extent,
        verify=verify,
        check=check,
    )


# ---------------------------------------------------------------------------
# canonical serialization
# ---------------------------------------------------------------------------


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        r = repr(float(v))
        return r if ("." in r or "e" in r or "n" in r) else r + ".0"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize value of type {type(v)!r}")


def _emit_table(name: str, table: dict, lines: list) -> None:
    scalars = {k: v for k, v in table.items() if not isinstance(v, dict)}
    subtables = {k: v for k, v in table.items() if isinstance(v, dict)}
    if name:
        lines.append(f"[{name}]")
    for k in sorted(scalars):
        lines.append(f"{k} = {_fmt_value(scalars[k])}")
    for k in sorted(subtables):
        lines.append("")
        _emit_table(f"{name}.{k}" if name else k, subtables[k], lines)


def _to_document(cfg: ExperimentConfig) -> dict:
    field = cfg.field
    phi_tbl = {"kind": field.phi.kind}
    if field.phi.kind == "power-sum":
        phi_tbl["powers"] = [float(x) for x in field.phi.powers]
    else:
        phi_tbl["scale"] = float(field.phi.scale)
    gen = field.gen
    if gen.mode == "per-component":
        gen_tbl = {
            "mode": "complex-isotropic" if gen.complex_pairs else "per-component",
            "alphas": [float(a) for a in gen.alphas],
        }
    elif gen.mode == "gaussian":
        gen_tbl = {"mode": "gaussian", "covariance": gen.covariance.tolist()}
    else:
        gen_tbl = {
            "mode": "spectral",
            "atoms": gen.atoms.tolist(),
            "weights": gen.weights.tolist(),
        }
    if field.n_terms != 1000:
        gen_tbl["n_terms"] = int(field.n_terms)
    grid_tbl = {"kind": field.grid.kind, "h": float(field.grid.h), "ratio": float(field.grid.ratio)}
    if field.grid.r_int is not None:
        grid_tbl["r_int"] = float(field.grid.r_int)
    if field.grid.r0 is not None:
        grid_tbl["r0"] = float(field.grid.r0)

    doc = {
        "seed": int(field.seed),
        "replicates": int(cfg.replicates),
        "field": {
            "representation": field.representation,
            "e": field.e.entries.tolist(),
            "d": field.d.entries.tolist(),
            "b": field.b.entries.tolist(),
            "phi": phi_tbl,
            "generator": gen_tbl,
            "grid": grid_tbl,
        },
        "verify": {
            "r_values": [float(r) for r in cfg.verify.r_values],
            "h_values": cfg.verify.h_values.tolist(),
            "t_probes": cfg.verify.t_probes.tolist(),
            "u_probes": [np.asarray(u).tolist() for u in cfg.verify.u_probes],
            "n_fold": int(cfg.verify.n_fold),
            "n_replicates": int(cfg.verify.n_replicates),
            "component": int(cfg.verify.component),
            "stability_t": cfg.verify.stability_t.tolist(),
        },
        "check": {
            "t": cfg.check.t.tolist(),
            "tolerance": float(cfg.check.tolerance),
            "radius": float(cfg.check.radius),
        },
    }
    if cfg.command is not None:
        doc["command"] = cfg.command
    if cfg.check.delta1 is not None:
        doc["check"]["delta1"] = float(cfg.check.delta1)
    if cfg.check.delta2 is not None:
        doc["check"]["delta2"] = float(cfg.check.delta2)
    if cfg.eval_mode == "grid":
        doc["eval"] = {
            "counts": [int(c) for c in cfg.eval_dims],
            "extent": cfg.eval_extent.tolist(),
            "start": cfg.eval_start.tolist(),
        }
    else:
        doc["eval"] = {"points": cfg.eval_points.tolist()}
    return doc


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical TOML text: sorted keys, round-trip float formatting."""
    doc = _to_document(cfg)
    lines = []
    _emit_table("", {k: v for k, v in doc.items() if not isinstance(v, dict)}, lines)
    for k in sorted(k for k, v in doc.items() if isinstance(v, dict)):
        lines.append("")
        _emit_table(k, doc[k], lines)
    return "\n".join(lines) + "\n"


def config_hash(cfg: ExperimentConfig) -> str:
    """SHA-256 of the canonical serialization."""
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()
