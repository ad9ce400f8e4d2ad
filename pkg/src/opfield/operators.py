"""Real square matrices used as scaling exponents, and their fractional powers.

The central object is ``OperatorSpec``, a thin immutable wrapper around a real
d x d matrix A that caches spectral data and provides fast evaluation of

    s^A := exp(ln(s) A),   s > 0,

both for a single s and vectorized over many values of s.  Three evaluation
strategies are selected at construction time:

* exact diagonal powers when A is diagonal,
* a complex eigendecomposition when A is diagonalizable with a
  well-conditioned eigenvector matrix,
* a closed-form nilpotent series when the matrix is supplied in real
  block-diagonal Jordan form together with ``jordan_blocks`` metadata,
* scaling-and-squaring (Pade order 13, via scipy) otherwise.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg

from .errors import InvalidOperatorError

_EIG_COND_LIMIT = 1e7


def _as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidOperatorError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidOperatorError("matrix entries must be finite")
    return m


class OperatorSpec:
    """A real square exponent matrix with cached spectral data.

    Instances are treated as immutable after construction; the entry array is
    frozen.  ``jordan_blocks`` is an optional tuple of ``(eigenvalue, size)``
    pairs describing a real block-diagonal Jordan form; when present and
    consistent with the entries it unlocks a closed-form power evaluation and
    per-component regularity targets.
    """

    def __init__(self, entries, jordan_blocks=None):
        m = _as_matrix(entries).copy()
        m.flags.writeable = False
        self.entries = m
        self.dim = m.shape[0]
        self.trace = float(np.trace(m))
        self.eigenvalues = np.linalg.eigvals(m)
        re = self.eigenvalues.real
        self.lambda_min = float(re.min())
        self.lambda_max = float(re.max())
        self._caches: dict = {}
        self._transposed = None

        supplied = jordan_blocks is not None
        if jordan_blocks is None and self._is_diagonal():
            jordan_blocks = tuple((float(m[i, i]), 1) for i in range(self.dim))
        self.jordan_blocks = (
            tuple((float(l), int(n)) for l, n in jordan_blocks)
            if jordan_blocks is not None
            else None
        )
        if supplied:
            self._validate_jordan()
        self._strategy = self._pick_strategy()

    # -- construction helpers -------------------------------------------------

    def _is_diagonal(self) -> bool:
        return bool(np.all(self.entries == np.diag(np.diagonal(self.entries))))

    def _validate_jordan(self):
        """Check the metadata matches a real block-diagonal Jordan layout."""
        sizes = [n for _, n in self.jordan_blocks]
        if sum(sizes) != self.dim or any(n < 1 for n in sizes):
            raise InvalidOperatorError("jordan_blocks sizes do not sum to the dimension")
        mask = np.ones_like(self.entries, dtype=bool)
        off = 0
        for lam, n in self.jordan_blocks:
            blk = self.entries[off : off + n, off : off + n]
            if np.max(np.abs(np.diagonal(blk) - lam)) > 1e-12:
                raise InvalidOperatorError("jordan_blocks eigenvalue does not match the diagonal")
            if n > 1 and np.max(np.abs(np.diagonal(blk, 1) - 1.0)) > 1e-12:
                raise InvalidOperatorError("jordan block superdiagonal must be 1")
            mask[off : off + n, off : off + n] = False
            off += n
        if mask.any() and np.max(np.abs(self.entries[mask])) > 0:
            raise InvalidOperatorError("entries outside the declared Jordan blocks must vanish")
        sub = self.entries - np.diag(np.diagonal(self.entries)) - np.diag(np.diagonal(self.entries, 1), 1)
        if np.max(np.abs(sub)) > 0:
            raise InvalidOperatorError("jordan form admits only diagonal and superdiagonal entries")

    def _pick_strategy(self):
        if self._is_diagonal():
            return ("diag", np.diagonal(self.entries).copy())
        if self.jordan_blocks is not None:
            blocks = []
            off = 0
            for lam, n in self.jordan_blocks:
                nil = np.diag(np.ones(n - 1), 1) if n > 1 else np.zeros((n, n))
                powers = [np.eye(n)]
                for _ in range(n - 1):
                    powers.append(powers[-1] @ nil)
                blocks.append((off, n, lam, np.stack(powers)))
                off += n
            return ("jordan", blocks)
        w, v = np.linalg.eig(self.entries)
        if np.linalg.cond(v) < _EIG_COND_LIMIT:
            return ("eig", (v, w, np.linalg.inv(v)))
        return ("expm", None)

    # -- powers ---------------------------------------------------------------

    def pow(self, s: float) -> np.ndarray:
        """Return s^A for a single positive scale s."""
        if s <= 0 or not math.isfinite(s):
            raise ValueError(f"scale must be a positive finite real, got {s}")
        if s == 1.0:
            return np.eye(self.dim)
        return self.pow_many(np.array([s]))[0]

    def pow_many(self, s) -> np.ndarray:
        """Return an (n, d, d) stack of s_i^A for an array of positive scales."""
        s = np.asarray(s, dtype=float)
        if s.ndim != 1:
            s = s.reshape(-1)
        if np.any(s <= 0) or not np.all(np.isfinite(s)):
            raise ValueError("all scales must be positive finite reals")
        kind, data = self._strategy
        logs = np.log(s)
        if kind == "diag":
            out = np.zeros((s.size, self.dim, self.dim))
            idx = np.arange(self.dim)
            out[:, idx, idx] = np.exp(np.outer(logs, data))
            return out
        if kind == "jordan":
            out = np.zeros((s.size, self.dim, self.dim))
            for off, n, lam, powers in data:
                scale = np.exp(lam * logs)
                acc = np.zeros((s.size, n, n))
                term = np.ones(s.size)
                for k in range(n):
                    acc += term[:, None, None] * powers[k]
                    term = term * logs / (k + 1)
                out[:, off : off + n, off : off + n] = scale[:, None, None] * acc
            return out
        if kind == "eig":
            v, w, vinv = data
            e = np.exp(np.outer(logs, w))
            return np.einsum("ij,nj,jk->nik", v, e, vinv).real
        if kind == "transpose":
            return data.pow_many(s).transpose(0, 2, 1)
        out = np.empty((s.size, self.dim, self.dim))
        for i, l in enumerate(logs):
            out[i] = scipy.linalg.expm(l * self.entries)
        return out

    def transpose(self) -> "OperatorSpec":
        """The adjoint exponent A^T, sharing spectral data so that
        ``mat_exp(A.transpose(), s) == mat_exp(A, s).T`` holds exactly."""
        if self._transposed is None:
            t = object.__new__(OperatorSpec)
            t.entries = self.entries.T
            t.dim = self.dim
            t.trace = self.trace
            t.eigenvalues = self.eigenvalues
            t.lambda_min = self.lambda_min
            t.lambda_max = self.lambda_max
            t.jordan_blocks = None
            t._caches = {}
            t._strategy = ("transpose", self)
            t._transposed = self
            self._transposed = t
        return self._transposed

    # -- misc -----------------------------------------------------------------

    @property
    def has_positive_spectrum(self) -> bool:
        return self.lambda_min > 0

    def norm(self) -> float:
        return float(np.linalg.norm(self.entries, 2))

    def __eq__(self, other):
        return isinstance(other, OperatorSpec) and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash(self.entries.tobytes())

    def __repr__(self):
        return f"OperatorSpec({self.entries.tolist()!r})"


def as_operator(a) -> OperatorSpec:
    """Coerce a matrix-like object into an OperatorSpec."""
    return a if isinstance(a, OperatorSpec) else OperatorSpec(a)


def mat_exp(a, s: float) -> np.ndarray:
    """The matrix power s^A = exp(ln(s) A) for positive s."""
    return as_operator(a).pow(float(s))


def matrix_powers(a, values: np.ndarray) -> np.ndarray:
    """Stack of matrix powers v^A for v >= 0, with the convention 0^A = 0.

    Returns an array of shape ``(n, dim, dim)`` for ``values`` of shape
    ``(n,)``.  Entries with ``v == 0`` map to the zero matrix, which keeps
    kernels built from differences of powers well defined at their
    singular points.
    """
    op = as_operator(a)
    values = np.asarray(values, dtype=float).reshape(-1)
    out = np.zeros((values.size, op.dim, op.dim))
    pos = values > 0.0
    if np.any(pos):
        out[pos] = op.pow_many(values[pos])
    return out


def is_multiple_of_identity(a, tol: float = 1e-12):
    """Return the scalar c when A = c*I within tol, else None."""
    a = as_operator(a)
    c = a.trace / a.dim
    if np.max(np.abs(a.entries - c * np.eye(a.dim))) <= tol * (abs(c) + 1.0):
        return float(c)
    return None


def commutes(a, b, tol: float = 1e-10) -> bool:
    """True iff ||AB - BA|| <= tol * (||A|| ||B|| + 1) in operator norm."""
    a = as_operator(a).entries
    b = as_operator(b).entries
    gap = np.linalg.norm(a @ b - b @ a, 2)
    return bool(gap <= tol * (np.linalg.norm(a, 2) * np.linalg.norm(b, 2) + 1.0))


def _fit_norm_bound(spec: OperatorSpec, delta: float, s0: float):
    """Fit the two branch constants so the power-law envelope dominates
    ||s^A|| on 64 log-spaced samples per branch."""
    lo_exp = spec.lambda_min - delta
    hi_exp = spec.lambda_max + delta
    s_lo = np.geomspace(s0 * 1e-4, s0, 64)
    s_hi = np.geomspace(s0, s0 * 1e4, 64)
    norms_lo = np.linalg.norm(spec.pow_many(s_lo), 2, axis=(1, 2))
    norms_hi = np.linalg.norm(spec.pow_many(s_hi), 2, axis=(1, 2))
    c_lo = float(np.max(norms_lo / s_lo**lo_exp))
    c_hi = float(np.max(norms_hi / s_hi**hi_exp))
    return c_lo, c_hi


def norm_bound(a, s, delta: float, s0: float = 1.0):
    """Evaluate the fitted two-branch envelope C1*s^(lambda-delta) (s <= s0),
    C2*s^(Lambda+delta) (s >= s0) dominating ||s^A|| near the fitted range."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    if s0 <= 0:
        raise ValueError("s0 must be positive")
    spec = as_operator(a)
    key = ("norm_bound", float(delta), float(s0))
    if key not in spec._caches:
        spec._caches[key] = _fit_norm_bound(spec, delta, s0)
    c_lo, c_hi = spec._caches[key]
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr <= 0):
        raise ValueError("scales must be positive")
    out = np.where(
        s_arr <= s0,
        c_lo * s_arr ** (spec.lambda_min - delta),
        c_hi * s_arr ** (spec.lambda_max + delta),
    )
    return float(out) if np.isscalar(s) or s_arr.ndim == 0 else out
