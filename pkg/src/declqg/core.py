"""Shared numeric foundations.

Dense matrices are plain ``numpy.ndarray`` objects (float64, 2-d); this module
adds the validation, block assembly, tolerant pseudoinverse, and deterministic
random streams that the rest of the package builds on.  Everything here is a
pure function or an immutable value, safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: Relative singular-value cutoff used for pseudoinverses.  Shared-memory
#: increments are noiseless functions of the state, so innovation covariances
#: are exactly rank deficient and a hard relative threshold is required.
DEFAULT_RTOL = 1e-9


class InvalidMatrix(ValueError):
    """Raised when a matrix argument is non-finite or badly shaped."""


class DimMismatch(ValueError):
    """Raised when operand dimensions are inconsistent."""


class TimeOutOfRange(IndexError):
    """Raised when a time index falls outside 1..T."""


class InvalidDelay(ValueError):
    """Raised for sharing delays < 1 or incompatible with the horizon."""


class WrongControllerCount(ValueError):
    """Raised when a builder requires a specific number of controllers."""


class UnsupportedProtocol(ValueError):
    """Raised when an operation needs a protocol family it was not given."""


class NumericalBreakdown(ArithmeticError):
    """Raised when a recursion loses positive semi-definiteness.

    Carries the 1-based step index ``t`` at which the breakdown occurred.
    """

    def __init__(self, message: str, t: int | None = None):
        super().__init__(message if t is None else f"{message} (t={t})")
        self.t = t


def as_matrix(value, rows: int | None = None, cols: int | None = None,
              name: str = "matrix") -> np.ndarray:
    """Coerce ``value`` to a finite, read-only float64 2-d array.

    Scalars become 1x1.  If ``rows``/``cols`` are given, the shape is checked
    and a :class:`DimMismatch` raised on disagreement.
    """
    m = np.asarray(value, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim == 1:
        m = m.reshape(-1, 1) if cols == 1 else m.reshape(1, -1)
    if m.ndim != 2:
        raise InvalidMatrix(f"{name}: expected 2-d data, got ndim={m.ndim}")
    if m.size and not np.isfinite(m).all():
        raise InvalidMatrix(f"{name}: contains non-finite entries")
    if rows is not None and m.shape[0] != rows:
        raise DimMismatch(f"{name}: expected {rows} rows, got {m.shape[0]}")
    if cols is not None and m.shape[1] != cols:
        raise DimMismatch(f"{name}: expected {cols} cols, got {m.shape[1]}")
    m = m.copy()
    m.flags.writeable = False
    return m


def as_vector(value, dim: int | None = None, name: str = "vector") -> np.ndarray:
    v = np.asarray(value, dtype=float).reshape(-1)
    if v.size and not np.isfinite(v).all():
        raise InvalidMatrix(f"{name}: contains non-finite entries")
    if dim is not None and v.shape[0] != dim:
        raise DimMismatch(f"{name}: expected dim {dim}, got {v.shape[0]}")
    return v


def sym(m: np.ndarray) -> np.ndarray:
    """Symmetrize, suppressing round-off drift after Riccati steps."""
    return (m + m.T) / 2.0


def blkdiag(blocks) -> np.ndarray:
    """Block-diagonal assembly; zero-dimension blocks are first class."""
    blocks = [np.atleast_2d(np.asarray(b, dtype=float)) for b in blocks]
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols))
    r = c = 0
    for b in blocks:
        out[r:r + b.shape[0], c:c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


def hstack_blocks(blocks) -> np.ndarray:
    """Horizontal stack that tolerates zero-column blocks."""
    blocks = [np.atleast_2d(np.asarray(b, dtype=float)) for b in blocks]
    rows = max((b.shape[0] for b in blocks), default=0)
    blocks = [b if b.size or b.shape[0] == rows else b.reshape(rows, 0)
              for b in blocks]
    return np.hstack(blocks) if blocks else np.zeros((0, 0))


def pinv(m, rtol: float = DEFAULT_RTOL) -> np.ndarray:
    """Moore-Penrose pseudoinverse with a relative singular-value cutoff.

    Singular values below ``rtol * sigma_max`` are treated as exactly zero.
    """
    if not rtol > 0:
        raise ValueError("rtol must be positive")
    m = as_matrix(m, name="pinv operand")
    if m.size == 0:
        return np.zeros((m.shape[1], m.shape[0]))
    return np.linalg.pinv(m, rcond=rtol)


def solve_pd(m: np.ndarray, rhs: np.ndarray, t: int | None = None) -> np.ndarray:
    """Solve ``m x = rhs`` for symmetric positive definite ``m``.

    Raises :class:`NumericalBreakdown` when the Cholesky factorization fails.
    """
    if m.size == 0:
        return np.zeros((m.shape[1],) + rhs.shape[1:])
    try:
        c = np.linalg.cholesky(sym(m))
    except np.linalg.LinAlgError:
        raise NumericalBreakdown("control bracket is not positive definite", t)
    y = np.linalg.solve(c, rhs)
    return np.linalg.solve(c.T, y)


def eig_bounds(m: np.ndarray) -> tuple[float, float]:
    """(min, max) eigenvalue of a symmetric matrix; (0, 0) for empty."""
    if m.size == 0:
        return 0.0, 0.0
    w = np.linalg.eigvalsh(sym(m))
    return float(w[0]), float(w[-1])


def check_psd(m: np.ndarray, rel: float = 1e-10, name: str = "matrix",
              t: int | None = None) -> None:
    """Require min eigenvalue >= -rel * max(eig_max, 1)."""
    lo, hi = eig_bounds(m)
    if lo < -rel * max(hi, 1.0):
        raise NumericalBreakdown(f"{name} is not PSD (min eig {lo:.3e})", t)


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    """Factor ``F`` with ``F F^T = m`` for PSD ``m`` (eigen based)."""
    if m.size == 0:
        return np.zeros_like(m)
    w, v = np.linalg.eigh(sym(m))
    w = np.clip(w, 0.0, None)
    return v * np.sqrt(w)


def seeded_stream(seed: int, stream_index: int) -> np.random.Generator:
    """Deterministic random stream keyed by ``(seed, stream_index)``.

    Distinct pairs yield statistically independent streams; the same pair
    yields the identical sequence on every call and platform.
    """
    seed = int(seed)
    stream_index = int(stream_index)
    if seed < 0 or stream_index < 0:
        raise ValueError("seed and stream_index must be non-negative")
    return np.random.default_rng([seed, stream_index])


@dataclass(frozen=True)
class GaussianSpec:
    """Zero-checked Gaussian: mean vector plus validated covariance."""

    mean: np.ndarray
    covariance: np.ndarray

    def __init__(self, mean, covariance, name: str = "covariance"):
        cov = as_matrix(covariance, name=name)
        if cov.shape[0] != cov.shape[1]:
            raise InvalidMatrix(f"{name}: covariance must be square")
        mu = as_vector(mean, dim=cov.shape[0], name=f"{name} mean")
        scale = np.abs(cov).max() if cov.size else 0.0
        if cov.size and np.abs(cov - cov.T).max() > 1e-12 * max(scale, 1.0):
            raise InvalidMatrix(f"{name}: covariance is not symmetric")
        lo, hi = eig_bounds(cov)
        if lo < -1e-10 * max(hi, 0.0) - 1e-300:
            raise InvalidMatrix(
                f"{name}: covariance is not PSD (min eig {lo:.3e})")
        object.__setattr__(self, "mean", mu)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class SelectionMat:
    """Row-stochastic binary matrix: picks components out of a stacked vector."""

    base: np.ndarray

    def __init__(self, base):
        m = as_matrix(base, name="selection matrix")
        if m.size:
            binary = np.isin(m, (0.0, 1.0)).all()
            if not binary:
                raise InvalidMatrix("selection matrix entries must be 0 or 1")
            if not np.all(m.sum(axis=1) == 1.0):
                raise InvalidMatrix("each selection row must sum to exactly 1")
        object.__setattr__(self, "base", m)

    def apply(self, v) -> np.ndarray:
        v = as_vector(v, dim=self.base.shape[1], name="selection input")
        return self.base @ v


def selection_from_indices(indices, width: int) -> np.ndarray:
    """0/1 matrix whose row r selects component ``indices[r]`` of a vector."""
    out = np.zeros((len(indices), width))
    for r, j in enumerate(indices):
        if not 0 <= j < width:
            raise DimMismatch(f"selection index {j} out of range [0, {width})")
        out[r, j] = 1.0
    return out
