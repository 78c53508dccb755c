"""Dense complex linear-algebra helpers shared by every other module.

Matrices and vectors are plain :class:`numpy.ndarray` values of dtype
``complex128``. Functions never modify their inputs.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

#: Tolerance for structural checks (unitarity, completeness, PSD).
STRUCT_TOL = 1e-10
#: Tolerance for freshly constructed orthonormal sets.
BUILD_TOL = 1e-12


class DimensionError(ValueError):
    """Raised when an array has the wrong shape for an operation."""


class ShapeError(ValueError):
    """Raised when a matrix lacks a required structure (e.g. Hermiticity)."""


class DomainError(ValueError):
    """Raised when an input lies outside an operation's domain."""


class DegeneracyError(DomainError):
    """Raised when a set of vectors is numerically linearly dependent."""


class StructureError(ValueError):
    """Raised when an optical circuit is malformed."""


def as_matrix(m, *, square: bool = False) -> np.ndarray:
    """Return ``m`` as a finite complex 2-D array (a copy)."""
    a = np.array(m, dtype=complex)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {a.shape}")
    if square and a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError("matrix has non-finite entries")
    return a


def as_vector(v) -> np.ndarray:
    a = np.array(v, dtype=complex)
    if a.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError("vector has non-finite entries")
    return a


def frozen(a: np.ndarray) -> np.ndarray:
    """Mark ``a`` read-only and return it."""
    a.flags.writeable = False
    return a


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.asarray(m)).T


def max_abs(m) -> float:
    """Max-norm of an array; 0.0 for empty input."""
    a = np.asarray(m)
    return float(np.max(np.abs(a))) if a.size else 0.0


def is_unitary(m, tol: float = STRUCT_TOL) -> bool:
    """True iff the max-norm of ``m^H m - I`` is at most ``tol``."""
    a = as_matrix(m, square=True)
    return max_abs(dagger(a) @ a - np.eye(a.shape[0])) <= tol


def is_hermitian(m, tol: float = STRUCT_TOL) -> bool:
    a = as_matrix(m, square=True)
    return max_abs(a - dagger(a)) <= tol


def is_psd(m, tol: float = STRUCT_TOL) -> bool:
    """True iff every eigenvalue of the Hermitian matrix ``m`` is >= -tol.

    Raises
    ------
    ShapeError
        If ``m`` is not Hermitian within ``tol``.
    """
    a = as_matrix(m, square=True)
    if not is_hermitian(a, tol):
        raise ShapeError("matrix is not Hermitian within tolerance")
    h = 0.5 * (a + dagger(a))
    return bool(np.all(np.linalg.eigvalsh(h) >= -tol))


def _orthogonalize(v: np.ndarray, basis: Sequence[np.ndarray]) -> np.ndarray:
    # two MGS sweeps keep the result orthogonal to ~1e-15 even for poor inputs
    for _ in range(2):
        for b in basis:
            v = v - np.vdot(b, v) * b
    return v


def complete_orthonormal(partial: Iterable, dim: int) -> list[np.ndarray]:
    """Extend ``partial`` to an orthonormal basis of ``C^dim``.

    The inputs are orthonormalized in order by modified Gram-Schmidt, so the
    first ``len(partial)`` outputs span the same space as the inputs (and
    reproduce them when they are already orthonormal). The remaining vectors
    are drawn from the canonical basis, skipping candidates whose residual
    norm falls below ``STRUCT_TOL``.

    Raises
    ------
    DegeneracyError
        If the inputs are numerically linearly dependent.
    """
    vectors = [as_vector(v) for v in partial]
    for v in vectors:
        if v.shape != (dim,):
            raise DimensionError(f"vector of length {v.shape[0]} does not live in C^{dim}")
    if len(vectors) > dim:
        raise DegeneracyError(f"{len(vectors)} vectors cannot be independent in C^{dim}")
    if vectors:
        smallest = np.linalg.svd(np.column_stack(vectors), compute_uv=False)[-1]
        if smallest < STRUCT_TOL:
            raise DegeneracyError(f"input vectors are linearly dependent (sigma_min={smallest:.3g})")

    basis: list[np.ndarray] = []
    for v in vectors:
        r = _orthogonalize(v, basis)
        basis.append(r / np.linalg.norm(r))
    for k in range(dim):
        if len(basis) == dim:
            break
        e = np.zeros(dim, dtype=complex)
        e[k] = 1.0
        r = _orthogonalize(e, basis)
        n = np.linalg.norm(r)
        if n < STRUCT_TOL:
            continue
        basis.append(r / n)
    return basis


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_state(rng: np.random.Generator, dim: int = 2) -> np.ndarray:
    """Haar-random unit vector in ``C^dim``."""
    z = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return z / np.linalg.norm(z)
