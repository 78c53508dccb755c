"""Lift a qubit POVM to an orthogonal measurement on paths x polarization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    STRUCT_TOL,
    DimensionError,
    DomainError,
    as_matrix,
    as_vector,
    complete_orthonormal,
    dagger,
    frozen,
    max_abs,
)
from .povm import Povm, validate

SENTINEL = "vacuum-sentinel"


@dataclass(frozen=True)
class DilationResult:
    """Orthonormal columns ``phi_d`` of a unitary on ``C^N (x) C^2``.

    Column ``d`` maps to POVM element ``outcome_map[d]``; ``None`` marks the
    vacuum sentinel appended for odd element counts. Coordinates are ordered
    path-major: index ``2(k-1) + s`` is path ``k`` (1-based) with
    polarization ``s`` (0 = H, 1 = V).
    """

    n_paths: int
    columns: np.ndarray
    outcome_map: tuple[int | None, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        cols = as_matrix(self.columns, square=True)
        if cols.shape[0] != 2 * self.n_paths:
            raise DimensionError("dilation columns must live in C^(2N)")
        if len(self.outcome_map) != cols.shape[1] or len(self.labels) != cols.shape[1]:
            raise DimensionError("outcome map must cover every column")
        object.__setattr__(self, "columns", frozen(cols))

    @property
    def dim(self) -> int:
        return 2 * self.n_paths

    def column(self, d: int) -> np.ndarray:
        return self.columns[:, d]

    @property
    def sentinel_columns(self) -> tuple[int, ...]:
        return tuple(d for d, e in enumerate(self.outcome_map) if e is None)

    def to_dict(self) -> dict:
        return {
            "n_paths": self.n_paths,
            "columns": [[[float(x.real), float(x.imag)] for x in col] for col in self.columns.T],
            "outcome_map": [SENTINEL if e is None else e for e in self.outcome_map],
            "labels": list(self.labels),
        }


@dataclass(frozen=True)
class EmbeddedState:
    vector: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vector", frozen(as_vector(self.vector)))


def _fix_row_phase(row: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(row)))
    return row * (abs(row[k]) / row[k])


def dilate(p) -> DilationResult:
    """Neumark dilation of a rank-one POVM.

    The ``2 x m`` block of weight vectors has orthonormal rows (that is
    completeness), so it extends to an ``m x m`` unitary by completing its
    row space. Its columns are the ``phi_d``. For odd ``m`` the unitary is
    embedded with a trailing 1 so the last canonical vector is a sentinel
    column orthogonal to every embedded input state.

    Parameters
    ----------
    p : Povm or sequence of 2x2 operators
        Operators must be rank one; split others with
        :func:`povm_optics.povm.rank_one_decompose` first.
    """
    if not isinstance(p, Povm):
        ops = [as_matrix(op, square=True) for op in p]
        for op in ops:
            if np.linalg.matrix_rank(op, tol=STRUCT_TOL) > 1:
                raise DomainError(
                    "element has rank 2; split it with rank_one_decompose (or Povm.from_operators) first"
                )
        p = Povm.from_operators(ops)
    report = validate(p)
    if not report.valid:
        raise DomainError(f"cannot dilate an invalid POVM ({report.summary()})")
    m = len(p)
    if m < 2:
        raise DomainError("dilation needs at least two elements")
    n_paths = (m + 1) // 2

    top = np.column_stack([e.vector for e in p.elements])
    basis = complete_orthonormal([top[0], top[1]], m)
    # keep the weight-vector rows verbatim; only the completion rows are new
    rows = [top[0], top[1]] + [_fix_row_phase(r) for r in basis[2:]]
    unitary = np.vstack(rows)

    dim = 2 * n_paths
    columns = np.zeros((dim, dim), dtype=complex)
    columns[:m, :m] = unitary
    outcome_map: list[int | None] = list(range(m))
    labels = list(p.labels)
    if m < dim:
        columns[dim - 1, dim - 1] = 1.0
        outcome_map.append(None)
        labels.append(SENTINEL)
    return DilationResult(n_paths, columns, tuple(outcome_map), tuple(labels))


def embed_state(psi, n_paths: int) -> EmbeddedState:
    """Place a qubit state on path 1: ``(alpha, beta, 0, ..., 0)``."""
    psi = as_vector(psi)
    if psi.shape != (2,):
        raise DimensionError("qubit states live in C^2")
    if abs(np.linalg.norm(psi) - 1) > STRUCT_TOL:
        raise DomainError("state is not normalized")
    out = np.zeros(2 * n_paths, dtype=complex)
    out[:2] = psi
    return EmbeddedState(out)


def column_gram_error(d: DilationResult) -> float:
    c = d.columns
    return max_abs(dagger(c) @ c - np.eye(d.dim))


def restriction_check(d: DilationResult, p: Povm, trials: int, seed: int) -> float:
    """Max Born-rule disagreement between the dilation and the POVM.

    Over ``trials`` Haar-random qubit states, returns
    ``max_d | |<phi_d|Phi>|^2 - <Psi|E_d|Psi> |``; sentinel columns are
    compared against zero.
    """
    live = [e for e in d.outcome_map if e is not None]
    if d.columns.shape[0] != d.dim or len(live) != len(p) or (live and max(live) >= len(p)):
        raise DomainError("dilation does not match the POVM")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((trials, 2)) + 1j * rng.standard_normal((trials, 2))
    psis = z / np.linalg.norm(z, axis=1, keepdims=True)
    # only the first two coordinates of an embedded state are nonzero
    amps = psis @ np.conj(d.columns[:2, :])
    dilated = np.abs(amps) ** 2
    vecs = np.column_stack([e.vector for e in p.elements])
    povm_probs = np.abs(psis.conj() @ vecs) ** 2
    expected = np.zeros_like(dilated)
    for col, e in enumerate(d.outcome_map):
        if e is not None:
            expected[:, col] = povm_probs[:, e]
    return max_abs(dilated - expected)
