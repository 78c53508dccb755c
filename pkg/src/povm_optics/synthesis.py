"""Factor a unitary on ``C^N (x) C^2`` into two-path Mach-Zehnder blocks.

Right-multiplying ``U`` by block rotations ``T_{N,N-1}, ..., T_{N,1}``
clears path ``N``'s row block, leaving ``U_{2N-2} (+) I_2``; repeating on the
reduced matrix ends at the identity, so ``U`` is the product of the
adjoint blocks in reverse order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .core import (
    BUILD_TOL,
    STRUCT_TOL,
    DimensionError,
    DomainError,
    as_matrix,
    dagger,
    frozen,
    is_unitary,
    max_abs,
)
from .neumark import DilationResult, column_gram_error

VERIFY_TOL = 1e-9


def path_slice(path: int) -> slice:
    """Coordinates of 1-based ``path`` in the path-major ordering."""
    return slice(2 * (path - 1), 2 * path)


def _block_indices(q: int, p: int) -> np.ndarray:
    return np.r_[2 * (q - 1) : 2 * q, 2 * (p - 1) : 2 * p]


@dataclass(frozen=True)
class BlockRotation:
    """A 4x4 unitary on paths ``(q, p)``, ``p > q``, as used during elimination.

    ``block`` acts on coordinates ordered (path q: H, V; path p: H, V). The
    optical element realizes ``block^H``.
    """

    p: int
    q: int
    block: np.ndarray

    def __post_init__(self):
        if not self.p > self.q >= 1:
            raise DomainError(f"block rotation needs p > q >= 1, got p={self.p}, q={self.q}")
        b = as_matrix(self.block, square=True)
        if b.shape != (4, 4):
            raise DimensionError("block rotations are 4x4")
        object.__setattr__(self, "block", frozen(b))

    @property
    def paths(self) -> tuple[int, int]:
        return (self.q, self.p)

    def embed(self, dim: int) -> np.ndarray:
        if 2 * self.p > dim:
            raise DimensionError(f"path {self.p} does not fit in dimension {dim}")
        out = np.eye(dim, dtype=complex)
        idx = _block_indices(self.q, self.p)
        out[np.ix_(idx, idx)] = self.block
        return out


@dataclass(frozen=True)
class LocalRotation:
    """A 2x2 polarization unitary on one path left over after elimination."""

    path: int
    block: np.ndarray

    def __post_init__(self):
        b = as_matrix(self.block, square=True)
        if b.shape != (2, 2):
            raise DimensionError("local rotations are 2x2")
        object.__setattr__(self, "block", frozen(b))

    def embed(self, dim: int) -> np.ndarray:
        out = np.eye(dim, dtype=complex)
        out[path_slice(self.path), path_slice(self.path)] = self.block
        return out


@dataclass(frozen=True)
class MzFactorization:
    """``U (T_1 T_2 ... T_K) L = I`` with ``factors = (T_1, ..., T_K)``.

    ``local_tail`` holds the path-local rotations making up ``L``; they
    commute with each other and are applied after the last factor.
    """

    dim: int
    factors: tuple[BlockRotation, ...]
    local_tail: tuple[LocalRotation, ...] = field(default=())

    @property
    def n_paths(self) -> int:
        return self.dim // 2


def basis_mapping_unitary(d: DilationResult) -> np.ndarray:
    """``U`` with ``U phi_{2k-1} = |k,H>`` and ``U phi_{2k} = |k,V>``: the adjoint of the column matrix."""
    if column_gram_error(d) > BUILD_TOL:
        raise DomainError("dilation columns are not orthonormal")
    return dagger(d.columns)


def _clearing_block(r: np.ndarray) -> np.ndarray:
    """Unitary ``B`` with ``r @ B = [0, X]`` for a 2x4 row block ``r``."""
    _, _, vh = np.linalg.svd(r)
    v = dagger(vh)
    return np.column_stack([v[:, 2], v[:, 3], v[:, 0], v[:, 1]])


def eliminate(u) -> MzFactorization:
    """Reduce ``u`` to the identity by right-multiplying Mach-Zehnder blocks.

    For ``p = N, ..., 2`` and ``q = p-1, ..., 1`` a block on paths
    ``(q, p)`` zeroes the coupling of path ``p``'s rows to path ``q``'s
    columns; couplings already below tolerance emit no block. The 2x2
    remainder on path ``p`` is folded into that level's last block (or kept
    in the local tail when the level emitted none).
    """
    w = as_matrix(u, square=True)
    dim = w.shape[0]
    if dim % 2:
        raise DimensionError("dimension must be even (paths x polarization)")
    if not is_unitary(w, STRUCT_TOL):
        raise DomainError("input is not unitary")
    n = dim // 2
    factors: list[BlockRotation] = []
    tail: list[LocalRotation] = []

    for p in range(n, 1, -1):
        level: list[int] = []
        ps = path_slice(p)
        for q in range(p - 1, 0, -1):
            if max_abs(w[ps, path_slice(q)]) < BUILD_TOL:
                continue
            idx = _block_indices(q, p)
            block = _clearing_block(w[ps][:, idx])
            factors.append(BlockRotation(p, q, block))
            level.append(len(factors) - 1)
            w[:, idx] = w[:, idx] @ block
        rest = w[ps, ps].copy()
        if max_abs(rest - np.eye(2)) > BUILD_TOL:
            fix = dagger(rest)
            if level:
                f = factors[level[-1]]
                b = f.block.copy()
                b[:, 2:] = b[:, 2:] @ fix
                factors[level[-1]] = BlockRotation(f.p, f.q, b)
            else:
                tail.append(LocalRotation(p, fix))
            w[:, ps] = w[:, ps] @ fix
        # the cleared row block is [0 ... 0, I]; unitarity forces the column block too
        w[ps, :] = 0
        w[:, ps] = 0
        w[ps, ps] = np.eye(2)

    first = path_slice(1)
    rest = w[first, first].copy()
    if max_abs(rest - np.eye(2)) > BUILD_TOL:
        fix = dagger(rest)
        last = factors[-1] if factors else None
        # only the final block may absorb it: earlier blocks are followed by others
        if last is not None and last.q == 1 and last.p == 2:
            b = last.block.copy()
            b[:, :2] = b[:, :2] @ fix
            factors[-1] = BlockRotation(last.p, last.q, b)
        else:
            tail.append(LocalRotation(1, fix))
    return MzFactorization(dim, tuple(factors), tuple(tail))


def reconstruct(f: MzFactorization) -> np.ndarray:
    """``U = L^H T_K^H ... T_1^H``."""
    out = np.eye(f.dim, dtype=complex)
    for t in f.factors:
        if 2 * t.p > f.dim:
            raise DimensionError(f"factor on path {t.p} exceeds dimension {f.dim}")
        out = dagger(t.embed(f.dim)) @ out
    for loc in f.local_tail:
        if 2 * loc.path > f.dim:
            raise DimensionError(f"local rotation on path {loc.path} exceeds dimension {f.dim}")
        out = dagger(loc.embed(f.dim)) @ out
    return out


def reconstruction_residual(f: MzFactorization, u) -> float:
    return max_abs(reconstruct(f) - as_matrix(u))


def prune_identity_blocks(f: MzFactorization, input_paths: Iterable[int] = (1,)) -> MzFactorization:
    """Drop blocks that cannot affect light entering on ``input_paths``.

    Blocks act in the order ``T_1^H, T_2^H, ...``. A block is dropped when it
    is the identity or when both of its paths are still vacuum at that point,
    since it then maps vacuum to vacuum. Tail rotations on paths never
    reached are dropped likewise. The action on the input-path columns is
    unchanged.
    """
    active = set(input_paths)
    kept: list[BlockRotation] = []
    for t in f.factors:
        if max_abs(t.block - np.eye(4)) <= STRUCT_TOL:
            continue
        if t.p not in active and t.q not in active:
            continue
        kept.append(t)
        active.update(t.paths)
    tail = tuple(
        loc for loc in f.local_tail if loc.path in active and max_abs(loc.block - np.eye(2)) > STRUCT_TOL
    )
    return MzFactorization(f.dim, tuple(kept), tail)


def input_columns(paths: Iterable[int]) -> np.ndarray:
    return np.concatenate([np.arange(2 * (k - 1), 2 * k) for k in sorted(paths)])
