"""Qubit POVMs in rank-one weighted-vector form."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import (
    BUILD_TOL,
    STRUCT_TOL,
    DimensionError,
    DomainError,
    as_matrix,
    as_vector,
    dagger,
    frozen,
    is_hermitian,
    is_psd,
)

SQ3_2 = np.sqrt(3.0) / 2.0

HEXAGON_LABELS = ("A+", "A-", "B+", "B-", "C+", "C-")

#: Directions paired into the three inscribed rectangles of the hexagon.
HEXAGON_PAIRS = (("A", "B"), ("B", "C"), ("C", "A"))


def canonical_phase(v: np.ndarray, tol: float = 1e-15) -> np.ndarray:
    """Rotate the global phase of ``v`` so its first nonzero entry is real >= 0."""
    v = np.array(v, dtype=complex)
    for k, x in enumerate(v):
        if abs(x) > tol:
            v = v * (abs(x) / x)
            v[k] = abs(x)
            return v
    return v


@dataclass(frozen=True)
class PovmElement:
    """One rank-one element ``|w><w|`` stored by its unnormalized vector ``w``."""

    vector: np.ndarray
    label: str

    def __post_init__(self):
        v = as_vector(self.vector)
        if v.shape != (2,):
            raise DimensionError("POVM weight vectors live in C^2")
        if np.vdot(v, v).real > 1 + STRUCT_TOL:
            raise DomainError(f"element {self.label!r} has eigenvalue above 1")
        object.__setattr__(self, "vector", frozen(canonical_phase(v)))

    @property
    def operator(self) -> np.ndarray:
        return np.outer(self.vector, np.conj(self.vector))

    @property
    def weight(self) -> float:
        """Trace of the element (squared norm of its vector)."""
        return float(np.vdot(self.vector, self.vector).real)


@dataclass(frozen=True)
class Povm:
    """Ordered list of rank-one elements. Order fixes the outcome ↔ detector map."""

    elements: tuple[PovmElement, ...]
    name: str = ""

    def __post_init__(self):
        elements = tuple(self.elements)
        labels = [e.label for e in elements]
        if len(set(labels)) != len(labels):
            raise DomainError(f"duplicate POVM labels: {labels}")
        object.__setattr__(self, "elements", elements)

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(e.label for e in self.elements)

    @property
    def operators(self) -> list[np.ndarray]:
        return [e.operator for e in self.elements]

    @classmethod
    def from_vectors(cls, vectors: Iterable, labels: Sequence[str] | None = None, name: str = "") -> Povm:
        vectors = list(vectors)
        if labels is None:
            labels = [f"E{d + 1}" for d in range(len(vectors))]
        return cls(tuple(PovmElement(v, lab) for v, lab in zip(vectors, labels, strict=True)), name)

    @classmethod
    def from_operators(cls, operators: Iterable, labels: Sequence[str] | None = None, name: str = "") -> Povm:
        """Build a POVM from general PSD operators, splitting each into rank-one parts.

        An operator of rank two yields two elements labeled ``<label>.1`` and
        ``<label>.2``.
        """
        operators = [as_matrix(op, square=True) for op in operators]
        if labels is None:
            labels = [f"E{d + 1}" for d in range(len(operators))]
        elements = []
        for op, lab in zip(operators, labels, strict=True):
            parts = rank_one_decompose(op)
            if len(parts) == 1:
                elements.append(PovmElement(parts[0], lab))
            else:
                elements.extend(PovmElement(v, f"{lab}.{i + 1}") for i, v in enumerate(parts))
        return cls(tuple(elements), name)

    def to_dict(self) -> dict:
        out = {
            "elements": [
                {"label": e.label, "vector": [[float(x.real), float(x.imag)] for x in e.vector]}
                for e in self.elements
            ]
        }
        if self.name:
            out["name"] = self.name
        return out

    @classmethod
    def from_dict(cls, data: dict) -> Povm:
        try:
            elements = tuple(
                PovmElement(np.array([complex(re, im) for re, im in el["vector"]]), str(el["label"]))
                for el in data["elements"]
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, DomainError):
                raise
            raise DomainError(f"malformed POVM document: {exc}") from exc
        return cls(elements, str(data.get("name", "")))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> Povm:
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ValidationReport:
    element_psd: tuple[bool, ...]
    residual: float
    tol: float = STRUCT_TOL

    @property
    def valid(self) -> bool:
        return all(self.element_psd) and self.residual <= self.tol

    def summary(self) -> str:
        state = "valid" if self.valid else "INVALID"
        return f"{state}: {len(self.element_psd)} elements, completeness residual {self.residual:.3e}"


def validate(p: Povm, tol: float = STRUCT_TOL) -> ValidationReport:
    """Check each element's positivity and the completeness residual ``||sum E_d - I||``.

    The residual is the spectral norm of the deficit matrix.
    """
    ops = p.operators
    psd = tuple(is_psd(op, tol) for op in ops)
    total = np.sum(ops, axis=0) if ops else np.zeros((2, 2), dtype=complex)
    residual = float(np.linalg.norm(total - np.eye(2), ord=2))
    return ValidationReport(psd, residual, tol)


def rank_one_decompose(operator, tol: float = STRUCT_TOL) -> list[np.ndarray]:
    """Split a 2x2 PSD operator into eigenvector-scaled vectors ``sqrt(lam) e``.

    Eigenvalues below ``tol`` are dropped, so a rank-one input yields a
    single vector and the zero operator yields none.
    """
    a = as_matrix(operator, square=True)
    if a.shape != (2, 2):
        raise DimensionError("qubit POVM elements are 2x2")
    if not is_hermitian(a, tol) or not is_psd(a, tol):
        raise DomainError("operator is not positive semidefinite")
    lam, vecs = np.linalg.eigh(0.5 * (a + dagger(a)))
    out = []
    for k in range(1, -1, -1):
        if lam[k] > tol:
            out.append(canonical_phase(np.sqrt(lam[k]) * vecs[:, k]))
    return out


def hexagon_vectors() -> dict[str, np.ndarray]:
    """The six unit polarization vectors on the hexagon vertices, in the H/V basis."""
    return {
        "A+": np.array([1.0, 0.0], dtype=complex),
        "A-": np.array([0.0, 1.0], dtype=complex),
        "B+": np.array([SQ3_2, 0.5], dtype=complex),
        "B-": np.array([0.5, -SQ3_2], dtype=complex),
        "C+": np.array([0.5, SQ3_2], dtype=complex),
        "C-": np.array([SQ3_2, -0.5], dtype=complex),
    }


def hexagon_povm(first: str, second: str) -> Povm:
    """Four-element POVM ``{E_first+-, E_second+-}`` with each element half a projector."""
    vecs = hexagon_vectors()
    labels = [f"{first}+", f"{first}-", f"{second}+", f"{second}-"]
    return Povm.from_vectors([vecs[lab] / np.sqrt(2.0) for lab in labels], labels, name=first + second)


def hexagon_povms() -> tuple[Povm, Povm, Povm]:
    """The AB, BC and CA POVMs, one per inscribed rectangle."""
    return tuple(hexagon_povm(a, b) for a, b in HEXAGON_PAIRS)


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        m = as_matrix(self.matrix, square=True)
        if m.shape != (2, 2):
            raise DimensionError("qubit density matrices are 2x2")
        if not is_hermitian(m, BUILD_TOL):
            raise DomainError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1) > BUILD_TOL:
            raise DomainError("density matrix trace differs from 1")
        if not is_psd(m, STRUCT_TOL):
            raise DomainError("density matrix is not positive semidefinite")
        object.__setattr__(self, "matrix", frozen(m))

    @classmethod
    def pure(cls, psi) -> DensityMatrix:
        psi = as_vector(psi)
        return cls(np.outer(psi, np.conj(psi)))


def outcome_probabilities(p: Povm, rho) -> np.ndarray:
    """Born-rule probabilities ``Tr(E_d rho)`` in element order."""
    if not validate(p).valid:
        raise DomainError("POVM is not valid")
    if not isinstance(rho, DensityMatrix):
        rho = DensityMatrix(rho)
    r = rho.matrix
    return np.array([np.vdot(e.vector, r @ e.vector).real for e in p.elements])


def random_rank_one_povm(n_elements: int, rng: np.random.Generator, name: str = "") -> Povm:
    """Random rank-one POVM read off the first two columns of a Haar unitary.

    Rows of an ``n x 2`` isometry give weight vectors whose outer products
    sum to the identity.
    """
    from .core import random_unitary

    if n_elements < 2:
        raise DomainError("a rank-one qubit POVM needs at least two elements")
    iso = random_unitary(n_elements, rng)[:, :2]
    return Povm.from_vectors(np.conj(iso), name=name)


def projective_hv() -> Povm:
    return Povm.from_vectors([[1, 0], [0, 1]], ["H", "V"], name="HV")


__all__ = [
    "HEXAGON_LABELS",
    "HEXAGON_PAIRS",
    "DensityMatrix",
    "Povm",
    "PovmElement",
    "ValidationReport",
    "canonical_phase",
    "hexagon_povm",
    "hexagon_povms",
    "hexagon_vectors",
    "outcome_probabilities",
    "projective_hv",
    "random_rank_one_povm",
    "rank_one_decompose",
    "validate",
]
