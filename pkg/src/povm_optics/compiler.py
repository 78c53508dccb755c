"""POVM -> dilation -> block factorization -> optical circuit."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .core import DomainError, random_state
from .neumark import DilationResult, dilate
from .optics import OpticalCircuit, circuit_unitary, detector_probabilities, lower_factorization, prune_circuit
from .povm import Povm, ValidationReport, validate
from .synthesis import (
    MzFactorization,
    basis_mapping_unitary,
    eliminate,
    input_columns,
    prune_identity_blocks,
    reconstruction_residual,
)


@dataclass(frozen=True)
class CompileResult:
    povm: Povm
    report: ValidationReport
    dilation: DilationResult
    unitary: np.ndarray
    factorization: MzFactorization
    pruned: MzFactorization
    circuit: OpticalCircuit
    reconstruction_residual: float

    @property
    def factor_count(self) -> int:
        return len(self.factorization.factors)

    @property
    def pruned_count(self) -> int:
        return len(self.factorization.factors) - len(self.pruned.factors)

    def summary(self) -> str:
        return (
            f"{self.report.summary()}\n"
            f"paths: {self.dilation.n_paths}, factors: {self.factor_count}, "
            f"pruned: {self.pruned_count}, reconstruction residual: {self.reconstruction_residual:.3e}\n"
            f"stages: {len(self.circuit.stages)}, detectors: {len(self.circuit.detectors)}"
        )


def compile_povm(p: Povm, input_paths: Iterable[int] = (1,)) -> CompileResult:
    """Compile a valid rank-one POVM into a pruned optical circuit fed on path 1."""
    report = validate(p)
    if not report.valid:
        raise DomainError(f"cannot compile an invalid POVM ({report.summary()})")
    input_paths = tuple(input_paths)
    d = dilate(p)
    u = basis_mapping_unitary(d)
    f = eliminate(u)
    pruned = prune_identity_blocks(f, input_paths)
    circuit = lower_factorization(pruned, d, input_paths, name=p.name)
    circuit = prune_circuit(circuit, input_paths)
    return CompileResult(p, report, d, u, f, pruned, circuit, reconstruction_residual(f, u))


def verify_circuit(circuit: OpticalCircuit, p: Povm, trials: int = 1000, seed: int = 0) -> float:
    """Max |circuit click probability - Born probability| over random pure inputs.

    Detectors are matched to POVM elements by label; sentinel and unmatched
    detectors must never click.
    """
    labels = p.labels
    index = {lab: i for i, lab in enumerate(labels)}
    det_labels = circuit.labels
    if not set(labels) <= set(det_labels):
        raise DomainError("circuit detectors do not cover the POVM labels")
    u = circuit_unitary(circuit)[:, input_columns((1,))]
    rng = np.random.default_rng(seed)
    vecs = np.column_stack([e.vector for e in p.elements])
    worst = 0.0
    for _ in range(trials):
        psi = random_state(rng)
        out = np.abs(u @ psi) ** 2
        born = np.abs(vecs.conj().T @ psi) ** 2
        for det in circuit.detectors:
            expected = born[index[det.label]] if det.label in index else 0.0
            worst = max(worst, abs(out[det.index] - expected))
    return float(worst)


__all__ = ["CompileResult", "compile_povm", "detector_probabilities", "verify_circuit"]
