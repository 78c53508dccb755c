"""Compile qubit POVMs into linear-optical circuits and simulate photon counting."""

from .compiler import CompileResult, compile_povm, verify_circuit
from .kstest import check_assignment, enumerate_contradiction, score_counts
from .neumark import dilate, embed_state, restriction_check
from .optics import OpticalCircuit, circuit_unitary, component_unitary, hexagon_circuit
from .povm import DensityMatrix, Povm, hexagon_povms, hexagon_vectors, outcome_probabilities, validate
from .simulator import CountTable, SourceModel, analyze, scale_two_fold, simulate_counts, traced_state
from .synthesis import basis_mapping_unitary, eliminate, prune_identity_blocks, reconstruct

__version__ = "0.1.0"
