import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from povm_optics.compiler import compile_povm, verify_circuit
from povm_optics.core import DomainError, StructureError, random_unitary
from povm_optics.neumark import SENTINEL, dilate
from povm_optics.optics import (
    BS,
    HWP,
    Component,
    Detector,
    OpticalCircuit,
    beam_splitter,
    circuit_unitary,
    component_unitary,
    detector_probabilities,
    hexagon_circuit,
    hwp,
    lower_factorization,
    mz_stages,
    phase_shifter,
    polarization_stages,
    prune_circuit,
    qwp,
    solve_qhq,
)
from povm_optics.povm import hexagon_povms, hexagon_vectors, outcome_probabilities, projective_hv, random_rank_one_povm
from povm_optics.synthesis import basis_mapping_unitary, eliminate

S3 = np.sqrt(3) / 2
U_B = np.array([[S3, 0.5], [0.5, -S3]])
U_C = np.array([[0.5, S3], [S3, -0.5]])


def stage_unitary(stages, n_paths):
    dets = [Detector(k, port, f"{k}{port}") for k in range(1, n_paths + 1) for port in "HV"]
    return circuit_unitary(OpticalCircuit(n_paths, tuple(stages), tuple(dets)))


def equal_up_to_phase(a, b, tol):
    k = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    phase = a[k] / b[k]
    return abs(abs(phase) - 1) < tol and np.max(np.abs(a - phase * b)) < tol


def test_hwp_examples():
    np.testing.assert_allclose(component_unitary(hwp(15, 1)), U_B, atol=1e-15)
    np.testing.assert_allclose(component_unitary(hwp(45, 1)), [[0, 1], [1, 0]], atol=1e-15)
    np.testing.assert_allclose(component_unitary(hwp(30, 1)), U_C, atol=1e-15)


def test_hwp_maps_hexagon_states_to_h_and_v():
    v = hexagon_vectors()
    for theta, plus, minus in ((15, "B+", "B-"), (30, "C+", "C-")):
        m = component_unitary(hwp(theta, 1))
        np.testing.assert_allclose(m @ v[plus], [1, 0], atol=1e-15)
        np.testing.assert_allclose(m @ v[minus], [0, 1], atol=1e-15)


def test_qwp_convention():
    np.testing.assert_allclose(component_unitary(qwp(0, 1)), np.diag([1, 1j]), atol=1e-15)
    q45 = component_unitary(qwp(45, 1))
    np.testing.assert_allclose(q45 @ q45, component_unitary(hwp(45, 1)), atol=1e-15)


def test_beam_splitter_path_map():
    m = component_unitary(beam_splitter(1, 2))
    h = np.array([1, 0])
    plus = np.kron(np.array([1, 1j]) / np.sqrt(2), h)
    minus = np.kron(np.array([1, -1j]) / np.sqrt(2), h)
    np.testing.assert_allclose(m @ plus, np.kron([1, 0], h), atol=1e-15)
    np.testing.assert_allclose(m @ minus, np.kron([0, 1], h), atol=1e-15)


@pytest.mark.parametrize("theta", np.linspace(0, 179.5, 40))
def test_wave_plates_unitary_and_hwp_involution(theta):
    h = component_unitary(hwp(theta, 1))
    q = component_unitary(qwp(theta, 1))
    for m in (h, q):
        assert np.max(np.abs(m.conj().T @ m - np.eye(2))) <= 1e-14
    assert np.max(np.abs(h @ h - np.eye(2))) <= 1e-14


@pytest.mark.parametrize("phi", np.linspace(0, 6.28, 25))
def test_phase_shifter_unitary(phi):
    m = component_unitary(phase_shifter(phi, 1))
    assert np.max(np.abs(m.conj().T @ m - np.eye(2))) <= 1e-14


def test_component_normalization_and_validation():
    assert hwp(195, 1).theta_deg == pytest.approx(15)
    assert 0 <= phase_shifter(-1.0, 1).phi_rad < 2 * np.pi
    with pytest.raises(StructureError):
        Component("Mirror", path=1)
    with pytest.raises(StructureError):
        Component(BS, paths=(1, 1))


def test_empty_circuit_is_identity():
    np.testing.assert_array_equal(stage_unitary([], 2), np.eye(4))


def test_fig2b_routes_superposition_to_h():
    c = hexagon_circuit("BC")
    v = hexagon_vectors()
    state = np.kron(np.array([1, 1j]) / np.sqrt(2), v["B+"])
    np.testing.assert_allclose(circuit_unitary(c) @ state, [1, 0, 0, 0], atol=1e-15)
    state = np.kron(np.array([1, -1j]) / np.sqrt(2), v["C-"])
    np.testing.assert_allclose(circuit_unitary(c) @ state, [0, 0, 0, 1], atol=1e-15)


def test_fig2b_quarter_per_detector_on_mixed_input():
    for which in ("AB", "BC", "CA"):
        c = hexagon_circuit(which)
        np.testing.assert_allclose(detector_probabilities(c, np.eye(2) / 2), 0.25, atol=1e-15)


def test_hexagon_circuit_layouts():
    bc = hexagon_circuit("BC")
    assert [s.to_dict() for s in bc.stages] == [
        {"kind": BS, "paths": [1, 2]},
        {"kind": HWP, "theta_deg": 15.0, "path": 1},
        {"kind": HWP, "theta_deg": 30.0, "path": 2},
    ]
    ab = hexagon_circuit("AB")
    assert [(s.kind, s.theta_deg, s.path) for s in ab.stages[1:]] == [(HWP, 15.0, 1)]
    assert [d.label for d in ab.detectors if d.path == 2] == ["A+", "A-"]
    ca = hexagon_circuit("CA")
    assert [(s.kind, s.theta_deg, s.path) for s in ca.stages[1:]] == [(HWP, 30.0, 2)]
    assert [d.label for d in ca.detectors if d.path == 1] == ["A+", "A-"]


def test_hexagon_circuits_realize_their_povms():
    for p in hexagon_povms():
        assert verify_circuit(hexagon_circuit(p.name), p, 300) <= 1e-14


def test_lower_identity_dilation():
    d = dilate(projective_hv())
    c = lower_factorization(eliminate(basis_mapping_unitary(d)), d)
    assert c.stages == ()
    assert [(x.path, x.port, x.label) for x in c.detectors] == [(1, "H", "H"), (1, "V", "V")]


def test_compiled_bc_matches_fig2b():
    c = compile_povm(hexagon_povms()[1]).circuit
    assert [s.kind for s in c.stages] == [BS, HWP, HWP]
    assert c.stages[1].path == 1 and c.stages[1].theta_deg == pytest.approx(15, abs=1e-9)
    assert c.stages[2].path == 2 and c.stages[2].theta_deg == pytest.approx(30, abs=1e-9)
    assert len(c.detectors) == 4
    assert [d.label for d in c.detectors] == ["B+", "B-", "C+", "C-"]


def test_compiled_random_four_outcome_statistics(rng):
    p = random_rank_one_povm(4, rng)
    c = compile_povm(p).circuit
    for _ in range(50):
        psi = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        psi /= np.linalg.norm(psi)
        rho = np.outer(psi, psi.conj())
        np.testing.assert_allclose(detector_probabilities(c, rho), outcome_probabilities(p, rho), atol=1e-8)


def test_unpruned_lowering_matches_basis_mapping_up_to_phase(rng):
    d = dilate(random_rank_one_povm(6, rng))
    u = basis_mapping_unitary(d)
    c = lower_factorization(eliminate(u), d)
    got = circuit_unitary(c)
    for row in range(d.dim):
        assert equal_up_to_phase(got[row], u[row], 1e-8)


def test_lowering_rejects_mismatched_factorization(rng):
    d = dilate(random_rank_one_povm(4, rng))
    with pytest.raises(DomainError):
        lower_factorization(eliminate(random_unitary(4, rng)), d)


def test_odd_povm_circuit_has_sentinel_detector(rng):
    c = compile_povm(random_rank_one_povm(5, rng)).circuit
    sentinels = [d for d in c.detectors if d.is_sentinel]
    assert len(sentinels) == 1 and (sentinels[0].path, sentinels[0].port) == (3, "V")
    probs = detector_probabilities(c, np.eye(2) / 2)
    assert probs[c.labels.index(SENTINEL)] <= 1e-20


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_polarization_stages_reproduce_unitary(seed):
    v = random_unitary(2, np.random.default_rng(seed))
    stages = polarization_stages(v, 1)
    assert np.max(np.abs(stage_unitary(stages, 1) - v)) <= 1e-10


def test_polarization_stage_shortcuts():
    assert polarization_stages(np.eye(2), 1) == []
    assert [s.kind for s in polarization_stages(1j * np.eye(2), 1)] == ["PhaseShifter"]
    assert [s.kind for s in polarization_stages(1j * U_B, 1)] == [HWP, "PhaseShifter"]
    (flipped,) = polarization_stages(-U_B, 1)
    assert flipped.theta_deg == pytest.approx(105)


def test_qhq_solver_residual(rng):
    for _ in range(20):
        v = random_unitary(2, rng)
        a, b, c, phi = solve_qhq(v)
        m = np.exp(1j * phi) * component_unitary(qwp(a, 1)) @ component_unitary(hwp(b, 1)) @ component_unitary(qwp(c, 1))
        assert np.max(np.abs(m - v)) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_generic_mz_block_lowering(seed):
    m = random_unitary(4, np.random.default_rng(seed))
    stages = mz_stages(m, 1, 2)
    assert sum(s.kind == BS for s in stages) == 2
    assert np.max(np.abs(stage_unitary(stages, 2) - m)) <= 1e-9


def test_mz_lowering_on_nonadjacent_paths(rng):
    m = random_unitary(4, rng)
    full = stage_unitary(mz_stages(m, 1, 3), 3)
    idx = [0, 1, 4, 5]
    np.testing.assert_allclose(full[np.ix_(idx, idx)], m, atol=1e-9)
    np.testing.assert_allclose(full[2:4, 2:4], np.eye(2), atol=1e-12)


def test_prune_circuit_keeps_statistics(rng):
    p = random_rank_one_povm(8, rng)
    r = compile_povm(p)
    full = lower_factorization(r.factorization, r.dilation)
    pruned = prune_circuit(full)
    assert len(pruned.stages) < len(full.stages)
    for _ in range(20):
        psi = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        psi /= np.linalg.norm(psi)
        np.testing.assert_allclose(detector_probabilities(pruned, psi), detector_probabilities(full, psi), atol=1e-10)


def test_circuit_json_round_trip(rng):
    c = compile_povm(random_rank_one_povm(5, rng), ).circuit
    doc = json.loads(c.to_json())
    assert set(doc) >= {"n_paths", "stages", "detectors"}
    assert OpticalCircuit.from_json(c.to_json()) == c


def test_circuit_structure_checks():
    dets = (Detector(1, "H", "a"), Detector(1, "V", "b"))
    with pytest.raises(StructureError):
        OpticalCircuit(1, (beam_splitter(1, 2),), dets)
    with pytest.raises(StructureError):
        OpticalCircuit(1, (), dets[:1])
    with pytest.raises(StructureError):
        OpticalCircuit.from_dict({"n_paths": 1, "stages": [{"kind": "HWP", "path": 1}], "detectors": []})
