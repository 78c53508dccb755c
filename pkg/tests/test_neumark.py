import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from povm_optics.core import DomainError
from povm_optics.neumark import SENTINEL, column_gram_error, dilate, embed_state, restriction_check
from povm_optics.povm import Povm, hexagon_povms, hexagon_vectors, projective_hv, random_rank_one_povm


def test_projective_gives_identity_dilation():
    d = dilate(projective_hv())
    assert d.n_paths == 1
    np.testing.assert_array_equal(d.columns, np.eye(2))
    assert d.outcome_map == (0, 1)


def paper_bc_columns():
    v = hexagon_vectors()
    cols = [np.concatenate([v[lab], 1j * v[lab]]) for lab in ("B+", "B-")]
    cols += [np.concatenate([v[lab], -1j * v[lab]]) for lab in ("C+", "C-")]
    return np.column_stack(cols) / np.sqrt(2)


def test_hexagon_bc_matches_published_dilation_up_to_ancilla_unitary():
    ref = paper_bc_columns()
    np.testing.assert_allclose(ref.conj().T @ ref, np.eye(4), atol=1e-15)
    d = dilate(hexagon_povms()[1])
    assert d.n_paths == 2
    np.testing.assert_allclose(d.columns[:2], ref[:2], atol=1e-15)
    # the completion is unique up to a unitary acting on the path-2 block
    v = d.columns[2:] @ ref[2:].conj().T
    np.testing.assert_allclose(v.conj().T @ v, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(v @ ref[2:], d.columns[2:], atol=1e-12)


def test_odd_povm_gets_sentinel(rng):
    p = random_rank_one_povm(3, rng)
    d = dilate(p)
    assert d.n_paths == 2
    assert d.outcome_map == (0, 1, 2, None)
    assert d.labels[-1] == SENTINEL
    np.testing.assert_array_equal(d.column(3), [0, 0, 0, 1])
    assert column_gram_error(d) <= 1e-12
    for _ in range(100):
        psi = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        phi = embed_state(psi / np.linalg.norm(psi), 2).vector
        assert abs(np.vdot(d.column(3), phi)) ** 2 == 0.0


def test_top_block_holds_weight_vectors(rng):
    p = random_rank_one_povm(6, rng)
    d = dilate(p)
    for col, e in enumerate(d.outcome_map):
        np.testing.assert_array_equal(d.columns[:2, col], p.elements[e].vector)


def test_embed_state_examples():
    np.testing.assert_array_equal(embed_state([1, 0], 2).vector, [1, 0, 0, 0])
    a, b = 0.6, 0.8j
    np.testing.assert_array_equal(embed_state([a, b], 3).vector, [a, b, 0, 0, 0, 0])
    s = np.sqrt(3) / 2
    np.testing.assert_allclose(embed_state(hexagon_vectors()["B+"], 2).vector, [s, 0.5, 0, 0])


def test_embed_state_rejects_unnormalized():
    with pytest.raises(DomainError):
        embed_state([1, 1], 2)


def test_restriction_examples(rng):
    assert restriction_check(dilate(projective_hv()), projective_hv(), 100, 0) <= 1e-15
    bc = hexagon_povms()[1]
    assert restriction_check(dilate(bc), bc, 1000, 1) <= 1e-10
    p5 = random_rank_one_povm(5, rng)
    assert restriction_check(dilate(p5), p5, 1000, 2) <= 1e-10


def test_restriction_rejects_mismatch(rng):
    with pytest.raises(DomainError):
        restriction_check(dilate(projective_hv()), random_rank_one_povm(4, rng), 10, 0)


def test_rank_two_elements_need_decomposition():
    with pytest.raises(DomainError, match="rank_one_decompose"):
        dilate([np.eye(2) / 2, np.eye(2) / 2])


def test_invalid_povm_rejected():
    with pytest.raises(DomainError):
        dilate(Povm.from_vectors([[1, 0], [0, 0.5]]))


def test_deterministic(rng):
    p = random_rank_one_povm(7, rng)
    np.testing.assert_array_equal(dilate(p).columns, dilate(p).columns)


@settings(max_examples=60, deadline=None)
@given(m=st.integers(2, 8), seed=st.integers(0, 2**32 - 1))
def test_dilation_properties(m, seed):
    p = random_rank_one_povm(m, np.random.default_rng(seed))
    d = dilate(p)
    assert d.n_paths == (m + 1) // 2
    assert column_gram_error(d) <= 1e-12
    assert restriction_check(d, p, 200, seed) <= 1e-10
