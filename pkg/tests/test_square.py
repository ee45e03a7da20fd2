import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from schattenlab.matrix import schatten_norm
from schattenlab.square import OutsideTheoremRange, as_sequence, chi_norm, column_gram, \
    gram_root_norm, hilbert_sum_norm, hstack, lattice_square_norm, row_gram, \
    sequence_from_json, sequence_to_json, unhstack, unvstack, vstack

from conftest import crandn

E11 = np.array([[1.0, 0], [0, 0]])
E12 = np.array([[0, 1.0], [0, 0]])


def test_grams_single_identity():
    np.testing.assert_array_equal(column_gram([np.eye(2)]), np.eye(2))
    np.testing.assert_array_equal(row_gram([np.eye(2)]), np.eye(2))


def test_grams_matrix_units():
    # E11*E11 + E12*E12 = E11 + E22 ; E11 E11* + E12 E12* = 2 E11
    np.testing.assert_array_equal(column_gram([E11, E12]), np.eye(2))
    np.testing.assert_array_equal(row_gram([E11, E12]), 2 * E11)


def test_grams_hermitian_psd(rng):
    x = crandn(rng, 5, 3, 4)
    for g in (column_gram(x), row_gram(x)):
        assert np.max(np.abs(g - g.conj().T)) <= 1e-12
        assert np.linalg.eigvalsh(g).min() >= -1e-10


def test_row_gram_is_column_gram_of_adjoints(rng):
    x = crandn(rng, 4, 3, 5)
    adj = np.conj(np.transpose(x, (0, 2, 1)))
    np.testing.assert_allclose(row_gram(x), column_gram(adj), atol=1e-12)


def test_chi_single_term(rng):
    x = crandn(rng, 3, 3)
    for q in (2, 3, 4, math.inf):
        assert chi_norm([x], q) == pytest.approx(schatten_norm(x, q), rel=1e-10)


def test_chi_matrix_units_q4():
    assert chi_norm([E11, E12], 4) == pytest.approx(math.sqrt(2), rel=1e-12)


def test_chi_q2_frobenius_additivity(rng):
    x = crandn(rng, 6, 3, 2)
    oracle = math.sqrt(sum(np.linalg.norm(t) ** 2 for t in x))
    assert chi_norm(x, 2) == pytest.approx(oracle, abs=1e-10)
    assert hilbert_sum_norm(x) == pytest.approx(oracle, abs=1e-12)


def test_chi_small_q_warns(rng):
    x = crandn(rng, 2, 2, 2)
    with pytest.warns(OutsideTheoremRange):
        chi_norm(x, 1.5)


def test_stacks_small():
    a, b = np.array([[2.0]]), np.array([[3.0]])
    np.testing.assert_array_equal(vstack([a, b]), [[2], [3]])
    np.testing.assert_array_equal(hstack([a, b]), [[2, 3]])
    np.testing.assert_array_equal(vstack([E12]), E12)
    np.testing.assert_array_equal(hstack([E12]), E12)


def test_stacks_roundtrip_and_gram(rng):
    x = crandn(rng, 3, 2, 4)
    np.testing.assert_array_equal(unvstack(vstack(x), 3), x)
    np.testing.assert_array_equal(unhstack(hstack(x), 3), x)
    v, h = vstack(x), hstack(x)
    np.testing.assert_allclose(v.conj().T @ v, column_gram(x), atol=1e-12)
    np.testing.assert_allclose(h @ h.conj().T, row_gram(x), atol=1e-12)


@pytest.mark.parametrize("q", [1, 2, 3, math.inf])
def test_stacking_identities(rng, q):
    for _ in range(10):
        n, d1, d2 = rng.integers(1, 6, size=3)
        x = crandn(rng, n, d1, d2)
        assert gram_root_norm(column_gram(x), q) == pytest.approx(schatten_norm(vstack(x), q),
                                                                  rel=1e-9)
        assert gram_root_norm(row_gram(x), q) == pytest.approx(schatten_norm(hstack(x), q),
                                                               rel=1e-9)


def test_hilbert_sum_examples(rng):
    t = np.array([[0.6, 0], [0, 0.8j]])
    assert hilbert_sum_norm([t]) == pytest.approx(1)
    assert hilbert_sum_norm([t] * 7) == pytest.approx(math.sqrt(7))
    x = crandn(rng, 5, 2, 3)
    assert hilbert_sum_norm(x) == pytest.approx(schatten_norm(vstack(x), 2), abs=1e-12)


def test_lattice_examples(rng):
    for p in (1, 2, 3.5):
        assert lattice_square_norm([[-1.7]], [1.0], p) == pytest.approx(1.7)
    assert lattice_square_norm([[1, 0], [0, 1]], [1, 1], 2) == pytest.approx(math.sqrt(2))
    vals = rng.standard_normal((4, 9))
    w = rng.uniform(0.1, 2, size=9)
    fubini = math.sqrt(np.sum(w * vals ** 2))
    assert lattice_square_norm(vals, w, 2) == pytest.approx(fubini, abs=1e-12)


def test_lattice_rejects():
    with pytest.raises(ValueError):
        lattice_square_norm([[1.0]], [1.0], math.inf)
    with pytest.raises(ValueError):
        lattice_square_norm([[1.0]], [0.0], 2)
    with pytest.raises(ValueError):
        lattice_square_norm([[1.0, 2.0]], [1.0], 2)


def test_as_sequence_validation():
    with pytest.raises(ValueError):
        as_sequence([])
    with pytest.raises(ValueError):
        as_sequence([np.eye(2), np.eye(3)])


def test_sequence_json_roundtrip(rng):
    x = crandn(rng, 3, 2, 2)
    obj = sequence_to_json(x)
    assert obj["shape"] == [2, 2]
    np.testing.assert_array_equal(sequence_from_json(obj), x)
    obj["shape"] = [3, 3]
    with pytest.raises(ValueError):
        sequence_from_json(obj)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([2, 3, 4, math.inf]))
def test_chi_invariances(seed, q):
    rng = np.random.default_rng(seed)
    n, d1, d2 = rng.integers(1, 5, size=3)
    x = crandn(rng, n, d1, d2)
    base = chi_norm(x, q)
    perm = x[rng.permutation(n)]
    flips = x * rng.choice([-1.0, 1.0], size=(n, 1, 1))
    padded = np.concatenate([x, np.zeros((2, d1, d2))])
    assert chi_norm(perm, q) == pytest.approx(base, rel=1e-12)
    assert chi_norm(flips, q) == base
    assert chi_norm(padded, q) == pytest.approx(base, rel=1e-12)
    assert hilbert_sum_norm(padded) == pytest.approx(hilbert_sum_norm(x), rel=1e-14)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert chi_norm(x, 2) == pytest.approx(hilbert_sum_norm(x), abs=1e-10)
