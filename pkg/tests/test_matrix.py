import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from schattenlab.matrix import SVDConvergenceError, abs_op, as_matrix, check_exponent, \
    conjugate_exponent, matrix_from_json, matrix_to_json, psd_sqrt, schatten_norm, svd

from conftest import crandn

EXPONENTS = [1, 1.5, 2, 3, math.inf]


def eig_norm(h_eigs, p):
    s = np.sqrt(np.clip(h_eigs, 0, None))
    if math.isinf(p):
        return s.max()
    return np.sum(s ** p) ** (1 / p)


def random_unitary(rng, n):
    q, r = np.linalg.qr(crandn(rng, n, n))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def test_svd_diagonal():
    _, s, _ = svd(np.diag([3.0, 4.0]))
    np.testing.assert_allclose(s, [4, 3])


def test_svd_zero_rectangular():
    u, s, vh = svd(np.zeros((3, 2)))
    np.testing.assert_array_equal(s, [0, 0])
    assert u.shape == (3, 2) and vh.shape == (2, 2)


def test_svd_matches_eigensolver(rng):
    x = crandn(rng, 6, 4)
    _, s, _ = svd(x)
    oracle = np.sqrt(np.sort(np.linalg.eigvalsh(x.conj().T @ x))[::-1])
    np.testing.assert_allclose(s, oracle, atol=1e-8)


@pytest.mark.parametrize("shape", [(1, 1), (5, 3), (3, 5), (64, 64), (64, 17)])
def test_svd_reconstruction_contract(rng, shape):
    x = 10 * crandn(rng, *shape) / 3
    u, s, vh = svd(x)
    scale = max(1.0, np.linalg.norm(x))
    assert np.linalg.norm((u * s) @ vh - x) <= 1e-10 * scale
    k = min(shape)
    np.testing.assert_allclose(u.conj().T @ u, np.eye(k), atol=1e-12)
    np.testing.assert_allclose(vh @ vh.conj().T, np.eye(k), atol=1e-12)
    assert np.all(np.diff(s) <= 0) and np.all(s >= 0)


def test_svd_failure_reports_dimensions(monkeypatch):
    def boom(*a, **k):
        raise np.linalg.LinAlgError("SVD did not converge")

    monkeypatch.setattr(np.linalg, "svd", boom)
    with pytest.raises(SVDConvergenceError, match="3 x 2"):
        svd(np.ones((3, 2)))


def test_abs_op_examples(rng):
    np.testing.assert_allclose(abs_op(np.diag([-2.0, 5.0])), np.diag([2.0, 5.0]), atol=1e-14)
    np.testing.assert_array_equal(abs_op(np.zeros((2, 2))), np.zeros((2, 2)))
    x = crandn(rng, 4, 4)
    a = abs_op(x)
    target = x.conj().T @ x
    assert np.linalg.norm(a @ a - target) <= 1e-10 * np.linalg.norm(target)
    np.testing.assert_allclose(a, a.conj().T, atol=0)
    assert np.linalg.eigvalsh(a).min() >= -1e-12


def test_schatten_examples():
    assert schatten_norm(np.eye(2), 2) == pytest.approx(math.sqrt(2), abs=1e-12)
    assert schatten_norm(np.diag([3.0, 4.0]), 1) == pytest.approx(7)
    assert schatten_norm(np.diag([3.0, 4.0]), math.inf) == pytest.approx(4)
    assert schatten_norm(np.diag([3.0, 4.0]), "inf") == pytest.approx(4)


@pytest.mark.parametrize("p", EXPONENTS)
def test_schatten_trace_identity(rng, p):
    x = crandn(rng, 5, 5)
    oracle = eig_norm(np.linalg.eigvalsh(x.conj().T @ x), p)
    assert schatten_norm(x, p) == pytest.approx(oracle, rel=1e-9)
    oracle_row = eig_norm(np.linalg.eigvalsh(x @ x.conj().T), p)
    assert schatten_norm(x, p) == pytest.approx(oracle_row, rel=1e-9)


def test_schatten_batched(rng):
    xs = crandn(rng, 7, 3, 4)
    np.testing.assert_allclose(schatten_norm(xs, 1.5), [schatten_norm(x, 1.5) for x in xs])


def test_schatten_large_p_no_overflow():
    x = np.diag([1e200, 1e199])
    assert math.isfinite(schatten_norm(x, 50))
    assert schatten_norm(x, 50) == pytest.approx(1e200, rel=1e-12)


@pytest.mark.parametrize("bad", [0.5, -1, float("nan"), "zero"])
def test_check_exponent_rejects(bad):
    with pytest.raises(ValueError):
        check_exponent(bad)


def test_conjugate_exponent():
    assert conjugate_exponent(1) == math.inf
    assert conjugate_exponent(math.inf) == 1
    assert conjugate_exponent(1.5) == pytest.approx(3)


@pytest.mark.parametrize("bad", [np.ones(3), np.ones((0, 2)), np.array([[np.nan]])])
def test_as_matrix_rejects(bad):
    with pytest.raises(ValueError):
        as_matrix(bad)


def test_json_roundtrip(rng):
    x = crandn(rng, 2, 3)
    obj = matrix_to_json(x)
    assert obj["rows"] == 2 and len(obj["re"]) == 6
    np.testing.assert_array_equal(matrix_from_json(obj), x)
    with pytest.raises(ValueError):
        matrix_from_json({"rows": 2, "cols": 2, "re": [1, 2, 3], "im": [0, 0, 0]})


def test_psd_sqrt_rejects_indefinite():
    with pytest.raises(ValueError):
        psd_sqrt(np.diag([1.0, -1.0]))


complex_mats = st.integers(1, 6).flatmap(lambda m: st.integers(1, 6).flatmap(
    lambda n: st.tuples(
        arrays(np.float64, (m, n), elements=st.floats(-10, 10)),
        arrays(np.float64, (m, n), elements=st.floats(-10, 10)),
    ))).map(lambda t: t[0] + 1j * t[1])


@settings(max_examples=60, deadline=None)
@given(complex_mats, st.floats(-5, 5), st.sampled_from(EXPONENTS))
def test_homogeneity(x, lam, p):
    assert abs(schatten_norm(lam * x, p) - abs(lam) * schatten_norm(x, p)) <= \
        1e-10 * max(1.0, abs(lam) * np.linalg.norm(x))


@settings(max_examples=60, deadline=None)
@given(complex_mats, st.sampled_from(EXPONENTS), st.integers(0, 2 ** 32 - 1))
def test_triangle_and_monotone(x, p, seed):
    rng = np.random.default_rng(seed)
    y = crandn(rng, *x.shape)
    tol = 1e-9 * max(1.0, np.linalg.norm(x) + np.linalg.norm(y))
    assert schatten_norm(x + y, p) <= schatten_norm(x, p) + schatten_norm(y, p) + tol
    norms = [schatten_norm(x, q) for q in EXPONENTS]
    assert all(a >= b - tol for a, b in zip(norms, norms[1:]))


@settings(max_examples=40, deadline=None)
@given(complex_mats, st.sampled_from(EXPONENTS), st.integers(0, 2 ** 32 - 1))
def test_unitary_invariance(x, p, seed):
    rng = np.random.default_rng(seed)
    u = random_unitary(rng, x.shape[0])
    v = random_unitary(rng, x.shape[1])
    assert schatten_norm(u @ x @ v, p) == pytest.approx(schatten_norm(x, p),
                                                         rel=1e-9, abs=1e-9)
