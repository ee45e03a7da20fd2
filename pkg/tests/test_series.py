import itertools
import math

import numpy as np
import pytest
from scipy.stats import norm as normal

from schattenlab.matrix import schatten_norm
from schattenlab.rng import BATCH_SIZE, batches, derive_seed, draw, stream
from schattenlab.series import exact_norms, exact_rademacher_moment, kahane_ratio, \
    random_sign_matrix_norm, row_column_functional, sample_series_norm, series_moment, \
    tail_profile
from schattenlab.square import OutsideTheoremRange, hilbert_sum_norm

from conftest import crandn


def brute_moment(x, p, r):
    """Average over all 2**N sign vectors, no symmetry tricks."""
    vals = []
    for signs in itertools.product((1, -1), repeat=x.shape[0]):
        s = np.tensordot(np.array(signs, dtype=float), x, axes=1)
        vals.append(schatten_norm(s, p) ** r)
    return np.mean(vals) ** (1 / r)


# --- random streams -------------------------------------------------------

def test_stream_is_deterministic_and_keyed():
    a = stream(5, "x", 1).random(4)
    np.testing.assert_array_equal(a, stream(5, "x", 1).random(4))
    assert not np.array_equal(a, stream(5, "x", 2).random(4))
    assert not np.array_equal(a, stream(6, "x", 1).random(4))
    assert derive_seed(5, "x") == derive_seed(5, "x") != derive_seed(5, "y")


def test_batches_cover_samples():
    b = batches(2 * BATCH_SIZE + 3)
    assert [c for _, c in b] == [BATCH_SIZE, BATCH_SIZE, 3]
    assert [i for i, _ in b] == [0, 1, 2]


def test_randomizer_laws():
    g = stream(1)
    r = draw(g, "rademacher", 200000)
    assert set(np.unique(r)) == {-1.0, 1.0} and abs(r.mean()) < 0.01
    z = draw(g, "gaussian", 200000)
    assert abs(z.mean()) < 0.01 and abs(z.var() - 1) < 0.02 and np.all(np.isfinite(z))
    s = draw(g, "steinhaus", 200000)
    np.testing.assert_allclose(np.abs(s), 1.0)
    assert abs(s.mean()) < 0.01 and abs(np.mean(s ** 2)) < 0.01
    with pytest.raises(ValueError):
        draw(g, "cauchy", 3)


# --- moments ---------------------------------------------------------------

def test_single_identity_term():
    rep = sample_series_norm(np.eye(2)[None], "rademacher", 1, 2, 500, seed=3)
    assert rep.estimate == pytest.approx(2.0, abs=1e-12)
    assert rep.std_error == pytest.approx(0, abs=1e-12)


def test_scalar_pair():
    x = np.ones((2, 1, 1))
    ex = exact_rademacher_moment(x, 3, 2)
    assert ex.exact and ex.std_error == 0 and ex.samples == 4
    assert ex.estimate == pytest.approx(math.sqrt(2), abs=1e-14)
    mc = sample_series_norm(x, "rademacher", 3, 2, 20000, seed=1)
    assert abs(mc.estimate - math.sqrt(2)) <= 3 * mc.std_error


def test_matrix_units_exact():
    x = np.stack([np.array([[1.0, 0], [0, 0]]), np.array([[0, 1.0], [0, 0]])])
    assert exact_rademacher_moment(x, 2, 2).estimate == pytest.approx(math.sqrt(2), abs=1e-14)


def test_c2_orthogonality(rng):
    for n in (1, 3, 7, 12):
        x = crandn(rng, n, 3, 2)
        assert exact_rademacher_moment(x, 2, 2).estimate == pytest.approx(hilbert_sum_norm(x),
                                                                          abs=1e-10)
    x = crandn(rng, 5, 3, 3)
    for rnd in ("rademacher", "gaussian", "steinhaus"):
        rep = sample_series_norm(x, rnd, 2, 2, 20000, seed=9)
        assert abs(rep.estimate - hilbert_sum_norm(x)) <= 3 * rep.std_error


@pytest.mark.parametrize("p,r", [(1, 1), (1.5, 2), (3, 3), (math.inf, 0.5)])
def test_exact_matches_brute_force(rng, p, r):
    x = crandn(rng, 5, 2, 3)
    assert exact_rademacher_moment(x, p, r).estimate == pytest.approx(brute_moment(x, p, r),
                                                                      rel=1e-12)


def test_exact_rejects_large_n():
    with pytest.raises(ValueError):
        exact_norms(np.ones((21, 1, 1)), 2)


def test_exact_symmetries(rng):
    x = crandn(rng, 6, 2, 2)
    base = exact_rademacher_moment(x, 1, 1).estimate
    flipped = x * np.array([1, -1, 1, -1, -1, 1.0])[:, None, None]
    assert exact_rademacher_moment(flipped, 1, 1).estimate == pytest.approx(base, rel=1e-13)
    assert exact_rademacher_moment(x[::-1], 1, 1).estimate == pytest.approx(base, rel=1e-13)


def test_reproducible_and_schedule_independent(rng):
    x = crandn(rng, 4, 3, 3)
    a = sample_series_norm(x, "gaussian", 1.5, 2, 3 * BATCH_SIZE + 17, seed=42)
    b = sample_series_norm(x, "gaussian", 1.5, 2, 3 * BATCH_SIZE + 17, seed=42)
    c = sample_series_norm(x, "gaussian", 1.5, 2, 3 * BATCH_SIZE + 17, seed=42, jobs=3)
    assert a == b == c


def test_scaling(rng):
    x = crandn(rng, 4, 2, 2)
    a = sample_series_norm(x, "steinhaus", 1, 2, 5000, seed=4)
    b = sample_series_norm(-3.0 * x, "steinhaus", 1, 2, 5000, seed=4)
    assert b.estimate == pytest.approx(3.0 * a.estimate, rel=1e-12)


def test_sampling_agrees_with_enumeration(rng):
    for n in (3, 8, 12):
        x = crandn(rng, n, 2, 2)
        ex = exact_rademacher_moment(x, 1, 2)
        mc = sample_series_norm(x, "rademacher", 1, 2, 20000, seed=n)
        assert abs(mc.estimate - ex.estimate) <= 4 * mc.std_error
        assert mc.ci95_low <= mc.estimate <= mc.ci95_high


def test_series_moment_dispatch(rng):
    x = crandn(rng, 4, 2, 2)
    assert series_moment(x, "rademacher", 1, 2, 100, 0).exact
    assert not series_moment(x, "gaussian", 1, 2, 100, 0).exact
    with pytest.raises(ValueError):
        series_moment(x, "gaussian", 1, 2, 100, 0, exhaustive=True)


# --- moment equivalence and tails -----------------------------------------

def test_kahane_single_term():
    rep = kahane_ratio(np.eye(2)[None], "rademacher", 1, 1, 4, 2000, seed=1)
    assert rep.estimate == pytest.approx(1.0, abs=1e-12)


def test_kahane_scalar_khintchine():
    n = 16
    rep = kahane_ratio(np.ones((n, 1, 1)), "rademacher", 2, 2, 4, 0, 0, exhaustive=True)
    # E(sum eps)^4 = 3N^2 - 2N, E(sum eps)^2 = N
    assert rep.estimate == pytest.approx((3 * n * n - 2 * n) ** 0.25 / math.sqrt(n), rel=1e-12)
    assert rep.estimate <= 3 ** 0.25 + 3 * rep.std_error


def test_kahane_random_matrix(rng):
    x = crandn(rng, 6, 4, 4)
    for rnd in ("rademacher", "gaussian", "steinhaus"):
        rep = kahane_ratio(x, rnd, 1, 2, 4, 20000, seed=2)
        assert 1.0 <= rep.estimate <= 2.0
        assert rep.std_error > 0


def test_kahane_rejects_order():
    with pytest.raises(ValueError):
        kahane_ratio(np.ones((2, 1, 1)), "rademacher", 2, 4, 2, 10, 0)


def test_tail_deterministic_step(rng):
    x = crandn(rng, 1, 2, 2)
    v = schatten_norm(x[0], 1)
    prof = tail_profile(x, "rademacher", 1, 1000, 0, [v / 2, v * (1 - 1e-9), v * 1.5])
    assert [pt.survival for pt in prof.points] == [1.0, 1.0, 0.0]
    assert not prof.points[-1].reliable


def test_tail_gaussian_matches_normal():
    n = 16
    x = np.ones((n, 1, 1)) / math.sqrt(n)
    prof = tail_profile(x, "gaussian", 2, 40000, 5, [0.5, 1.0, 1.5, 2.0, 2.5])
    for pt in prof.points:
        if pt.t in (1.0, 2.0):
            assert abs(pt.survival - 2 * normal.sf(pt.t)) <= 3 * pt.std_error
    assert prof.delta_hat > 0


def test_tail_grid_validation():
    with pytest.raises(ValueError):
        tail_profile(np.ones((2, 1, 1)), "gaussian", 1, 10, 0, [2.0, 1.0])


# --- random sign matrices ---------------------------------------------------

def test_sign_matrix_examples(rng):
    ones = np.ones((2, 2))
    rep = random_sign_matrix_norm(ones, 2, 500, seed=1)
    assert rep.estimate == pytest.approx(2.0, abs=1e-12)
    assert row_column_functional(ones, 2) == pytest.approx(2.0)
    for q in (2, 3, 4):
        rep = random_sign_matrix_norm(np.eye(2), q, 500, seed=1)
        assert rep.estimate == pytest.approx(2 ** (1 / q), abs=1e-12)
        assert row_column_functional(np.eye(2), q) == pytest.approx(2 ** (1 / q))
    a = crandn(rng, 8, 8)
    ratio = random_sign_matrix_norm(a, 4, 5000, seed=2).estimate / row_column_functional(a, 4)
    assert 0.3 <= ratio <= 3


def test_sign_matrix_small_q_warns():
    with pytest.warns(OutsideTheoremRange):
        random_sign_matrix_norm(np.eye(2), 1, 10, 0)
