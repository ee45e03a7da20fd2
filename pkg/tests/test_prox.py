import math

import numpy as np
import pytest
from scipy.optimize import minimize

from schattenlab.matrix import schatten_norm
from schattenlab.prox import project_l1_ball, prox_lp_norm, prox_schatten

from conftest import crandn


def brute_prox(v, t, p):
    obj = lambda z: t * np.linalg.norm(z, p) + 0.5 * np.sum((z - v) ** 2)
    best = None
    for start in (v, v / 2, np.zeros_like(v) + 1e-3):
        r = minimize(obj, start, method="Powell", options={"xtol": 1e-12, "ftol": 1e-15,
                                                           "maxiter": 50000})
        if best is None or r.fun < best.fun:
            best = r
    return best.fun


@pytest.mark.parametrize("p", [1, 1.2, 1.5, 1.9, 2, 3, 6, math.inf])
def test_prox_optimal_value(rng, p):
    for _ in range(4):
        v = np.abs(rng.standard_normal(5))
        t = rng.uniform(0.05, 1.5)
        x = prox_lp_norm(v, t, p)
        val = t * np.linalg.norm(x, p) + 0.5 * np.sum((x - v) ** 2)
        assert val <= brute_prox(v, t, p) + 1e-9


@pytest.mark.parametrize("p", [1.5, 3, math.inf])
def test_prox_zero_inside_dual_ball(p):
    v = np.array([0.1, 0.05, 0.0])
    np.testing.assert_array_equal(prox_lp_norm(v, 10.0, p), np.zeros(3))


def test_prox_handles_zero_entries():
    x = prox_lp_norm(np.array([2.0, 0.0, 1.0]), 0.5, 1.5)
    assert x[1] == 0 and np.all(np.isfinite(x))


def test_project_l1_ball():
    np.testing.assert_allclose(project_l1_ball(np.array([3.0, 1.0]), 2.0), [2.0, 0.0])
    np.testing.assert_array_equal(project_l1_ball(np.array([0.5, 0.5]), 2.0), [0.5, 0.5])


def test_prox_schatten_nuclear_soft_threshold(rng):
    a = crandn(rng, 4, 3)
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    expected = (u * np.maximum(s - 0.4, 0)) @ vh
    np.testing.assert_allclose(prox_schatten(a, 0.4, 1), expected, atol=1e-12)


def test_prox_schatten_moreau(rng):
    # prox of the norm plus the prox of its conjugate recovers the point
    a = crandn(rng, 3, 5)
    for p, q in ((1.5, 3.0), (1, math.inf), (2, 2)):
        x = prox_schatten(a, 0.7, p)
        dual = a - x
        assert schatten_norm(dual, q) <= 0.7 * (1 + 1e-8)
        assert np.real(np.vdot(dual, x)) == pytest.approx(0.7 * schatten_norm(x, p), abs=1e-8)
