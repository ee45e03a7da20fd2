"""Proximal maps of Schatten norms.

``prox_{t||.||_p}(A) = U diag(prox_{t||.||_{l_p}}(s)) V^*`` so everything
reduces to the proximal map of an l_p norm on the nonnegative vector of
singular values.
"""

import math

import numpy as np
from .matrix import check_exponent, conjugate_exponent, svd

__all__ = ["prox_lp_norm", "prox_schatten", "project_l1_ball"]


def project_l1_ball(v, radius):
    """Euclidean projection of a nonnegative vector onto ``{||x||_1 <= radius}``."""
    v = np.asarray(v, dtype=float)
    if v.sum() <= radius:
        return v.copy()
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, u.size + 1)
    rho = np.nonzero(u * k > css - radius)[0][-1]
    theta = (css[rho] - radius) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _solve_power_shrink(v, lam, p, x0=None, tol=1e-13, maxiter=100):
    """Componentwise root of ``x + lam * x**(p-1) = v`` on ``[0, v]``.

    Safeguarded Newton: iterates that leave the bracket fall back to
    bisection.
    """
    lo = np.zeros_like(v)
    hi = v.copy()
    x = v / (1.0 + lam) if x0 is None else np.clip(x0, 0.0, v)
    for _ in range(maxiter):
        xp = np.power(x, p - 1.0)
        h = x + lam * xp - v
        lo = np.where(h < 0, x, lo)
        hi = np.where(h > 0, x, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            dh = 1.0 + lam * (p - 1.0) * np.where(x > 0, xp / x, np.inf)
            step = x - h / dh
        bad = ~np.isfinite(step) | (step <= lo) | (step >= hi)
        new = np.where(bad, 0.5 * (lo + hi), step)
        done = np.all(np.abs(new - x) <= tol * np.maximum(v, 1e-300))
        x = new
        if done:
            break
    return x


def prox_lp_norm(v, t, p):
    """Proximal map of ``t * ||.||_p`` at a nonnegative vector `v`.

    Closed forms for p in {1, 2, inf}; otherwise the optimality condition
    ``x_i + lam * x_i**(p-1) = v_i`` with ``lam = t / ||x||_p**(p-1)`` is
    solved by a safeguarded Newton iteration in ``log lam`` wrapped around
    per-entry Newton solves.
    """
    v = np.asarray(v, dtype=float)
    p = check_exponent(p)
    if t <= 0:
        return v.copy()
    if p == 1:
        return np.maximum(v - t, 0.0)
    if p == 2:
        nv = math.sqrt(float(v @ v))
        if nv <= t:
            return np.zeros_like(v)
        return v * (1.0 - t / nv)
    if math.isinf(p):
        return v - project_l1_ball(v, t)
    q = conjugate_exponent(p)
    top = float(v.max(initial=0.0))
    if top == 0.0 or top * np.sum((v / top) ** q) ** (1.0 / q) <= t:
        return np.zeros_like(v)
    return _power_shrink_root(v, t, p)


def _power_shrink_root(v, t, p, tol=1e-13, maxiter=200):
    # phi(s) = s + (p-1) log ||x(e^s)||_p - log t increases in s = log lam;
    # safeguarded Newton in s with the analytic derivative, inner solves
    # warm-started from the previous iterate
    def phi_and_slope(s, x0):
        lam = math.exp(s)
        x = _solve_power_shrink(v, lam, p, x0=x0)
        xp1 = np.power(x, p - 1.0)
        sp = float(np.sum(xp1 * x))
        with np.errstate(divide="ignore", invalid="ignore"):
            dx = -xp1 / (1.0 + lam * (p - 1.0) * np.where(x > 0, xp1 / x, np.inf))
        dlog = float(np.sum(xp1 * dx)) / sp if sp > 0 else 0.0
        phi = s + (p - 1.0) / p * math.log(max(sp, 1e-300)) - math.log(t)
        return phi, 1.0 + (p - 1.0) * lam * dlog, x

    lo, hi = -math.inf, math.inf
    s = math.log(t) - (p - 1.0) * math.log(float(np.linalg.norm(v, p)))
    x = None
    for _ in range(maxiter):
        phi, slope, x = phi_and_slope(s, x)
        if abs(phi) <= tol:
            break
        if phi > 0:
            hi = s
        else:
            lo = s
        step = s - phi / slope if slope > 0 else math.nan
        if not (lo < step < hi) or not math.isfinite(step):
            if math.isinf(lo):
                step = hi - 2.0
            elif math.isinf(hi):
                step = lo + 2.0
            else:
                step = 0.5 * (lo + hi)
        if hi - lo <= 1e-15:
            break
        s = step
    return x


def prox_schatten(a, t, p):
    """Proximal map of ``t * ||.||_{C_p}`` at the matrix `a`."""
    u, s, vh = svd(a)
    s_new = prox_lp_norm(s, t, p)
    return (u * s_new) @ vh
