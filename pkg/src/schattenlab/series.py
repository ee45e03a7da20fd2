"""Randomized series ``sum_n xi_n x_n`` with Rademacher, Gaussian or
Steinhaus coefficients: Monte-Carlo and exhaustive moments of their
Schatten norms, moment-equivalence ratios, tails, and random sign matrices.
"""

import itertools
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .matrix import as_matrix, check_exponent, schatten_norm_from_spectrum, \
    singular_values
from .rng import BATCH_SIZE, batches, check_randomizer, draw, stream
from .square import OutsideTheoremRange, as_sequence

__all__ = [
    "EstimateReport",
    "TailPoint",
    "TailProfile",
    "MAX_EXHAUSTIVE_TERMS",
    "series_norms",
    "sample_norms",
    "sign_patterns",
    "exact_norms",
    "report_from_norms",
    "sample_series_norm",
    "exact_rademacher_moment",
    "series_moment",
    "kahane_ratio",
    "tail_profile",
    "random_sign_matrix_norm",
    "row_column_functional",
]

MAX_EXHAUSTIVE_TERMS = 20
Z95 = 1.96


@dataclass(frozen=True)
class EstimateReport:
    estimate: float
    std_error: float
    ci95_low: float
    ci95_high: float
    samples: int
    seed: int
    exact: bool

    def to_json(self):
        return asdict(self)


def _run(fn, items, jobs):
    if jobs and jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(it) for it in items]


def series_norms(x, coeffs, p):
    """Schatten-p norms of ``sum_n coeffs[b, n] x_n`` for each row b."""
    s = np.einsum("bn,nij->bij", coeffs, x)
    return schatten_norm_from_spectrum(singular_values(s), p)


def sample_norms(seq, rnd, p, samples, seed, jobs=1):
    """Norms of `samples` independent draws of the randomized series."""
    x = as_sequence(seq)
    p = check_exponent(p)
    rnd = check_randomizer(rnd)
    if samples < 1:
        raise ValueError("samples must be >= 1")

    def one(item):
        b, count = item
        g = stream(seed, b)
        return series_norms(x, draw(g, rnd, (count, x.shape[0])), p)

    return np.concatenate(_run(one, batches(samples), jobs))


def sign_patterns(n, chunk=BATCH_SIZE):
    """Yield blocks of sign vectors with first sign +1 (2**(n-1) in total)."""
    if n == 1:
        yield np.ones((1, 1))
        return
    rest = itertools.product((1.0, -1.0), repeat=n - 1)
    while True:
        block = list(itertools.islice(rest, chunk))
        if not block:
            return
        b = np.asarray(block)
        yield np.hstack([np.ones((b.shape[0], 1)), b])


def exact_norms(seq, p):
    """Norms of ``sum eps_n x_n`` over all sign vectors with ``eps_1 = +1``.

    Flipping every sign leaves the norm unchanged, so these represent all
    ``2**N`` patterns with equal weight.
    """
    x = as_sequence(seq)
    p = check_exponent(p)
    n = x.shape[0]
    if n > MAX_EXHAUSTIVE_TERMS:
        raise ValueError("exhaustive enumeration limited to N <= %d, got N = %d"
                         % (MAX_EXHAUSTIVE_TERMS, n))
    return np.concatenate([series_norms(x, block, p) for block in sign_patterns(n)])


def report_from_norms(norms, r, seed, exact=False, samples=None):
    """``(E ||S||^r)^{1/r}`` with a delta-method standard error."""
    if not r > 0:
        raise ValueError("moment order r must be positive")
    norms = np.asarray(norms, dtype=float)
    n = norms.size
    vals = norms ** r
    m = float(np.mean(vals))
    est = m ** (1.0 / r) if m > 0 else 0.0
    if exact or n < 2 or m == 0:
        se = 0.0
    else:
        sd = float(np.std(vals, ddof=1))
        se = (1.0 / r) * m ** (1.0 / r - 1.0) * sd / math.sqrt(n)
    return EstimateReport(est, se, est - Z95 * se, est + Z95 * se,
                          int(samples if samples is not None else n), int(seed), bool(exact))


def sample_series_norm(seq, rnd, p, r, samples, seed, jobs=1):
    """Monte-Carlo estimate of ``(E ||sum xi_n x_n||_{C_p}^r)^{1/r}``."""
    norms = sample_norms(seq, rnd, p, samples, seed, jobs=jobs)
    return report_from_norms(norms, r, seed)


def exact_rademacher_moment(seq, p, r):
    """Exact Rademacher moment ``(2^-N sum_eps ||sum eps_n x_n||^r)^{1/r}``."""
    x = as_sequence(seq)
    norms = exact_norms(x, p)
    return report_from_norms(norms, r, seed=0, exact=True, samples=2 ** x.shape[0])


def series_moment(seq, rnd, p, r, samples, seed, exhaustive=None, jobs=1):
    """Rademacher moments are enumerated when `exhaustive` (default: N <= 12)."""
    x = as_sequence(seq)
    rnd = check_randomizer(rnd)
    if exhaustive is None:
        exhaustive = rnd == "rademacher" and x.shape[0] <= 12
    if exhaustive:
        if rnd != "rademacher":
            raise ValueError("exhaustive enumeration needs the rademacher randomizer")
        return exact_rademacher_moment(x, p, r)
    return sample_series_norm(x, rnd, p, r, samples, seed, jobs=jobs)


def kahane_ratio(seq, rnd, p, r1, r2, samples, seed, exhaustive=False, jobs=1):
    """``L_{r2}`` over ``L_{r1}`` moment of the series norm.

    Both moments use the same draws.  Returns an :class:`EstimateReport`
    whose error comes from the delta method on the pair of sample moments.
    """
    if not 0 < r1 < r2:
        raise ValueError("need 0 < r1 < r2, got r1=%r r2=%r" % (r1, r2))
    x = as_sequence(seq)
    if exhaustive:
        norms = exact_norms(x, p)
        total = 2 ** x.shape[0]
    else:
        norms = sample_norms(x, rnd, p, samples, seed, jobs=jobs)
        total = norms.size
    a, b = norms ** r1, norms ** r2
    m1, m2 = float(a.mean()), float(b.mean())
    if m1 == 0:
        raise ValueError("series is almost surely zero")
    ratio = m2 ** (1.0 / r2) / m1 ** (1.0 / r1)
    se = 0.0
    if not exhaustive and norms.size > 1:
        grad = np.array([-ratio / (r1 * m1), ratio / (r2 * m2)])
        cov = np.cov(np.vstack([a, b])) / norms.size
        se = float(math.sqrt(max(grad @ cov @ grad, 0.0)))
    return EstimateReport(ratio, se, ratio - Z95 * se, ratio + Z95 * se, total,
                          int(seed), bool(exhaustive))


@dataclass(frozen=True)
class TailPoint:
    t: float
    survival: float
    std_error: float
    exceedances: int
    reliable: bool


@dataclass(frozen=True)
class TailProfile:
    points: tuple
    delta_hat: float
    samples: int
    seed: int

    def to_json(self):
        return {"points": [asdict(pt) for pt in self.points], "delta_hat": self.delta_hat,
                "samples": self.samples, "seed": self.seed}


def fit_tail_exponent(ts, survival):
    """Least-squares slope of ``-log P(||S|| > t)`` against ``t**2``."""
    ts = np.asarray(ts, dtype=float)
    survival = np.asarray(survival, dtype=float)
    if ts.size < 2:
        return math.nan
    slope, _ = np.polyfit(ts ** 2, -np.log(survival), 1)
    return float(slope)


def tail_profile(seq, rnd, p, samples, seed, t_grid, min_exceedances=10, jobs=1):
    """Empirical survival function of the series norm on `t_grid`.

    Grid points with fewer than `min_exceedances` exceedances are flagged
    unreliable.  ``delta_hat`` is fitted on the reliable points of the
    upper half of the grid (all reliable points if that leaves fewer than
    two) and is NaN when fewer than two reliable points exist.
    """
    ts = np.asarray(t_grid, dtype=float)
    if ts.ndim != 1 or ts.size == 0 or np.any(np.diff(ts) <= 0):
        raise ValueError("t_grid must be a nonempty increasing sequence")
    norms = sample_norms(seq, rnd, p, samples, seed, jobs=jobs)
    n = norms.size
    pts = []
    for t in ts:
        k = int(np.count_nonzero(norms > t))
        s = k / n
        pts.append(TailPoint(float(t), s, math.sqrt(s * (1 - s) / n), k, k >= min_exceedances))
    upper = [pt for pt in pts[ts.size // 2:] if pt.reliable]
    if len(upper) < 2:
        upper = [pt for pt in pts if pt.reliable]
    delta = fit_tail_exponent([pt.t for pt in upper], [pt.survival for pt in upper]) \
        if len(upper) >= 2 else math.nan
    return TailProfile(tuple(pts), delta, n, int(seed))


def row_column_functional(a, q):
    """``max((sum_i (sum_j |a_ij|^2)^{q/2})^{1/q}, same over columns)``."""
    a = as_matrix(a)
    q = check_exponent(q)
    rows = np.sqrt(np.sum(np.abs(a) ** 2, axis=1))
    cols = np.sqrt(np.sum(np.abs(a) ** 2, axis=0))
    if math.isinf(q):
        return float(max(rows.max(), cols.max()))
    return float(max(np.sum(rows ** q) ** (1 / q), np.sum(cols ** q) ** (1 / q)))


def random_sign_matrix_norm(a, q, samples, seed, r=1.0, jobs=1):
    """Estimate ``(E ||(eps_ij a_ij)||_{C_q}^r)^{1/r}`` (default r = 1).

    Equivalence with :func:`row_column_functional` holds for ``q >= 2``;
    smaller exponents warn with :class:`OutsideTheoremRange`.
    """
    a = as_matrix(a)
    q = check_exponent(q)
    if q < 2:
        warnings.warn("random sign matrices with q=%g < 2: no equivalence claimed" % q,
                      OutsideTheoremRange, stacklevel=2)

    def one(item):
        b, count = item
        g = stream(seed, b)
        eps = draw(g, "rademacher", (count,) + a.shape)
        return schatten_norm_from_spectrum(singular_values(eps * a), q)

    norms = np.concatenate(_run(one, batches(samples), jobs))
    return report_from_norms(norms, r, seed)
