"""Vector-valued trigonometric polynomials on the torus T^M, Hardy
martingales, and lower bounds for the analytic UMD constant.

Coordinates are ``t_0, ..., t_{M-1}``.  ``E_n`` integrates out every
coordinate after ``t_n``; on coefficients it keeps the multi-indices whose
last nonzero entry (the *level*) is at most ``n``.  A polynomial is Hardy
iff every nonconstant multi-index has a positive entry at its level.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .rng import batches, stream
from .series import EstimateReport, report_from_norms
from .spaces import NormedSpace, coefficient_space, parse_space

__all__ = [
    "NotHardyError",
    "TorusPolynomial",
    "level",
    "conditional_expectation",
    "is_hardy",
    "martingale_differences",
    "l2_norm",
    "grid_l2_norm",
    "umd_transform",
    "umd_transform_norm",
    "averaged_umd_transform_norm",
    "random_hardy_polynomial",
    "steinhaus_polynomial",
    "UMDReport",
    "estimate_analytic_umd_constant",
    "umd_lower_bound_sweep",
]


class NotHardyError(ValueError):
    """The polynomial has a negative frequency at some level."""


def level(freq):
    """Index of the last nonzero entry of a multi-index, -1 for zero."""
    nz = np.flatnonzero(np.asarray(freq))
    return int(nz[-1]) if nz.size else -1


def canonical(freq):
    """Multi-index with trailing zeros removed."""
    freq = tuple(int(k) for k in freq)
    return freq[:level(freq) + 1]


class TorusPolynomial:
    """Finite sum ``sum_nu c_nu exp(i <nu, t>)`` with vector coefficients.

    Parameters
    ----------
    M : int
        Number of torus coordinates.
    space : NormedSpace or str
        Coefficient space; its dimension is the coefficient length.
    terms : dict
        Multi-index (length <= M, padded with zeros) -> coefficient vector.
        Coefficients that are exactly zero are dropped; repeated
        multi-indices are summed.
    """

    def __init__(self, M, space, terms=None):
        self.M = int(M)
        if self.M < 1:
            raise ValueError("torus dimension M must be >= 1")
        self.space = parse_space(space)
        self.terms = {}
        for freq, c in (terms or {}).items():
            freq = tuple(int(k) for k in freq)
            if len(freq) > self.M:
                if any(freq[self.M:]):
                    raise ValueError("multi-index %r uses coordinates beyond M=%d" % (freq, self.M))
                freq = freq[:self.M]
            freq = freq + (0,) * (self.M - len(freq))
            c = np.asarray(c, dtype=np.complex128).ravel()
            if c.size != self.space.dim:
                raise ValueError("coefficient length %d != coeff_dim %d" % (c.size, self.space.dim))
            if not np.all(np.isfinite(c)):
                raise ValueError("non-finite coefficient at %r" % (freq,))
            if freq in self.terms:
                c = self.terms[freq] + c
            self.terms[freq] = c
        self.terms = {k: v for k, v in self.terms.items() if np.any(v != 0)}

    @property
    def coeff_dim(self):
        return self.space.dim

    def with_terms(self, terms):
        return TorusPolynomial(self.M, self.space, terms)

    def support(self):
        return {canonical(k) for k in self.terms}

    def degree(self):
        return max((max(abs(k) for k in f) for f in self.terms), default=0)

    def __neg__(self):
        return self.with_terms({k: -v for k, v in self.terms.items()})

    def __add__(self, other):
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out[k] + v if k in out else v
        return self.with_terms(out)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        return self.with_terms({k: c * v for k, v in self.terms.items()})

    def coeff_equal(self, other):
        """Exact equality of coefficients (after dropping zeros)."""
        if self.terms.keys() != other.terms.keys():
            return False
        return all(np.array_equal(v, other.terms[k]) for k, v in self.terms.items())

    def __call__(self, t):
        """Evaluate at points `t` of shape ``(S, M)``; returns ``(S, coeff_dim)``."""
        t = np.atleast_2d(np.asarray(t, dtype=float))
        if not self.terms:
            return np.zeros((t.shape[0], self.coeff_dim), dtype=np.complex128)
        freqs = np.array(list(self.terms.keys()), dtype=float)
        coeffs = np.array(list(self.terms.values()))
        return np.exp(1j * (t @ freqs.T)) @ coeffs

    def to_json(self):
        return {
            "M": self.M,
            "coeff_dim": self.coeff_dim,
            "norm": self.space.coefficient_norm_name(),
            "terms": [{"freq": list(canonical(k)), "re": v.real.tolist(), "im": v.imag.tolist()}
                      for k, v in sorted(self.terms.items())],
        }

    @classmethod
    def from_json(cls, obj):
        space = coefficient_space(obj.get("norm", "euclidean"), obj["coeff_dim"])
        terms = {}
        for term in obj["terms"]:
            re = np.asarray(term["re"], dtype=float)
            im = np.asarray(term.get("im", np.zeros_like(re)), dtype=float)
            freq = tuple(term["freq"])
            c = re + 1j * im
            if freq in terms:
                c = terms[freq] + c
            terms[freq] = c
        return cls(obj["M"], space, terms)

    def __repr__(self):
        return "TorusPolynomial(M=%d, space=%s, terms=%d)" % (self.M, self.space.spec(),
                                                             len(self.terms))


def conditional_expectation(f, n):
    """``E_n f``: keep terms of level ``<= n`` (``n = -1`` gives the mean)."""
    if n < -1:
        raise ValueError("conditional expectation index must be >= -1")
    return f.with_terms({k: v for k, v in f.terms.items() if level(k) <= n})


def is_hardy(f):
    for k in f.terms:
        j = level(k)
        if j >= 0 and k[j] < 0:
            return False
    return True


def martingale_differences(f):
    """``[d_0 f, ..., d_{M-1} f]`` with ``d_n = E_n - E_{n-1}``."""
    out = [dict() for _ in range(f.M)]
    for k, v in f.terms.items():
        j = level(k)
        if j >= 0:
            out[j][k] = v
    return [f.with_terms(d) for d in out]


def _uniform_points(gen, count, M):
    return 2.0 * np.pi * gen.random(size=(count, M))


def _sampled_norms(f, samples, seed):
    chunks = []
    for b, count in batches(samples):
        t = _uniform_points(stream(seed, b), count, f.M)
        chunks.append(f.space.norm(f(t)))
    return np.concatenate(chunks)


def l2_norm(f, quadrature_samples=20000, seed=0, method="auto"):
    """``(int ||f(t)||^2 dm(t))^{1/2}``.

    ``method="auto"`` is exact by Parseval for euclidean coefficients and
    Monte Carlo over uniform points of T^M otherwise; ``"mc"`` forces
    sampling.
    """
    if method not in ("auto", "mc"):
        raise ValueError("method must be 'auto' or 'mc'")
    if f.space.kind == "euclidean" and method == "auto":
        val = math.sqrt(sum(float(np.vdot(v, v).real) for v in f.terms.values()))
        return EstimateReport(val, 0.0, val, val, 0, int(seed), True)
    return report_from_norms(_sampled_norms(f, quadrature_samples, seed), 2, seed)


def grid_l2_norm(f, points_per_axis=None):
    """L2 norm on a tensor grid of equispaced angles.

    The default of ``2 * degree + 1`` points per axis integrates
    trigonometric polynomials of degree ``2 * degree`` exactly, which covers
    ``||f||^2`` for euclidean coefficients.
    """
    n = points_per_axis or 2 * f.degree() + 1
    axis = 2.0 * np.pi * np.arange(n) / n
    total, count = 0.0, 0
    # chunk over the first coordinate to bound memory
    rest = np.array(list(itertools.product(axis, repeat=f.M - 1))).reshape(-1, f.M - 1)
    for a in axis:
        t = np.hstack([np.full((rest.shape[0], 1), a), rest])
        vals = f.space.norm(f(t))
        total += float(np.sum(vals ** 2))
        count += vals.size
    return math.sqrt(total / count)


def _check_signs(f, signs, include_level_zero):
    signs = np.asarray(signs, dtype=float).ravel()
    first = 0 if include_level_zero else 1
    need = f.M - first
    if signs.size != need:
        raise ValueError("need %d signs for levels %d..%d, got %d"
                         % (need, first, f.M - 1, signs.size))
    if not np.all(np.abs(signs) == 1):
        raise ValueError("signs must be +1 or -1")
    return signs, first


def umd_transform(f, signs, rotated=False, include_level_zero=False):
    """``sum_{n >= 1} eps_n d_n f`` as a polynomial.

    `signs[k]` multiplies level ``k + 1`` (level ``k`` when
    `include_level_zero`).  With `rotated`, each ``d_n f`` is additionally
    multiplied by ``exp(-i t_n)``, which shifts its frequencies at
    coordinate n down by one; shifted terms may merge across levels.
    """
    signs, first = _check_signs(f, signs, include_level_zero)
    out = {}
    for n, d in enumerate(martingale_differences(f)):
        if n < first:
            continue
        e = signs[n - first]
        for k, v in d.terms.items():
            if rotated:
                k = k[:n] + (k[n] - 1,) + k[n + 1:]
            out[k] = out[k] + e * v if k in out else e * v
    return f.with_terms(out)


def umd_transform_norm(f, signs, rotated=False, quadrature_samples=20000, seed=0,
                       include_level_zero=False):
    """L2 norm of :func:`umd_transform`; rejects non-Hardy input."""
    if not is_hardy(f):
        raise NotHardyError("umd_transform_norm is defined for Hardy polynomials only")
    g = umd_transform(f, signs, rotated=rotated, include_level_zero=include_level_zero)
    return l2_norm(g, quadrature_samples, seed)


def _all_signs(levels):
    if levels == 0:
        return np.ones((1, 0))
    return np.array(list(itertools.product((1.0, -1.0), repeat=levels)))


def averaged_umd_transform_norm(f, rotated=False, quadrature_samples=20000, seed=0,
                                include_level_zero=False):
    """``(E_eps int ||sum eps_n d_n f||^2 dm)^{1/2}`` by enumerating all signs."""
    if not is_hardy(f):
        raise NotHardyError("averaged_umd_transform_norm is defined for Hardy polynomials only")
    levels = f.M - (0 if include_level_zero else 1)
    if levels > 16:
        raise ValueError("sign enumeration limited to 16 levels")
    sq = []
    for s in _all_signs(levels):
        g = umd_transform(f, s, rotated=rotated, include_level_zero=include_level_zero)
        if f.space.kind == "euclidean":
            sq.append(l2_norm(g).estimate ** 2)
        else:
            sq.append(_sampled_norms(g, quadrature_samples, seed) ** 2)
    if f.space.kind == "euclidean":
        val = math.sqrt(float(np.mean(sq)))
        return EstimateReport(val, 0.0, val, val, 0, int(seed), True)
    per_point = np.mean(np.vstack(sq), axis=0)
    return report_from_norms(np.sqrt(per_point), 2, seed)


def random_hardy_polynomial(M, degree, space, gen, terms_per_level=2, mean_zero=False):
    """Random Hardy polynomial of coordinate degree <= `degree`.

    Each level n gets `terms_per_level` multi-indices with a positive
    entry in ``1..degree`` at coordinate n and arbitrary entries in
    ``-degree..degree`` before it; coefficients are complex Gaussian.  With
    `mean_zero` the constant and level-0 terms are omitted so that
    ``E_0 f = 0``.
    """
    space = parse_space(space)
    terms = {}

    def coeff():
        return gen.standard_normal(space.dim) + 1j * gen.standard_normal(space.dim)

    if not mean_zero:
        terms[(0,) * M] = coeff()
    if degree < 1:
        return TorusPolynomial(M, space, terms)
    for n in range(1 if mean_zero else 0, M):
        for _ in range(terms_per_level):
            freq = [0] * M
            freq[:n] = gen.integers(-degree, degree + 1, size=n).tolist()
            freq[n] = int(gen.integers(1, degree + 1))
            terms[tuple(freq)] = coeff()
    return TorusPolynomial(M, space, terms)


def steinhaus_polynomial(seq, p=1.0):
    """``f(t) = sum_n exp(i t_n) x_n`` for square matrices, valued in C_p."""
    from .square import as_sequence

    x = as_sequence(seq)
    n, d1, d2 = x.shape
    if d1 != d2:
        raise ValueError("Steinhaus polynomial needs square terms")
    space = NormedSpace("schatten", d1 * d2, p)
    terms = {}
    for k in range(n):
        freq = [0] * n
        freq[k] = 1
        terms[tuple(freq)] = x[k].ravel()
    return TorusPolynomial(n, space, terms)


@dataclass
class UMDReport:
    lower_bound: float
    std_error: float
    witness: TorusPolynomial
    signs: tuple
    trials: int
    space: str
    degree: int
    inherited: bool = False

    def to_json(self):
        return {"lower_bound": self.lower_bound, "std_error": self.std_error,
                "signs": list(self.signs), "trials": self.trials, "space": self.space,
                "degree": self.degree, "inherited": self.inherited,
                "witness": self.witness.to_json() if self.witness is not None else None}


def _ratio_with_error(num_sq, den_sq):
    # sqrt(mean a / mean b) from paired samples, delta method
    a, b = np.asarray(num_sq), np.asarray(den_sq)
    A, B = float(a.mean()), float(b.mean())
    if B == 0:
        return 0.0, 0.0
    r = math.sqrt(A / B)
    if a.size < 2 or r == 0:
        return r, 0.0
    g = np.array([r / (2 * A), -r / (2 * B)])
    cov = np.cov(np.vstack([a, b])) / a.size
    return r, float(math.sqrt(max(g @ cov @ g, 0.0)))


class _RatioEvaluator:
    """UMD ratio for one polynomial and many sign vectors on fixed points."""

    def __init__(self, f, rotated, include_level_zero, samples, seed):
        self.f = f
        self.first = 0 if include_level_zero else 1
        self.rotated = rotated
        self.include_level_zero = include_level_zero
        self.exact = f.space.kind == "euclidean"
        if self.exact:
            self.den = l2_norm(f).estimate
            return
        t = _uniform_points(stream(seed, 0), samples, f.M)
        self.den_sq = f.space.norm(f(t)) ** 2
        self.blocks = []
        for n, d in enumerate(martingale_differences(f)):
            if n < self.first:
                continue
            vals = d(t)
            if rotated:
                vals = vals * np.exp(-1j * t[:, n])[:, None]
            self.blocks.append(vals)

    def __call__(self, signs):
        if self.exact:
            g = umd_transform(self.f, signs, self.rotated, self.include_level_zero)
            num = l2_norm(g).estimate
            return (num / self.den if self.den > 0 else 0.0), 0.0
        if not self.blocks:
            return 0.0, 0.0
        total = sum(e * b for e, b in zip(signs, self.blocks))
        return _ratio_with_error(self.f.space.norm(total) ** 2, self.den_sq)


def _search_signs(evaluate, levels, budget, gen):
    if levels == 0:
        return (0.0, 0.0), ()
    if levels <= 12:
        best, best_s = (-1.0, 0.0), None
        # eps and -eps give identical norms: fix the first sign
        for rest in itertools.product((1.0, -1.0), repeat=levels - 1):
            s = (1.0,) + rest
            val = evaluate(s)
            if val[0] > best[0]:
                best, best_s = val, s
        return best, best_s
    best, best_s = (-1.0, 0.0), None
    for _ in range(max(1, budget)):
        s = list(2.0 * gen.integers(0, 2, size=levels) - 1.0)
        cur = evaluate(s)
        improved = True
        while improved:
            improved = False
            for j in range(levels):
                s[j] = -s[j]
                val = evaluate(s)
                if val[0] > cur[0]:
                    cur, improved = val, True
                else:
                    s[j] = -s[j]
        if cur[0] > best[0]:
            best, best_s = cur, tuple(s)
    return best, best_s


def estimate_analytic_umd_constant(space_spec, degree, trials, sign_search_budget=4, seed=0,
                                   M=4, quadrature_samples=4096, rotated=False,
                                   include_level_zero=False):
    """Empirical lower bound on the analytic UMD constant of a space.

    Maximizes ``||sum eps_n d_n g||_2 / ||g||_2`` over `trials` random Hardy
    polynomials on T^M (every other one with ``E_0 g = 0``) and over sign
    vectors: exhaustively when there are at most 12 levels, otherwise by
    greedy coordinate ascent from `sign_search_budget` random starts.

    Euclidean spaces are evaluated exactly by Parseval; other spaces by
    Monte Carlo on `quadrature_samples` points per polynomial, with a
    delta-method standard error for the winning ratio.
    """
    space = parse_space(space_spec)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    levels = M - (0 if include_level_zero else 1)
    best = None
    for k in range(trials):
        gen = stream(seed, "umd", k)
        f = random_hardy_polynomial(M, degree, space, gen, mean_zero=(k % 2 == 1))
        ev = _RatioEvaluator(f, rotated, include_level_zero, quadrature_samples,
                             seed=int(gen.integers(0, 2 ** 63)))
        (ratio, se), signs = _search_signs(ev, levels, sign_search_budget, gen)
        if best is None or ratio > best[0]:
            best = (ratio, se, f, signs)
    ratio, se, f, signs = best
    return UMDReport(max(ratio, 0.0), se, f, tuple(signs or ()), trials, space.spec(), degree)


def umd_lower_bound_sweep(sides, degrees, trials, sign_search_budget=4, seed=0, M=4, p=1.0,
                          quadrature_samples=4096):
    """Lower bounds for ``schatten(p, d)`` over increasing `sides` and `degrees`.

    C_p^d embeds isometrically in C_p^{d'} for d <= d' (zero padding) and
    degree-k polynomials are degree-k' polynomials for k <= k', so a bound
    found earlier in the sweep remains valid later.  Each reported bound is
    the larger of the fresh estimate and the previous report (flagged
    ``inherited``), which makes the sequence nondecreasing.
    """
    out = []
    prev = None
    for i, (d, deg) in enumerate(zip(sides, degrees)):
        rep = estimate_analytic_umd_constant("schatten(%g,%d)" % (p, d), deg, trials,
                                             sign_search_budget, seed=seed + i, M=M,
                                             quadrature_samples=quadrature_samples)
        if prev is not None and prev.lower_bound > rep.lower_bound:
            rep = UMDReport(prev.lower_bound, prev.std_error, prev.witness, prev.signs,
                            rep.trials, rep.space, deg, inherited=True)
        out.append(rep)
        prev = rep
    return out
