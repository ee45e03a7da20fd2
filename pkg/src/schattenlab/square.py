"""Row and column square functions of finite operator sequences.

A sequence ``(x_1, ..., x_N)`` of d1 x d2 matrices is stored as a complex
array of shape ``(N, d1, d2)``.  The commutative analogues (Hilbert-space
sums and lattice square functions on a discrete measure) live here too.
"""

import math
import warnings

import numpy as np

from .matrix import as_matrix, check_exponent, matrix_from_json, matrix_to_json, psd_sqrt, \
    schatten_norm_from_spectrum

__all__ = [
    "OutsideTheoremRange",
    "as_sequence",
    "column_gram",
    "row_gram",
    "gram_root_norm",
    "chi_norm",
    "vstack",
    "hstack",
    "unvstack",
    "unhstack",
    "hilbert_sum_norm",
    "lattice_square_norm",
    "sequence_from_json",
    "sequence_to_json",
]


class OutsideTheoremRange(UserWarning):
    """An exponent lies outside the range where the norm equivalence holds."""


def as_sequence(seq):
    """Validate an operator sequence and return a ``(N, d1, d2)`` array.

    Accepts a 3-D array or any iterable of same-shape matrices.
    """
    if isinstance(seq, np.ndarray) and seq.ndim == 3:
        a = seq.astype(np.complex128, copy=False)
    else:
        terms = [as_matrix(t) for t in seq]
        if not terms:
            raise ValueError("operator sequence must have at least one term")
        shape = terms[0].shape
        for k, t in enumerate(terms):
            if t.shape != shape:
                raise ValueError("term %d has shape %r, expected %r" % (k, t.shape, shape))
        a = np.stack(terms)
    if a.shape[0] < 1 or a.shape[1] < 1 or a.shape[2] < 1:
        raise ValueError("empty operator sequence or term, shape %r" % (a.shape,))
    if not np.all(np.isfinite(a)):
        raise ValueError("operator sequence has non-finite entries")
    return a


def column_gram(seq):
    """``sum_n x_n^* x_n`` (d2 x d2, Hermitian PSD)."""
    x = as_sequence(seq)
    g = np.einsum("nij,nik->jk", x.conj(), x)
    return 0.5 * (g + g.conj().T)


def row_gram(seq):
    """``sum_n x_n x_n^*`` (d1 x d1, Hermitian PSD)."""
    x = as_sequence(seq)
    g = np.einsum("nij,nkj->ik", x, x.conj())
    return 0.5 * (g + g.conj().T)


def gram_root_norm(gram, q):
    """Schatten-q norm of ``gram^{1/2}`` computed from the Gram eigenvalues.

    Eigenvalues below ``dim * eps * max`` are round-off from forming the
    Gram matrix and are treated as zero; otherwise each would contribute a
    spurious ``sqrt(eps)``-sized singular value.
    """
    q = check_exponent(q)
    _, w = psd_sqrt(gram)
    w = np.where(w > w.size * np.finfo(float).eps * w.max(initial=0.0), w, 0.0)
    s = np.sort(np.sqrt(w))[::-1]
    return float(schatten_norm_from_spectrum(s, q))


def chi_norm(seq, q, warn=True):
    """Max of the column and row square-function norms in C_q.

    ``max(||(sum x^*x)^{1/2}||_q, ||(sum x x^*)^{1/2}||_q)``.  The two-sided
    equivalence with the Rademacher average holds for ``q >= 2``; smaller
    exponents are computed but trigger an :class:`OutsideTheoremRange`
    warning.
    """
    q = check_exponent(q)
    if warn and q < 2:
        warnings.warn("chi_norm with q=%g < 2: no norm equivalence is claimed" % q,
                      OutsideTheoremRange, stacklevel=2)
    x = as_sequence(seq)
    return max(gram_root_norm(column_gram(x), q), gram_root_norm(row_gram(x), q))


def vstack(seq):
    """Vertical concatenation, shape ``(N*d1, d2)``."""
    x = as_sequence(seq)
    n, d1, d2 = x.shape
    return x.reshape(n * d1, d2)


def hstack(seq):
    """Horizontal concatenation, shape ``(d1, N*d2)``."""
    x = as_sequence(seq)
    n, d1, d2 = x.shape
    return x.transpose(1, 0, 2).reshape(d1, n * d2)


def unvstack(m, n):
    """Inverse of :func:`vstack` for `n` terms."""
    m = np.asarray(m)
    return m.reshape(n, m.shape[0] // n, m.shape[1])


def unhstack(m, n):
    """Inverse of :func:`hstack` for `n` terms."""
    m = np.asarray(m)
    d1 = m.shape[0]
    return m.reshape(d1, n, m.shape[1] // n).transpose(1, 0, 2)


def hilbert_sum_norm(seq):
    """``(sum_n ||x_n||_{C_2}^2)^{1/2}``."""
    x = as_sequence(seq)
    return float(np.sqrt(np.sum(np.abs(x) ** 2)))


def lattice_square_norm(values, weights, p):
    """Square function norm in a weighted discrete L_p space.

    Parameters
    ----------
    values : array_like, shape (N, S)
        ``values[n, s]`` is the n-th function evaluated at point s.
    weights : array_like, shape (S,)
        Strictly positive point masses.
    p : float
        Finite exponent ``>= 1``.

    Returns
    -------
    float
        ``(sum_s w_s (sum_n |x_n(s)|^2)^{p/2})^{1/p}``
    """
    p = check_exponent(p)
    if math.isinf(p):
        raise ValueError("lattice_square_norm needs a finite exponent")
    v = np.atleast_2d(np.asarray(values))
    w = np.asarray(weights, dtype=float).ravel()
    if v.shape[1] != w.size:
        raise ValueError("values have %d points but %d weights given" % (v.shape[1], w.size))
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and strictly positive")
    sq = np.sqrt(np.sum(np.abs(v) ** 2, axis=0))
    return float(np.sum(w * sq ** p) ** (1.0 / p))


def sequence_from_json(obj):
    """Parse ``{"shape": [d1, d2], "terms": [matrix, ...]}``."""
    terms = [matrix_from_json(t) for t in obj["terms"]]
    x = as_sequence(terms)
    if "shape" in obj and tuple(obj["shape"]) != x.shape[1:]:
        raise ValueError("declared shape %r does not match terms %r"
                         % (tuple(obj["shape"]), x.shape[1:]))
    return x


def sequence_to_json(seq):
    x = as_sequence(seq)
    return {"shape": list(x.shape[1:]), "terms": [matrix_to_json(t) for t in x]}
