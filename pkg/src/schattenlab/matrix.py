"""Dense complex matrix kernel: SVD, operator modulus and Schatten norms.

Matrices are plain 2-D ``numpy`` arrays of dtype ``complex128``.  Everything
else in the package reduces to the functions in this module.
"""

import math

import numpy as np

__all__ = [
    "SVDConvergenceError",
    "as_matrix",
    "check_exponent",
    "conjugate_exponent",
    "svd",
    "singular_values",
    "abs_op",
    "schatten_norm",
    "schatten_norm_from_spectrum",
    "psd_sqrt",
    "matrix_from_json",
    "matrix_to_json",
]


class SVDConvergenceError(np.linalg.LinAlgError):
    """Raised when the LAPACK SVD driver fails to converge."""

    def __init__(self, shape):
        self.shape = tuple(shape)
        super().__init__(
            "SVD did not converge for matrix of shape %d x %d" % self.shape[-2:])


def as_matrix(x):
    """Validate `x` and return it as a 2-D complex128 array.

    Raises
    ------
    ValueError
        If `x` is not two dimensional, has an empty axis, or contains
        NaN/Inf entries.
    """
    a = np.asarray(x, dtype=np.complex128)
    if a.ndim != 2:
        raise ValueError("expected a 2-D matrix, got ndim=%d" % a.ndim)
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError("matrix dimensions must be positive, got %r" % (a.shape,))
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def check_exponent(p):
    """Return `p` as a float in ``[1, inf]``.

    Accepts ``"inf"`` / ``"infinity"`` strings so exponents can come straight
    from JSON or the command line.
    """
    if isinstance(p, str):
        if p.strip().lower() in ("inf", "infinity", "oo"):
            return math.inf
        p = float(p)
    p = float(p)
    if math.isnan(p) or p < 1:
        raise ValueError("Schatten exponent must lie in [1, inf], got %r" % p)
    return p


def conjugate_exponent(p):
    """Hoelder conjugate q with 1/p + 1/q = 1."""
    p = check_exponent(p)
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def svd(x):
    """Thin SVD ``x = U @ diag(s) @ Vh`` with `s` nonincreasing.

    Works on a single matrix or a stack ``(..., m, n)``.
    """
    a = np.asarray(x, dtype=np.complex128)
    try:
        return np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError:
        raise SVDConvergenceError(a.shape) from None


def singular_values(x):
    """Nonincreasing singular values of `x` (batched over leading axes)."""
    a = np.asarray(x, dtype=np.complex128)
    try:
        return np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError:
        raise SVDConvergenceError(a.shape) from None


def abs_op(x):
    """Operator modulus ``|x| = (x* x)^{1/2}``, an n x n PSD matrix."""
    _, s, vh = svd(as_matrix(x))
    v = vh.conj().T
    out = (v * s) @ vh
    return 0.5 * (out + out.conj().T)


def schatten_norm_from_spectrum(s, p):
    """Schatten-p norm from singular values along the last axis.

    Scales by the largest value first so large `p` cannot overflow.
    """
    s = np.asarray(s, dtype=float)
    if math.isinf(p):
        return np.max(s, axis=-1, initial=0.0)
    if p == 1:
        return np.sum(s, axis=-1)
    if p == 2:
        return np.sqrt(np.sum(s * s, axis=-1))
    top = np.max(s, axis=-1, initial=0.0)
    safe = np.where(top > 0, top, 1.0)
    ratio = s / np.expand_dims(safe, -1)
    return top * np.sum(ratio ** p, axis=-1) ** (1.0 / p)


def schatten_norm(x, p):
    """``(tr |x|^p)^{1/p}``; the operator norm for ``p = inf``.

    `x` may be a single matrix or a stack of matrices, in which case an
    array of norms is returned.
    """
    p = check_exponent(p)
    a = np.asarray(x, dtype=np.complex128)
    if a.ndim == 2:
        a = as_matrix(a)
        return float(schatten_norm_from_spectrum(singular_values(a), p))
    return schatten_norm_from_spectrum(singular_values(a), p)


def psd_sqrt(h, rel_clip=1e-12):
    """Square root of a Hermitian PSD matrix via ``eigh``.

    Negative eigenvalues no larger than ``rel_clip * trace`` in magnitude
    (round-off from a Gram computation) are clamped to zero; anything more
    negative raises ``ValueError``.  Returns ``(root, eigenvalues)``
    where the eigenvalues are the clamped ones in ascending order.
    """
    h = np.asarray(h, dtype=np.complex128)
    h = 0.5 * (h + h.conj().T)
    w, v = np.linalg.eigh(h)
    floor = rel_clip * max(float(np.real(np.trace(h))), 0.0)
    if np.any(w < -max(floor, 1e-300)):
        raise ValueError("matrix is not positive semidefinite (min eigenvalue %g)" % w.min())
    w = np.clip(w, 0.0, None)
    root = (v * np.sqrt(w)) @ v.conj().T
    return 0.5 * (root + root.conj().T), w


def matrix_from_json(obj):
    """Parse ``{"rows", "cols", "re", "im"}`` (row-major) into an array."""
    rows, cols = int(obj["rows"]), int(obj["cols"])
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj.get("im", np.zeros(rows * cols)), dtype=float)
    if re.size != rows * cols or im.size != rows * cols:
        raise ValueError("matrix literal needs rows*cols = %d entries, got re=%d im=%d"
                         % (rows * cols, re.size, im.size))
    return as_matrix((re + 1j * im).reshape(rows, cols))


def matrix_to_json(x):
    a = as_matrix(x)
    return {
        "rows": a.shape[0],
        "cols": a.shape[1],
        "re": a.real.ravel().tolist(),
        "im": a.imag.ravel().tolist(),
    }
