"""Numerical laboratory for random series of Schatten-class operators."""

__version__ = "0.1.0"

from .matrix import abs_op, schatten_norm, svd
from .square import chi_norm, column_gram, hilbert_sum_norm, row_gram
from .decomposition import SolverConfig, triple_norm
from .series import exact_rademacher_moment, sample_series_norm

__all__ = [
    "abs_op", "schatten_norm", "svd",
    "chi_norm", "column_gram", "row_gram", "hilbert_sum_norm",
    "SolverConfig", "triple_norm",
    "exact_rademacher_moment", "sample_series_norm",
]
