"""Finite-dimensional normed spaces used as coefficient spaces.

Spec strings: ``euclidean(k)``, ``l1(k)``, ``linf(k)``, ``schatten(p, d)``.
Vectors of a schatten space are d*d arrays flattened row-major.
"""

import math
import re
from dataclasses import dataclass

import numpy as np

from .matrix import check_exponent, schatten_norm_from_spectrum, singular_values

_ALIASES = {
    "euclidean": "euclidean", "l2": "euclidean",
    "l1": "l1", "sum": "l1",
    "linf": "linf", "max": "linf", "l_inf": "linf",
    "schatten": "schatten",
}

_SPEC = re.compile(r"^\s*([a-z_0-9]+)\s*(?:\((.*)\))?\s*$")


@dataclass(frozen=True)
class NormedSpace:
    kind: str
    dim: int
    p: float = 2.0

    def __post_init__(self):
        if self.kind not in ("euclidean", "l1", "linf", "schatten"):
            raise ValueError("unknown space kind %r" % self.kind)
        if self.dim < 1:
            raise ValueError("space dimension must be positive")
        if self.kind == "schatten":
            d = math.isqrt(self.dim)
            if d * d != self.dim:
                raise ValueError("schatten coefficient dimension %d is not a perfect square"
                                 % self.dim)
            check_exponent(self.p)

    @property
    def side(self):
        """Matrix side d for schatten spaces."""
        return math.isqrt(self.dim)

    def norm(self, v):
        """Norm along the last axis of `v` (shape ``(..., dim)``)."""
        v = np.asarray(v)
        if v.shape[-1] != self.dim:
            raise ValueError("vector length %d does not match space dimension %d"
                             % (v.shape[-1], self.dim))
        a = np.abs(v)
        if self.kind == "euclidean":
            return np.sqrt(np.sum(a * a, axis=-1))
        if self.kind == "l1":
            return np.sum(a, axis=-1)
        if self.kind == "linf":
            return np.max(a, axis=-1)
        d = self.side
        m = v.reshape(v.shape[:-1] + (d, d))
        return schatten_norm_from_spectrum(singular_values(m), self.p)

    def spec(self):
        if self.kind == "schatten":
            p = "inf" if math.isinf(self.p) else "%g" % self.p
            return "schatten(%s,%d)" % (p, self.side)
        return "%s(%d)" % (self.kind, self.dim)

    def coefficient_norm_name(self):
        """Name used in polynomial JSON (``euclidean``, ``sum``, ``max``, ``schatten(p)``)."""
        if self.kind == "schatten":
            return "schatten(%s)" % ("inf" if math.isinf(self.p) else "%g" % self.p)
        return {"euclidean": "euclidean", "l1": "sum", "linf": "max"}[self.kind]


def parse_space(spec):
    """Parse a space spec string such as ``"schatten(1, 3)"``."""
    if isinstance(spec, NormedSpace):
        return spec
    m = _SPEC.match(str(spec).lower())
    if not m or m.group(1) not in _ALIASES:
        raise ValueError("cannot parse space spec %r" % spec)
    kind = _ALIASES[m.group(1)]
    args = [a.strip() for a in (m.group(2) or "").split(",") if a.strip()]
    if kind == "schatten":
        if len(args) != 2:
            raise ValueError("schatten space needs (p, d), got %r" % spec)
        d = int(args[1])
        return NormedSpace("schatten", d * d, check_exponent(args[0]))
    if len(args) != 1:
        raise ValueError("space %r needs a dimension" % spec)
    return NormedSpace(kind, int(args[0]))


def coefficient_space(name, coeff_dim):
    """Space from a polynomial ``norm`` field plus its coefficient dimension."""
    m = _SPEC.match(str(name).lower())
    if not m or m.group(1) not in _ALIASES:
        raise ValueError("unknown coefficient norm %r" % name)
    kind = _ALIASES[m.group(1)]
    if kind == "schatten":
        return NormedSpace("schatten", int(coeff_dim), check_exponent(m.group(2) or 1))
    return NormedSpace(kind, int(coeff_dim))
