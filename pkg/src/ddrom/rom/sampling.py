"""Tensor-product sampling of the (viscosity, magnitude) parameter box."""
import math
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidRange


@dataclass(frozen=True)
class ParameterSample:
    nu: float
    ubar: float


def _factor(M):
    """``M = a * b`` with ``a <= b`` and ``a`` as large as possible."""
    a = math.isqrt(M)
    while M % a:
        a -= 1
    return a, M // a


def _axis(lo, hi, n):
    if n == 1:
        return np.array([0.5 * (lo + hi)])
    return np.linspace(lo, hi, n)


def sample_parameters(ranges, M):
    """Uniform grid of ``M`` points over ``ranges = ((nu_lo, nu_hi), (ubar_lo, ubar_hi))``.

    ``M`` is factored as close to square as possible; the viscosity axis gets
    the smaller factor. Samples are ordered with viscosity varying slowest.
    """
    if not isinstance(M, (int, np.integer)) or M < 1:
        raise InvalidRange(f"number of samples must be a positive integer, got {M!r}")
    (nlo, nhi), (ulo, uhi) = ranges
    for lo, hi in ((nlo, nhi), (ulo, uhi)):
        if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
            raise InvalidRange(f"invalid range [{lo}, {hi}]")
    if nlo <= 0:
        raise InvalidRange("viscosity must be positive")
    a, b = _factor(int(M))
    return [ParameterSample(float(nu), float(ub)) for nu in _axis(nlo, nhi, a) for ub in _axis(ulo, uhi, b)]


def validation_grid(ranges, n=5, seed=0):
    """Seeded stratified ``n x n`` grid: one uniform draw inside each cell of the box."""
    (nlo, nhi), (ulo, uhi) = ranges
    rng = np.random.default_rng(seed)
    jit = rng.random((n, n, 2))
    out = []
    for i in range(n):
        for j in range(n):
            nu = nlo + (nhi - nlo) * (i + jit[i, j, 0]) / n
            ub = ulo + (uhi - ulo) * (j + jit[i, j, 1]) / n
            out.append(ParameterSample(float(nu), float(ub)))
    return out


def in_range(sample, ranges, rtol=1e-12):
    (nlo, nhi), (ulo, uhi) = ranges
    tn = rtol * max(1.0, abs(nhi))
    tu = rtol * max(1.0, abs(uhi))
    return nlo - tn <= sample.nu <= nhi + tn and ulo - tu <= sample.ubar <= uhi + tu
