"""Distribution fitting and goodness-of-fit statistics for replica samples.

Maximum likelihood for the extreme-value and Gamma families reduces to a
one-dimensional monotone root problem in the shape/scale parameter; both
solvers bracket and bisect, which is robust for the badly-scaled samples an
experiment can produce.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, gammainc

__all__ = [
    "FitError",
    "KSResult",
    "GumbelFit",
    "GammaFit",
    "ks_statistic",
    "gumbel_cdf",
    "gumbel_sample",
    "fit_gumbel",
    "gamma_cdf",
    "fit_gamma",
]

_MAX_ITER = 200


class FitError(RuntimeError):
    """Fit did not converge or the sample is degenerate."""


@dataclass(frozen=True)
class KSResult:
    statistic: float
    n: int


@dataclass(frozen=True)
class GumbelFit:
    location: float
    scale: float
    ks_stat: float
    n: int


@dataclass(frozen=True)
class GammaFit:
    shape: float
    scale: float
    ks_stat: float
    n: int


def ks_statistic(samples, cdf) -> KSResult:
    """sup_x |F_emp(x) - F(x)| over the sorted sample, one pass."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.shape[0]
    if n == 0:
        raise ValueError("samples must be nonempty")
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(n)
    stat = float(np.max(np.maximum(F - i / n, (i + 1) / n - F)))
    return KSResult(statistic=stat, n=n)


# ---------------------------------------------------------------------------
# Gumbel (max-type): cdf exp(-exp(-(x - loc)/scale))
# ---------------------------------------------------------------------------

def gumbel_cdf(x, loc: float = 0.0, scale: float = 1.0):
    return np.exp(-np.exp(-(np.asarray(x, dtype=float) - loc) / scale))


def gumbel_sample(rng: np.random.Generator, n: int, loc: float = 0.0,
                  scale: float = 1.0) -> np.ndarray:
    return loc - scale * np.log(-np.log(rng.uniform(size=n)))


def _gumbel_profile(x: np.ndarray, s: float) -> float:
    """Profile-likelihood equation value; strictly increasing in s."""
    w = np.exp(-(x - x.min()) / s)  # weights peak at the minimum: no overflow
    return s - x.mean() + float(np.sum(x * w) / np.sum(w))


def fit_gumbel(samples) -> GumbelFit:
    """Maximum-likelihood location/scale via bisection on the profile equation."""
    x = np.asarray(samples, dtype=float)
    n = x.shape[0]
    if n < 200:
        raise FitError(f"need at least 200 samples, got {n}")
    sd = float(x.std(ddof=1))
    if sd <= 0 or not np.isfinite(sd):
        raise FitError("degenerate sample: zero variance")
    lo, hi = 1e-3 * sd, 10.0 * sd
    flo, fhi = _gumbel_profile(x, lo), _gumbel_profile(x, hi)
    it = 0
    while flo > 0 and it < _MAX_ITER:
        lo *= 0.5
        flo = _gumbel_profile(x, lo)
        it += 1
    while fhi < 0 and it < _MAX_ITER:
        hi *= 2.0
        fhi = _gumbel_profile(x, hi)
        it += 1
    if flo > 0 or fhi < 0:
        raise FitError("could not bracket the scale equation")
    for _ in range(_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if _gumbel_profile(x, mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-12 * max(1.0, hi):
            break
    else:
        raise FitError("scale bisection did not converge in 200 iterations")
    scale = 0.5 * (lo + hi)
    loc = -scale * math.log(float(np.mean(np.exp(-(x - x.min()) / scale)))) + x.min()
    ks = ks_statistic(x, lambda v: gumbel_cdf(v, loc, scale)).statistic
    return GumbelFit(location=float(loc), scale=float(scale), ks_stat=ks, n=n)


# ---------------------------------------------------------------------------
# Gamma: shape k, scale theta
# ---------------------------------------------------------------------------

def gamma_cdf(x, shape: float, scale: float = 1.0):
    return gammainc(shape, np.maximum(np.asarray(x, dtype=float), 0.0) / scale)


def fit_gamma(samples) -> GammaFit:
    """Maximum-likelihood shape/scale; log(k) - digamma(k) is monotone in k."""
    x = np.asarray(samples, dtype=float)
    n = x.shape[0]
    if n < 200:
        raise FitError(f"need at least 200 samples, got {n}")
    if np.any(x <= 0):
        raise FitError("Gamma fit requires strictly positive samples")
    s = math.log(float(x.mean())) - float(np.mean(np.log(x)))
    if s <= 0 or not np.isfinite(s):
        raise FitError("degenerate sample: zero variance")
    lo, hi = 1e-8, 1.0
    it = 0
    while math.log(hi) - digamma(hi) > s and it < _MAX_ITER:
        hi *= 2.0
        it += 1
    if math.log(hi) - digamma(hi) > s:
        raise FitError("could not bracket the shape equation")
    for _ in range(_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if math.log(mid) - digamma(mid) > s:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * max(1.0, hi):
            break
    else:
        raise FitError("shape bisection did not converge in 200 iterations")
    shape = 0.5 * (lo + hi)
    scale = float(x.mean()) / shape
    ks = ks_statistic(x, lambda v: gamma_cdf(v, shape, scale)).statistic
    return GammaFit(shape=float(shape), scale=scale, ks_stat=ks, n=n)
