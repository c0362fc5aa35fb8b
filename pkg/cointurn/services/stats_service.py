"""
Special functions and goodness-of-fit statistics
"""
import logging
import math

import numpy as np
from scipy.special import erfc, gammaln

from ..errors import InvalidParameters

logger = logging.getLogger("cointurn.stats")

CF_MAX_ITER = 300
CF_EPS = 1e-14
_FPMIN = 1e-300


def _betacf(a, b, x):
    """Continued fraction for the incomplete beta function, modified Lentz, vectorised over x"""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < _FPMIN, _FPMIN, d)
    d = 1.0 / d
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for m in range(1, CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _FPMIN, _FPMIN, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _FPMIN, _FPMIN, c)
        d = 1.0 / d
        h = np.where(active, h * d * c, h)
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _FPMIN, _FPMIN, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _FPMIN, _FPMIN, c)
        d = 1.0 / d
        delta = d * c
        h = np.where(active, h * delta, h)
        active &= np.abs(delta - 1.0) >= CF_EPS
        if not active.any():
            break
    else:
        logger.warning(f"Beta continued fraction hit {CF_MAX_ITER} iterations for a={a}, b={b}")
    return h


def beta_cdf(alpha: float, beta: float, x):
    """
    Regularized incomplete beta I_x(alpha, beta)

    Args:
        alpha, beta: shape parameters, both > 0
        x: point or array in [0, 1]

    Returns:
        float for scalar x, array otherwise
    """
    if alpha <= 0 or beta <= 0:
        raise InvalidParameters(f"Beta shapes must be positive, got {alpha}, {beta}")
    x_arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if np.any((x_arr < 0.0) | (x_arr > 1.0)):
        raise InvalidParameters("x must lie in [0, 1]")

    result = np.where(x_arr >= 1.0, 1.0, 0.0)
    inner = (x_arr > 0.0) & (x_arr < 1.0)
    if inner.any():
        xi = x_arr[inner]
        log_beta = gammaln(alpha) + gammaln(beta) - gammaln(alpha + beta)
        front = np.exp(alpha * np.log(xi) + beta * np.log1p(-xi) - log_beta)
        direct = xi < (alpha + 1.0) / (alpha + beta + 2.0)
        values = np.empty_like(xi)
        if direct.any():
            values[direct] = front[direct] * _betacf(alpha, beta, xi[direct]) / alpha
        if (~direct).any():
            values[~direct] = 1.0 - front[~direct] * _betacf(beta, alpha, 1.0 - xi[~direct]) / beta
        result[inner] = np.clip(values, 0.0, 1.0)
    return float(result[0]) if np.ndim(x) == 0 else result


def normal_cdf(x, mean: float = 0.0, sd: float = 1.0):
    """Phi((x - mean) / sd) through erfc"""
    if sd <= 0:
        raise InvalidParameters(f"sd must be positive, got {sd}")
    z = (np.asarray(x, dtype=np.float64) - mean) / sd
    result = 0.5 * erfc(-z / math.sqrt(2.0))
    return float(result) if np.ndim(result) == 0 else result


class Ecdf:
    """Right-continuous empirical distribution function"""

    def __init__(self, sample):
        self.values = np.sort(np.asarray(sample, dtype=np.float64))
        if len(self.values) == 0:
            raise InvalidParameters("empty sample")
        self.size = len(self.values)

    def __call__(self, x):
        return np.searchsorted(self.values, x, side="right") / self.size


def ks_one(sample, cdf) -> float:
    """sup_x |F_n(x) - F(x)|, exact over the sorted sample"""
    ecdf = Ecdf(sample)
    reference = np.asarray(cdf(ecdf.values), dtype=np.float64)
    ranks = np.arange(1, ecdf.size + 1)
    above = np.max(ranks / ecdf.size - reference)
    below = np.max(reference - (ranks - 1) / ecdf.size)
    return float(max(above, below, 0.0))


def ks_two(sample_a, sample_b) -> float:
    """sup_x |F_a(x) - F_b(x)|"""
    ecdf_a = Ecdf(sample_a)
    ecdf_b = Ecdf(sample_b)
    pooled = np.concatenate((ecdf_a.values, ecdf_b.values))
    return float(np.max(np.abs(ecdf_a(pooled) - ecdf_b(pooled))))


def ks_discrete(support, probs, cdf) -> float:
    """sup distance between a lattice law and a continuous CDF, checked on both sides of every atom"""
    order = np.argsort(support)
    support = np.asarray(support, dtype=np.float64)[order]
    probs = np.asarray(probs, dtype=np.float64)[order]
    upper = np.cumsum(probs)
    lower = upper - probs
    reference = np.asarray(cdf(support), dtype=np.float64)
    return float(max(np.max(np.abs(upper - reference)), np.max(np.abs(lower - reference))))


def poisson_pmf(mu: float, k):
    """exp(k log mu - mu - log k!)"""
    if mu < 0:
        raise InvalidParameters(f"Poisson mean must be >= 0, got {mu}")
    k = np.asarray(k, dtype=np.float64)
    if mu == 0:
        result = np.where(k == 0, 1.0, 0.0)
    else:
        result = np.exp(k * math.log(mu) - mu - gammaln(k + 1.0))
    return float(result) if np.ndim(result) == 0 else result


def empirical_pmf(counts) -> np.ndarray:
    counts = np.asarray(counts, dtype=np.int64)
    return np.bincount(counts) / len(counts)


def tv_to_poisson(counts, mu: float) -> float:
    """(1/2) sum_k |empirical(k) - Poisson(mu)(k)|, Poisson mass beyond the sample range included"""
    empirical = empirical_pmf(counts)
    reference = poisson_pmf(mu, np.arange(len(empirical)))
    tail = max(0.0, 1.0 - float(np.sum(reference)))
    return tv_between_pmfs(empirical, reference) + 0.5 * tail


def tv_between_pmfs(p, q) -> float:
    size = max(len(p), len(q))
    p = np.pad(np.asarray(p, dtype=np.float64), (0, size - len(p)))
    q = np.pad(np.asarray(q, dtype=np.float64), (0, size - len(q)))
    return 0.5 * float(np.abs(p - q).sum())


def jackknife_variance_se(samples, blocks: int = 20):
    """Sample variance and its delete-one-block jackknife standard error"""
    samples = np.asarray(samples, dtype=np.float64)
    if len(samples) < 2 * blocks:
        raise InvalidParameters(f"need at least {2 * blocks} samples for {blocks} blocks")
    estimate = float(np.var(samples, ddof=1))
    chunks = np.array_split(samples, blocks)
    leave_out = np.array([
        np.var(np.concatenate(chunks[:i] + chunks[i + 1:]), ddof=1) for i in range(blocks)
    ])
    se = math.sqrt((blocks - 1) / blocks * float(np.sum((leave_out - leave_out.mean()) ** 2)))
    return estimate, se


def correlation(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.std() == 0 or y.std() == 0:
        return 0.0
    return float(np.corrcoef(x, y)[0, 1])
