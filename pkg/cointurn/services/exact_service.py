"""
Exact analytics for the coin-turning walk

Correlations e_{i,j}, head probabilities, the limit product rho, the
martingale coefficients a_n, the cumulative martingale variance v_m with its
time-change Z, and the exact variance of S_n.
"""
import logging
import math

import numpy as np

from ..errors import DivergentSeries, InvalidParameters, NonDivergentVariance
from ..models.results import (
    CoefficientTable,
    CorrProduct,
    ErgodicVerdict,
    MartingaleCoeffs,
    MartingaleDiagnostics,
    RhoResult,
    VarianceLedger,
)
from ..models.schedule import CriticalCooling
from . import coefficient_cache

logger = logging.getLogger("cointurn.exact")

A_TOL = 1e-10
MAX_TERMS = 10**6
DIVERGENCE_CAP = 1e8
TIME_CHANGE_CAP = 1 << 22
FIRST_BLOCK = 1024
MAX_BLOCK = 1 << 18


def _factors(s, start: int, stop: int) -> np.ndarray:
    """1 - 2 p_k for start <= k <= stop"""
    return 1.0 - 2.0 * s.span(start, stop)


def corr(s, i: int, j: int) -> float:
    """e_{i,j} = prod_{k=i+1}^{j} (1 - 2 p_k)"""
    if not 1 <= i <= j:
        raise InvalidParameters(f"corr needs 1 <= i <= j, got i={i}, j={j}")
    if i == j:
        return 1.0
    return float(np.prod(_factors(s, i + 1, j)))


def corr_product(s, i: int, j: int) -> CorrProduct:
    return CorrProduct(i=i, j=j, value=corr(s, i, j))


def head_prob(s, n: int, y1: int) -> float:
    """P(Y_n = 1 | Y_1 = y1); the turn at step k contributes the factor (1 - 2 p_k)"""
    if n < 1:
        raise InvalidParameters(f"n must be >= 1, got {n}")
    if y1 not in (-1, 1):
        raise InvalidParameters(f"y1 must be +1 or -1, got {y1}")
    return 0.5 + 0.5 * y1 * corr(s, 1, n)


def is_mixing(s) -> bool:
    """Whether sum min(p_n, q_n) diverges, from the family's closed form"""
    verdict = s.analytic_regime()
    if verdict is not None:
        return verdict[0]
    return math.isinf(s.tail_min_sum(s.side_onset()))


def rho(s, tol: float = A_TOL, max_terms: int = MAX_TERMS) -> RhoResult:
    """prod_{i>=2} (1 - 2 p_i) with a bound on the log of the dropped tail"""
    if tol <= 0:
        raise InvalidParameters("tol must be positive")
    if is_mixing(s):
        return RhoResult(value=0.0, status="mixing")
    if s.eventual_side() != "low":
        return RhoResult(value=None, status="undefined")

    # -log(1 - 2p) <= 4p once p <= 1/4
    stop = max(s.side_onset(), 64)
    while True:
        p_tail_max = float(s.span(stop + 1, stop + FIRST_BLOCK).max())
        bound = 4.0 * s.tail_min_sum(stop)
        if p_tail_max <= 0.25 and bound < tol:
            break
        if stop >= max_terms:
            logger.warning(f"rho not converged after {stop} factors, tail bound {bound:.3e}")
            value = float(np.prod(_factors(s, 2, stop)))
            return RhoResult(value=value, status="not-converged", log_error_bound=bound, terms=stop - 1)
        stop *= 2

    value = float(np.prod(_factors(s, 2, stop)))
    return RhoResult(value=value, status="converged", log_error_bound=bound, terms=stop - 1)


def tv_bound(s, n: int) -> float:
    """(1/2) prod_{i=2}^{n} (1 - 2 min(p_i, q_i))"""
    p = s.span(2, n)
    return 0.5 * float(np.prod(1.0 - 2.0 * np.minimum(p, 1.0 - p)))


def ergodic_verdict(s, horizon: int) -> ErgodicVerdict:
    """Which of the three limit cases P(Y_n = 1 | Y_1) falls into"""
    if horizon < 1:
        raise InvalidParameters(f"horizon must be >= 1, got {horizon}")
    p = s.span(2, horizon)
    min_sum = float(np.minimum(p, 1.0 - p).sum())
    common = dict(
        n_count=int(np.count_nonzero(p > 0.5)),
        horizon=horizon,
        speed_proxy=math.exp(-2.0 * min_sum),
        tv_bound=tv_bound(s, horizon),
    )

    if is_mixing(s) or np.any(p == 0.5):
        return ErgodicVerdict(case="half", limit_plus=0.5, limit_minus=0.5, **common)

    result = rho(s)
    if result.status == "undefined":
        return ErgodicVerdict(case="no-limit", **common)
    if result.status == "not-converged":
        logger.warning("rho-limit reported from a truncated product")
    value = result.value
    return ErgodicVerdict(
        case="rho-limit",
        rho=value,
        limit_plus=0.5 * (1.0 + value),
        limit_minus=0.5 * (1.0 - value),
        **common,
    )


def _check_divergent_family(s):
    if isinstance(s, CriticalCooling) and s.c <= 0.5:
        raise DivergentSeries(f"a_n is infinite for critical cooling with c={s.c} <= 1/2")


def a_coeff(s, n: int, tol: float = A_TOL, max_terms: int = MAX_TERMS) -> MartingaleCoeffs:
    """
    a_n = sum_{i>=0} e_{n,n+i}

    The series is summed in numpy blocks. Past the side onset the heating
    case is an alternating Leibniz series (stop once the next term is below
    tol); the cooling case has positive decreasing terms (stop once the term
    and the estimated tail are both below tol times the partial sum). When the
    two parities sit on different sides the rest is bounded by a geometric
    series in the largest factor still to come.

    Raises:
        DivergentSeries: the partial sums pass DIVERGENCE_CAP, or the series
            is known or tested to diverge
    """
    if n < 1:
        raise InvalidParameters(f"n must be >= 1, got {n}")
    if tol <= 0:
        raise InvalidParameters("tol must be positive")
    _check_divergent_family(s)

    side = s.eventual_side()
    onset = s.side_onset()
    partial = 0.0
    term = 1.0
    done = 0
    block = FIRST_BLOCK

    while done < max_terms:
        size = min(block, max_terms - done)
        # factors for the terms done+1 .. done+size
        idx = np.arange(n + done + 1, n + done + size + 1, dtype=np.int64)
        p_next = s.probs(idx)
        with np.errstate(under="ignore"):
            terms = np.concatenate(([term], term * np.cumprod(1.0 - 2.0 * p_next)))
        current = terms[:-1]
        following = terms[1:]
        sums = partial + np.cumsum(current)

        if np.any(np.abs(sums) > DIVERGENCE_CAP):
            raise DivergentSeries(f"partial sums of a_{n} exceed {DIVERGENCE_CAP:g}")

        settled = idx >= onset
        if side == "low":
            rate = idx * p_next
            # no usable tail estimate while 2 m p_m <= 1
            with np.errstate(divide="ignore", invalid="ignore"):
                geometric = np.where(p_next > 0, following / (2.0 * p_next), np.inf)
                raabe = np.where(2.0 * rate > 1.0, following * idx / (2.0 * rate - 1.0), np.inf)
            tail = np.maximum(geometric, raabe)
            stop = settled & (current < tol * sums) & (tail < tol * sums)
            bounds = tail
        elif side == "high":
            stop = settled & (np.abs(following) < tol)
            bounds = np.abs(following)
        else:
            # signs follow no pattern; bound the rest by a geometric series in the largest later factor
            ratio = np.abs(1.0 - 2.0 * p_next)
            ahead = np.append(np.maximum.accumulate(ratio[::-1])[::-1][1:], ratio[-1])
            with np.errstate(divide="ignore", invalid="ignore"):
                bounds = np.where(ahead < 1.0, np.abs(following) / (1.0 - ahead), np.inf)
            stop = settled & (bounds < tol)
        stop = stop | (current == 0.0)

        hits = np.flatnonzero(stop)
        if len(hits):
            j = int(hits[0])
            bound = 0.0 if current[j] == 0.0 else float(bounds[j])
            return MartingaleCoeffs(
                n=n, a_n=float(sums[j]), truncation_error_bound=bound, converged=True, terms=done + j + 1
            )

        partial = float(sums[-1])
        term = float(terms[-1])
        done += size
        block = min(block * 2, MAX_BLOCK)

    return _unconverged(s, n, side, partial, term, done, tol)


def _unconverged(s, n, side, partial, term, done, tol) -> MartingaleCoeffs:
    m = n + done
    if side == "high":
        # the sum lies between partial and partial + term
        value, bound = partial + 0.5 * term, 0.5 * abs(term)
    elif side == "low":
        rate = m * s.prob(m)
        if 2.0 * rate <= 1.0:
            raise DivergentSeries(f"a_{n} diverges: Raabe statistic 2*m*p_m = {2.0 * rate:.4f} <= 1 at m={m}")
        bound = term * m / (2.0 * rate - 1.0)
        value = partial + bound
    else:
        ratio = float(np.max(np.abs(_factors(s, m + 1, m + 2))))
        value = partial
        bound = abs(term) / (1.0 - ratio) if ratio < 1.0 else math.inf
    message = f"a_{n} not converged after {done} terms, estimate {value:.6g} +/- {bound:.3e}"
    if bound < tol * max(1.0, abs(value)):
        logger.debug(message)
    else:
        logger.warning(message)
    return MartingaleCoeffs(n=n, a_n=value, truncation_error_bound=bound, converged=False, terms=done)


def _build_table(s, capacity: int, tol: float) -> CoefficientTable:
    """a_i by backward recursion a_i = 1 + (1 - 2 p_{i+1}) a_{i+1} from a series value at capacity"""
    head = a_coeff(s, capacity, tol=tol)
    p = s.span(1, capacity)
    factors = (1.0 - 2.0 * p).tolist()  # factors[k-1] = 1 - 2 p_k
    a = [0.0] * (capacity + 1)
    bound = [0.0] * (capacity + 1)
    a[capacity] = head.a_n
    bound[capacity] = head.truncation_error_bound
    for i in range(capacity - 1, 0, -1):
        f = factors[i]
        a[i] = 1.0 + f * a[i + 1]
        bound[i] = abs(f) * bound[i + 1]

    a_arr = np.array(a)
    a_arr[0] = np.nan
    increments = 4.0 * a_arr[1:] ** 2 * p * (1.0 - p)
    v = np.concatenate(([0.0], np.cumsum(increments)))
    return CoefficientTable(
        schedule_key=s.cache_key(),
        capacity=capacity,
        a=a_arr,
        bound=np.array(bound),
        v=v,
        head_converged=head.converged,
        tol=tol,
    )


def v_table(s, m: int, tol: float = A_TOL) -> CoefficientTable:
    """Cached ledger of a_i, bounds and v_i covering index m"""
    return coefficient_cache.get_table(s, coefficient_cache.capacity_for(m), _build_table, tol)


def v_cum(s, m: int, tol: float = A_TOL) -> float:
    """v_m = sum_{i<=m} 4 a_i^2 p_i q_i"""
    if m < 0:
        raise InvalidParameters(f"m must be >= 0, got {m}")
    if m == 0:
        return 0.0
    return float(v_table(s, m, tol).v[m])


def time_change(s, x: float, tol: float = A_TOL, cap: int = TIME_CHANGE_CAP) -> int:
    """Z(x) = inf{n >= 1 : v_n >= x}"""
    if x < 0:
        raise InvalidParameters(f"x must be >= 0, got {x}")
    capacity = coefficient_cache.MIN_CAPACITY
    while True:
        table = coefficient_cache.get_table(s, capacity, _build_table, tol)
        if table.v[capacity] >= x:
            break
        if capacity >= cap:
            raise NonDivergentVariance(
                f"v stays below {x} up to index {capacity} (v = {table.v[capacity]:.6g})"
            )
        capacity *= 2
    # v[0] = 0 is excluded from the search so Z(0) = 1
    return int(np.searchsorted(table.v[1:], x, side="left")) + 1


def variance_path(s, n: int) -> np.ndarray:
    """Var(S_1), ..., Var(S_n) via r_k = (1 + r_{k-1})(1 - 2 p_k), Var(S_k) = Var(S_{k-1}) + 1 + 2 r_k"""
    if n < 1:
        raise InvalidParameters(f"n must be >= 1, got {n}")
    factors = _factors(s, 2, n).tolist()
    out = [1.0]
    r = 0.0
    for f in factors:
        r = (1.0 + r) * f
        out.append(out[-1] + 1.0 + 2.0 * r)
    return np.array(out)


def variance_exact(s, n: int) -> float:
    return float(variance_path(s, n)[-1])


def variance_ledger(s, m: int) -> VarianceLedger:
    path = variance_path(s, m)
    r = 0.0 if m == 1 else 0.5 * (path[-1] - path[-2] - 1.0)
    return VarianceLedger(m=m, v_m=v_cum(s, m), sigma2_m=float(path[-1]), r_m=float(r))


def var_double_sum(s, n: int) -> float:
    """n + 2 sum_{i<j<=n} e_{i,j}, quadratic in n"""
    factors = _factors(s, 2, n)  # factors[k-2] = 1 - 2 p_k
    total = float(n)
    for i in range(1, n):
        total += 2.0 * float(np.cumprod(factors[i - 1:]).sum())
    return total


def martingale_diag(s, n: int) -> MartingaleDiagnostics:
    """a_n, v_n and the ratio a_n^2 / v_n of the martingale approximation"""
    table = v_table(s, n)
    a_n = float(table.a[n])
    v_n = float(table.v[n])
    return MartingaleDiagnostics(
        n=n,
        a_n=a_n,
        v_n=v_n,
        ratio=a_n**2 / v_n if v_n > 0 else None,
        gap=1.0 - a_n,
        bound=float(table.bound[n]),
    )


def martingale_identity_residual(s, n: int, tol: float = A_TOL):
    """|a_{n+1} e_{n,n+1} - (a_n - 1)| from two independent series, with their combined bound"""
    lower = a_coeff(s, n, tol)
    upper = a_coeff(s, n + 1, tol)
    factor = 1.0 - 2.0 * s.prob(n + 1)
    residual = abs(upper.a_n * factor - (lower.a_n - 1.0))
    allowed = lower.truncation_error_bound + abs(factor) * upper.truncation_error_bound
    allowed += 1e-12 * max(1.0, abs(lower.a_n))
    return residual, allowed
