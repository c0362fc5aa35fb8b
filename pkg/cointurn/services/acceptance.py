"""
Acceptance suite for the verify command

Each criterion runs with a seed derived from the master seed and its id and
compares fixed statistics against fixed thresholds. The report carries no
timings, so the same master seed always produces the same JSON.
"""
import logging
import math
from typing import Callable, Dict, List, Optional

import numpy as np

from .. import __version__
from ..errors import InvalidParameters
from ..models.experiment import CriterionResult, VerificationReport
from ..models.schedule import (
    Constant,
    CriticalCooling,
    CustomTable,
    EvenOdd,
    FactorialCounterexample,
    HarmonicHeating,
    PowerCooling,
    PowerHeating,
    UniformFootnote,
)
from . import exact_service, simulation_service, stats_service, zigzag_service
from .ensemble import derive_seed, seeded_rng

logger = logging.getLogger("cointurn.acceptance")


class Criterion:
    def __init__(self, id: int, title: str, claim: str, run: Callable, slow: bool = False):
        self.id = id
        self.title = title
        self.claim = claim
        self.run = run
        self.slow = slow


CRITERIA: Dict[int, Criterion] = {}


def criterion(id: int, title: str, claim: str, slow: bool = False):
    """Register a check returning (passed, statistics, thresholds)"""
    def register(func):
        CRITERIA[id] = Criterion(id, title, claim, func, slow)
        return func
    return register


def _geometric_table(base: float, last: int, high: bool = False) -> CustomTable:
    """p_n = base^-n (or 1 - base^-n) for 2 <= n <= last, then 0 (or 1)"""
    table = {n: (1.0 - base ** -n) if high else base ** -n for n in range(2, last + 1)}
    return CustomTable(table=table, tail="constant:1" if high else "constant:0")


def oracle_schedules():
    return [
        Constant(c=0.3),
        CriticalCooling(c=1.0),
        HarmonicHeating(c=1.0),
        PowerCooling(a=1.0, gamma=0.5),
        CustomTable(table={2: 0.1, 3: 0.2, 4: 0.9, 5: 0.5, 6: 0.05, 7: 0.7, 8: 0.35}, tail="constant:0.15"),
    ]


@criterion(1, "oracle equivalence", "brute force and dynamic programming laws agree; their variance matches the row-sum recursion")
def _oracle_equivalence(seed):
    worst_tv = 0.0
    worst_var = 0.0
    for s in oracle_schedules():
        for n in range(1, 17):
            brute = simulation_service.brute_force_dist(s, n)
            dp = simulation_service.dp_dist(s, n)
            worst_tv = max(worst_tv, brute.tv(dp))
            worst_var = max(worst_var, abs(dp.variance() - exact_service.variance_exact(s, n)))
    passed = worst_tv < 1e-12 and worst_var < 1e-10
    return passed, {"max_tv": worst_tv, "max_variance_gap": worst_var}, {"max_tv": "< 1e-12", "max_variance_gap": "< 1e-10"}


@criterion(2, "discrete uniform law", "p_n = 1/(n+1) makes S_n uniform on its lattice")
def _uniform_footnote(seed):
    s = UniformFootnote()
    errors = {}
    for n in (8, 12):
        _, probs = simulation_service.brute_force_dist(s, n).marginal()
        errors[f"max_error_n{n}"] = float(np.max(np.abs(probs - 1.0 / (n + 1))))
    passed = all(value < 1e-12 for value in errors.values())
    return passed, errors, {key: "< 1e-12" for key in errors}


@criterion(3, "time-homogeneous variance", "constant p = c gives S_n / sqrt(n) -> Normal(0, (1-c)/c)", slow=True)
def _time_homogeneous(seed, trials=10**5):
    s = Constant(c=0.3)
    n = 10**4
    sigma2 = 7.0 / 3.0
    ratio = exact_service.variance_exact(s, n) / n / sigma2
    sums, _ = simulation_service.sample_endpoints(s, n, trials, seed)
    ks = stats_service.ks_one(sums / math.sqrt(n), lambda x: stats_service.normal_cdf(x, sd=math.sqrt(sigma2)))
    passed = 0.98 <= ratio <= 1.02 and ks < 0.015
    return passed, {"variance_ratio": ratio, "ks_normal": ks}, {"variance_ratio": "in [0.98, 1.02]", "ks_normal": "< 0.015"}


@criterion(4, "critical cooling marginal", "p_n = a/n gives (1 + S_N/N)/2 -> Beta(a, a)")
def _critical_marginal(seed):
    stats = {}
    size = 4000
    for a in (1.0, 2.0):
        support, probs = simulation_service.dp_dist(CriticalCooling(c=a), size).marginal()
        stats[f"ks_beta_a{a:g}"] = stats_service.ks_discrete(
            (1.0 + support / size) / 2.0, probs, lambda x, a=a: stats_service.beta_cdf(a, a, x)
        )
    passed = all(value < 0.01 for value in stats.values())
    return passed, stats, {key: "< 0.01" for key in stats}


@criterion(5, "turning points are Poisson", "turns of the critical walk in (an, bn] -> Poisson(c ln(b/a))", slow=True)
def _ppp_counts(seed, trials=10**5):
    counts = zigzag_service.walk_turn_counts(10**4, 1.0, math.e, trials, derive_seed(seed, 1), c=1.0)
    tv = stats_service.tv_to_poisson(counts, 1.0)
    split = zigzag_service.ppp_window_counts(2.0, 1.0, 0.2, [(0.25, 0.5), (0.5, 1.0)], trials, derive_seed(seed, 2))
    window = split.sum(axis=1)
    expected = 2.0 * math.log(4.0)
    mean_error = abs(window.mean() / expected - 1.0)
    dispersion = float(window.var(ddof=1) / window.mean())
    disjoint = stats_service.correlation(split[:, 0], split[:, 1])
    passed = tv < 0.01 and mean_error < 0.01 and 0.97 <= dispersion <= 1.03 and abs(disjoint) < 0.02
    return passed, {
        "tv_walk_poisson": tv,
        "p_zero_turns": float(np.mean(counts == 0)),
        "ppp_mean_relative_error": mean_error,
        "ppp_dispersion": dispersion,
        "ppp_disjoint_correlation": disjoint,
    }, {
        "tv_walk_poisson": "< 0.01",
        "ppp_mean_relative_error": "< 0.01",
        "ppp_dispersion": "in [0.97, 1.03]",
        "ppp_disjoint_correlation": "|x| < 0.02",
    }


@criterion(6, "zigzag marginal", "(1 + X_t/t)/2 is Beta(c, c) for the zigzag process", slow=True)
def _zigzag_marginal(seed, trials=10**5):
    stats = {}
    t = 0.5
    for index, c in enumerate((0.5, 1.0, 2.0)):
        values, _, _ = zigzag_service.zigzag_ensemble(
            c, 1.0, 1e-4, trials, derive_seed(seed, index), [t], with_zeros=False
        )
        mapped = np.clip((1.0 + values[:, 0] / t) / 2.0, 0.0, 1.0)
        stats[f"ks_beta_c{c:g}"] = stats_service.ks_one(mapped, lambda x, c=c: stats_service.beta_cdf(c, c, x))
    passed = all(value < 0.01 for value in stats.values())
    return passed, stats, {key: "< 0.01" for key in stats}


@criterion(7, "walk against zigzag", "the rescaled critical walk converges to the zigzag process", slow=True)
def _walk_vs_zigzag(seed, trials=4 * 10**4):
    n = 10**4
    sums, _ = simulation_service.sample_endpoints(CriticalCooling(c=1.0), n, trials, derive_seed(seed, 1))
    values, _, _ = zigzag_service.zigzag_ensemble(1.0, 1.0, 1e-4, trials, derive_seed(seed, 2), [1.0], with_zeros=False)
    ks = stats_service.ks_two(sums / n, values[:, 0])
    return ks < 0.02, {"ks_two_sample": ks, "samples_each": trials}, {"ks_two_sample": "< 0.02"}


@criterion(8, "heating coefficients", "harmonic heating: a_n -> 1/2, v_m ~ c ln m, Z(x) ~ e^(x/c)")
def _heating_coefficients(seed):
    s = HarmonicHeating(c=1.0, first=0.0)
    a = exact_service.a_coeff(s, 10**4)
    v_ratio = exact_service.v_cum(s, 10**5) / math.log(10**5)
    x = math.log(10**4)
    z_ratio = exact_service.time_change(s, x) / math.exp(x)
    passed = abs(a.a_n - 0.5) < 0.02 and 0.9 <= v_ratio <= 1.1 and 0.8 <= z_ratio <= 1.25
    return passed, {"a_n_minus_half": a.a_n - 0.5, "v_over_log_m": v_ratio, "z_over_exp_x": z_ratio}, {
        "a_n_minus_half": "abs < 0.02",
        "v_over_log_m": "in [0.9, 1.1]",
        "z_over_exp_x": "in [0.8, 1.25]",
    }


@criterion(9, "heating power law", "p_n = 1 - c/(2 n^g) gives Var(S_n) ~ c n^(1-g) / (2(1-g))")
def _heating_power(seed):
    c, gamma, n = 1.0, 0.5, 10**5
    s = PowerHeating(c=c, gamma=gamma)
    ratio = exact_service.variance_exact(s, n) * 2.0 * (1.0 - gamma) / (c * n ** (1.0 - gamma))
    return 0.9 <= ratio <= 1.1, {"variance_ratio": ratio}, {"variance_ratio": "in [0.9, 1.1]"}


@criterion(10, "subcritical cooling", "p_n = a/n^g gives Var(S_n) ~ n^(1+g)/(a(1+g)) and S_n/n -> 0", slow=True)
def _subcritical(seed, trials=10**4):
    a, gamma = 1.0, 0.5
    s = PowerCooling(a=a, gamma=gamma)
    n = 10**5
    ratio = exact_service.variance_exact(s, n) / (n ** (1.0 + gamma) / (a * (1.0 + gamma)))
    exceed_small = simulation_service.wlln_exceedance(s, n, 0.1, trials, derive_seed(seed, 1))
    exceed = simulation_service.wlln_exceedance(s, 10**6, 0.1, trials, derive_seed(seed, 2))
    passed = 0.9 <= ratio <= 1.1 and exceed < 0.01
    return passed, {
        "variance_ratio": ratio,
        "exceedance_n1e5": exceed_small,
        "exceedance_n1e6": exceed,
    }, {"variance_ratio": "in [0.9, 1.1]", "exceedance_n1e6": "< 0.01"}


def _identity_pool():
    return [
        Constant(c=0.3),
        Constant(c=0.7),
        HarmonicHeating(c=1.0),
        PowerHeating(c=1.0, gamma=0.5),
        PowerCooling(a=1.0, gamma=0.5),
        CriticalCooling(c=1.5),
        UniformFootnote(),
    ]


@criterion(11, "martingale identities", "a_{n+1} e_{n,n+1} = a_n - 1; v increments are 4 a^2 p q; factorial schedule breaks a_n = o(sqrt(v_n))")
def _martingale_identities(seed):
    rng = seeded_rng(seed)
    pool = _identity_pool()
    worst_excess = 0.0
    failures = 0
    for _ in range(100):
        s = pool[int(rng.integers(len(pool)))]
        n = int(rng.integers(1, 500))
        residual, allowed = exact_service.martingale_identity_residual(s, n)
        if residual > allowed:
            failures += 1
        worst_excess = max(worst_excess, residual - allowed)

    worst_increment = 0.0
    for s in (Constant(c=0.3), PowerCooling(a=1.0, gamma=0.5), HarmonicHeating(c=1.0)):
        table = exact_service.v_table(s, 600)
        for n in (10, 100, 500):
            p = s.prob(n + 1)
            coeff = exact_service.a_coeff(s, n + 1)
            expected = 4.0 * coeff.a_n**2 * p * (1.0 - p)
            slack = 8.0 * abs(coeff.a_n) * p * (1.0 - p) * (table.bound[n + 1] + coeff.truncation_error_bound)
            gap = abs(table.v[n + 1] - table.v[n] - expected) - slack - 1e-9 * max(1.0, expected)
            worst_increment = max(worst_increment, gap)

    factorial = FactorialCounterexample()
    ratio_small = exact_service.martingale_diag(factorial, math.factorial(5)).ratio
    ratio_large = exact_service.martingale_diag(factorial, math.factorial(6)).ratio
    passed = failures == 0 and worst_increment <= 0.0 and ratio_large > ratio_small
    return passed, {
        "identity_failures": failures,
        "identity_worst_excess": worst_excess,
        "increment_worst_excess": worst_increment,
        "ratio_at_5_factorial": ratio_small,
        "ratio_at_6_factorial": ratio_large,
    }, {
        "identity_failures": "== 0",
        "increment_worst_excess": "<= 0",
        "ratio_at_6_factorial": "> ratio_at_5_factorial",
    }


def trichotomy_schedules():
    return {
        "half": Constant(c=0.3),
        "rho-limit": _geometric_table(4.0, 40),
        "no-limit": EvenOdd(even_rule=_geometric_table(4.0, 40, high=True), odd_rule=_geometric_table(4.0, 40)),
    }


@criterion(12, "ergodicity trichotomy", "P(Y_n = 1 | Y_1) tends to 1/2, to (1 + k rho)/2, or has no limit")
def _trichotomy(seed):
    n = 1000
    stats = {}
    passed = True
    for expected, s in trichotomy_schedules().items():
        verdict = exact_service.ergodic_verdict(s, n)
        stats[f"case_{expected}"] = verdict.case
        passed &= verdict.case == expected
        if verdict.case != "no-limit":
            gap = abs(exact_service.head_prob(s, n, 1) - verdict.limit_plus)
            stats[f"gap_{expected}"] = gap
            stats[f"bound_{expected}"] = verdict.tv_bound
            passed &= gap <= 1.01 * verdict.tv_bound
    return passed, stats, {"cases": "half, rho-limit, no-limit", "gaps": "<= 1.01 * bound"}


@criterion(13, "Drogin condition", "the truncated second moment sum vanishes for bounded coefficients")
def _drogin(seed):
    n = 10**4
    checks = {
        "constant_half": (Constant(c=0.5), 0.01),
        "harmonic_heating": (HarmonicHeating(c=1.0), 0.01),
        "power_cooling": (PowerCooling(a=1.0, gamma=0.5), 0.1),
    }
    stats = {}
    for name, (s, eps) in checks.items():
        stats[name] = simulation_service.drogin_check(s, n, eps, 200, derive_seed(seed, len(stats)))
    passed = all(value == 0.0 for value in stats.values())
    return passed, stats, {
        "constant_half": "== 0 at eps 0.01",
        "harmonic_heating": "== 0 at eps 0.01",
        "power_cooling": "== 0 at eps 0.1",
    }


@criterion(14, "determinism", "the same master seed gives byte-identical reports")
def _determinism(seed):
    first = run_suite(seed, [1, 2, 12]).model_dump_json()
    second = run_suite(seed, [1, 2, 12]).model_dump_json()
    return first == second, {"identical": str(first == second)}, {"identical": "True"}


def evaluate_criterion(entry: Criterion, master_seed: int) -> CriterionResult:
    seed = derive_seed(master_seed, entry.id)
    try:
        passed, statistics, thresholds = entry.run(seed)
        error = None
    except Exception as e:
        logger.exception(f"Criterion {entry.id} ({entry.title}) raised: {e}")
        passed, statistics, thresholds, error = False, {}, {}, f"{type(e).__name__}: {e}"
    logger.info(f"Criterion {entry.id} ({entry.title}): {'PASS' if passed else 'FAIL'}")
    return CriterionResult(
        id=entry.id,
        title=entry.title,
        claim=entry.claim,
        passed=bool(passed),
        statistics={key: _plain(value) for key, value in statistics.items()},
        thresholds=thresholds,
        error=error,
    )


def _plain(value):
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    return value


def run_suite(master_seed: int, selected: Optional[List[int]] = None, include_slow: bool = True) -> VerificationReport:
    """Run the selected criteria (all by default) in id order"""
    ids = sorted(selected) if selected else sorted(CRITERIA)
    unknown = [i for i in ids if i not in CRITERIA]
    if unknown:
        raise InvalidParameters(f"unknown criteria: {unknown}")
    results = []
    for criterion_id in ids:
        entry = CRITERIA[criterion_id]
        if entry.slow and not include_slow:
            logger.info(f"Skipping slow criterion {entry.id}")
            continue
        results.append(evaluate_criterion(entry, master_seed))
    return VerificationReport(
        version=__version__,
        master_seed=master_seed,
        criteria=results,
        all_passed=all(result.passed for result in results),
    )
