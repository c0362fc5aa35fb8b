"""
Sampling of coin-turning walks and exact small-n distributions
"""
import logging
import math
from typing import Optional, Sequence

import numpy as np

from ..errors import HorizonExceeded, InvalidParameters, TooLarge
from ..models.paths import ExactDist, RescaledPath, WalkPath
from . import exact_service
from .ensemble import run_trials, seeded_rng

logger = logging.getLogger("cointurn.simulate")

BRUTE_FORCE_CAP = 22
DP_CAP = 2 * 10**4
SPARSE_HAZARD_RATIO = 1.0 / 8.0


def _check_sign(y1):
    if y1 is not None and y1 not in (-1, 1):
        raise InvalidParameters(f"y1 must be +1, -1 or absent, got {y1}")


def _draw_first(rng, y1) -> int:
    if y1 is not None:
        return int(y1)
    return 1 if rng.random() < 0.5 else -1


def _walk_from_rng(s, n: int, rng, y1=None, seed: Optional[int] = None) -> WalkPath:
    first = _draw_first(rng, y1)
    turns = (rng.random(n - 1) < s.span(2, n)).astype(np.int8)
    parity = np.cumsum(turns) % 2
    signs = np.concatenate(([first], first * (1 - 2 * parity))).astype(np.int8)
    sums = np.concatenate(([0], np.cumsum(signs, dtype=np.int64)))
    return WalkPath(n=n, turns=turns, signs=signs, sums=sums, seed=seed)


def sample_walk(s, n: int, seed: int, y1: Optional[int] = None) -> WalkPath:
    """One walk with independent W_k ~ Bernoulli(p_k), deterministic given (seed, s, n, y1)"""
    if n < 1:
        raise InvalidParameters(f"n must be >= 1, got {n}")
    _check_sign(y1)
    return _walk_from_rng(s, n, seeded_rng(seed), y1, seed)


class TurnSampler:
    """
    Samples the set of turn steps in a window lo..hi

    Dense mode draws one uniform per step. Sparse mode uses the cumulative
    hazard H = -sum log(1 - p_k): step k turns iff a unit-rate Poisson process
    on [0, H_hi] has a point in step k's cell, which only costs draws in
    proportion to H. Steps with p_k = 1 always turn.
    """

    def __init__(self, s, lo: int, hi: int, method: str = "auto"):
        self.lo = lo
        self.hi = hi
        self.p = s.span(lo, hi)
        certain = self.p >= 1.0
        self.certain = np.flatnonzero(certain) + lo
        with np.errstate(divide="ignore"):
            hazard = np.where(certain, 0.0, -np.log1p(-np.where(certain, 0.0, self.p)))
        self.cum_hazard = np.cumsum(hazard)
        total = float(self.cum_hazard[-1]) if len(hazard) else 0.0
        if method == "auto":
            method = "sparse" if total < SPARSE_HAZARD_RATIO * max(hi - lo + 1, 1) else "dense"
        self.method = method
        self.total_hazard = total

    def sample(self, rng) -> np.ndarray:
        """Sorted unique turn steps"""
        if self.hi < self.lo:
            return np.empty(0, dtype=np.int64)
        if self.method == "dense":
            return np.flatnonzero(rng.random(len(self.p)) < self.p) + self.lo
        count = rng.poisson(self.total_hazard)
        points = rng.uniform(0.0, self.total_hazard, size=count)
        cells = np.unique(np.searchsorted(self.cum_hazard, points, side="left"))
        steps = cells + self.lo
        if len(self.certain):
            steps = np.union1d(steps, self.certain)
        return steps


def endpoint_from_turns(first: int, turn_steps: np.ndarray, n: int):
    """(S_n, Y_n) from Y_1 and the sorted steps 2..n at which the coin turned"""
    bounds = np.concatenate(([1], turn_steps, [n + 1]))
    lengths = np.diff(bounds)
    alternating = np.where(np.arange(len(lengths)) % 2 == 0, 1, -1)
    s_n = first * int(np.dot(lengths, alternating))
    y_n = first if len(turn_steps) % 2 == 0 else -first
    return s_n, y_n


class _EndpointTask:
    def __init__(self, sampler: TurnSampler, n: int, y1):
        self.sampler = sampler
        self.n = n
        self.y1 = y1

    def __call__(self, trial, rng):
        first = _draw_first(rng, self.y1)
        return endpoint_from_turns(first, self.sampler.sample(rng), self.n)


def sample_endpoints(s, n: int, trials: int, seed: int, y1: Optional[int] = None,
                     workers: int = 1, method: str = "auto"):
    """Ensemble of (S_n, Y_n) as two integer arrays"""
    if n < 1:
        raise InvalidParameters(f"n must be >= 1, got {n}")
    _check_sign(y1)
    sampler = TurnSampler(s, 2, n, method)
    logger.info(f"Sampling {trials} endpoints at n={n} with the {sampler.method} turn sampler")
    rows = run_trials(_EndpointTask(sampler, n, y1), trials, seed, workers)
    if not rows:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    values = np.array(rows, dtype=np.int64)
    return values[:, 0], values[:, 1]


def _exact_dist_from_states(n, s_values, y_values, weights) -> ExactDist:
    plus = np.zeros(2 * n + 1)
    minus = np.zeros(2 * n + 1)
    up = y_values > 0
    np.add.at(plus, s_values[up] + n, weights[up])
    np.add.at(minus, s_values[~up] + n, weights[~up])
    return ExactDist(n=n, plus=plus, minus=minus)


def _starts(y1):
    return [(y1, 1.0)] if y1 is not None else [(1, 0.5), (-1, 0.5)]


def brute_force_dist(s, n: int, y1: Optional[int] = None) -> ExactDist:
    """Exact law of (S_n, Y_n) by enumerating all 2^(n-1) turn patterns"""
    if n < 1:
        raise InvalidParameters(f"n must be >= 1, got {n}")
    if n > BRUTE_FORCE_CAP:
        raise TooLarge(f"brute force enumeration is capped at n={BRUTE_FORCE_CAP}, got {n}")
    _check_sign(y1)
    p = s.span(2, n)
    pieces = []
    for first, weight in _starts(y1):
        sums = np.array([first], dtype=np.int64)
        signs = np.array([first], dtype=np.int64)
        probs = np.array([weight])
        for p_k in p:
            turned = -signs
            signs = np.concatenate((signs, turned))
            probs = np.concatenate((probs * (1.0 - p_k), probs * p_k))
            sums = np.concatenate((sums, sums)) + signs
        pieces.append((sums, signs, probs))
    s_values = np.concatenate([piece[0] for piece in pieces])
    y_values = np.concatenate([piece[1] for piece in pieces])
    weights = np.concatenate([piece[2] for piece in pieces])
    return _exact_dist_from_states(n, s_values, y_values, weights)


def dp_dist(s, n: int, y1: Optional[int] = None) -> ExactDist:
    """Exact law of (S_n, Y_n) by forward dynamic programming on (S_k, Y_k)"""
    if n < 1:
        raise InvalidParameters(f"n must be >= 1, got {n}")
    if n > DP_CAP:
        raise TooLarge(f"dynamic programming is capped at n={DP_CAP}, got {n}")
    _check_sign(y1)
    plus = np.zeros(2 * n + 1)
    minus = np.zeros(2 * n + 1)
    for first, weight in _starts(y1):
        if first > 0:
            plus[n + 1] += weight
        else:
            minus[n - 1] += weight

    p = s.span(2, n)
    for k, p_k in enumerate(p, start=2):
        # after step k-1 mass sits on |S| <= k-1
        lo, hi = n - (k - 1), n + (k - 1)
        stay_plus = plus[lo:hi + 1] * (1.0 - p_k)
        stay_minus = minus[lo:hi + 1] * (1.0 - p_k)
        to_minus = plus[lo:hi + 1] * p_k
        to_plus = minus[lo:hi + 1] * p_k
        plus[lo:hi + 1] = 0.0
        minus[lo:hi + 1] = 0.0
        plus[lo + 1:hi + 2] += stay_plus + to_plus
        minus[lo - 1:hi] += stay_minus + to_minus
    return ExactDist(n=n, plus=plus, minus=minus)


def rescaled_path(w: WalkPath, s, mode: str, grid: Sequence[float],
                  scale: Optional[int] = None) -> RescaledPath:
    """
    Rescale a sampled walk

    cooling: S_{nt}/n with linear interpolation at non-integer nt.
    diffusive: S_{Z(nt)}/sqrt(n) with the variance time-change Z.

    Raises:
        HorizonExceeded: the grid needs steps beyond the sampled walk
    """
    t = np.asarray(grid, dtype=np.float64)
    if np.any(t < 0):
        raise InvalidParameters("grid times must be >= 0")
    n = scale or w.n
    if mode == "cooling":
        if t.max(initial=0.0) * n > w.n:
            raise HorizonExceeded(f"grid reaches step {t.max() * n:g} beyond walk length {w.n}")
        return RescaledPath(mode=mode, scale=n, t=t, values=w.value_at(n * t) / n)
    if mode == "diffusive":
        indices = np.array([exact_service.time_change(s, n * x) if x > 0 else 0 for x in t], dtype=np.int64)
        if indices.max(initial=0) > w.n:
            raise HorizonExceeded(f"time-change reaches step {indices.max()} beyond walk length {w.n}")
        return RescaledPath(mode=mode, scale=n, t=t, values=w.sums[indices] / math.sqrt(n), indices=indices)
    raise InvalidParameters(f"unknown rescaling mode '{mode}'")


def walk_length_for(s, n: int, mode: str, grid: Sequence[float]) -> int:
    """Steps a walk needs so that rescaled_path covers the grid at scale n"""
    top = float(np.max(grid, initial=0.0))
    if top <= 0:
        return n
    if mode == "cooling":
        return max(n, math.ceil(n * top))
    return max(n, exact_service.time_change(s, n * top))


class _PathTask:
    def __init__(self, s, n, length, grid, mode, y1):
        self.s = s
        self.n = n
        self.length = length
        self.grid = grid
        self.mode = mode
        self.y1 = y1

    def __call__(self, trial, rng):
        w = _walk_from_rng(self.s, self.length, rng, self.y1)
        return rescaled_path(w, self.s, self.mode, self.grid, scale=self.n).values


def sample_paths(s, n: int, trials: int, seed: int, grid: Sequence[float], mode: str,
                 y1: Optional[int] = None, workers: int = 1) -> np.ndarray:
    """Rescaled walks on a common grid, one row per trial"""
    if n < 1:
        raise InvalidParameters(f"n must be >= 1, got {n}")
    _check_sign(y1)
    grid = np.asarray(grid, dtype=np.float64)
    length = walk_length_for(s, n, mode, grid)
    logger.info(f"Sampling {trials} {mode} paths of {length} steps at scale {n}")
    rows = run_trials(_PathTask(s, n, length, grid, mode, y1), trials, seed, workers)
    return np.array(rows, dtype=np.float64).reshape(trials, len(grid))


def _xi_squared(w: WalkPath, p: np.ndarray, upto: int) -> np.ndarray:
    """xi_i^2 for i <= upto, with xi_1 = Y_1 + 2 p_1 - 1"""
    first = (w.signs[0] + 2.0 * p[0] - 1.0) ** 2
    turned = w.turns[:upto - 1].astype(bool)
    rest = np.where(turned, (2.0 * (1.0 - p[1:upto])) ** 2, (2.0 * p[1:upto]) ** 2)
    return np.concatenate(([first], rest))


def lambda_sq(w: WalkPath, s, n: int) -> float:
    """Lambda_n^2 = sum_{i<=n} a_i^2 xi_i^2 along the sampled path"""
    if not 1 <= n <= w.n:
        raise HorizonExceeded(f"n={n} outside the sampled walk of length {w.n}")
    table = exact_service.v_table(s, n)
    p = s.span(1, n)
    return float(np.dot(table.a[1:n + 1] ** 2, _xi_squared(w, p, n)))


class _LambdaTask:
    def __init__(self, p: np.ndarray, a_sq: np.ndarray):
        self.p = p
        self.a_sq = a_sq
        # xi_i^2 without and with a turn, i >= 2
        self.base = float(np.dot(a_sq[1:], (2.0 * p[1:]) ** 2))
        self.jump = a_sq[1:] * ((2.0 * (1.0 - p[1:])) ** 2 - (2.0 * p[1:]) ** 2)

    def __call__(self, trial, rng):
        first = 1 if rng.random() < 0.5 else -1
        turned = rng.random(len(self.p) - 1) < self.p[1:]
        head = self.a_sq[0] * (first + 2.0 * self.p[0] - 1.0) ** 2
        return head + self.base + float(self.jump[turned].sum())


def lambda_ratio(s, n: int, trials: int, seed: int, workers: int = 1) -> float:
    """Ensemble mean of Lambda_n^2 divided by v_n"""
    table = exact_service.v_table(s, n)
    task = _LambdaTask(s.span(1, n), table.a[1:n + 1] ** 2)
    values = np.array(run_trials(task, trials, seed, workers))
    return float(values.mean() / table.v[n])


def _drogin_sup(s, upto: int, table) -> float:
    """max_i X_i^2 = max_i 4 a_i^2 max(p_i, q_i)^2 over i <= upto"""
    p = s.span(1, upto)
    return float(np.max(4.0 * table.a[1:upto + 1] ** 2 * np.maximum(p, 1.0 - p) ** 2))


class _DroginTask:
    def __init__(self, p, a_sq, threshold, scale):
        self.p = p
        self.a_sq = a_sq
        self.threshold = threshold
        self.scale = scale

    def __call__(self, trial, rng):
        first = 1 if rng.random() < 0.5 else -1
        turned = rng.random(len(self.p) - 1) < self.p[1:]
        xi_sq = np.concatenate((
            [(first + 2.0 * self.p[0] - 1.0) ** 2],
            np.where(turned, (2.0 * (1.0 - self.p[1:])) ** 2, (2.0 * self.p[1:]) ** 2),
        ))
        x_sq = self.a_sq * xi_sq
        return float(x_sq[x_sq > self.threshold].sum() / self.scale)


def drogin_check(s, n: int, eps: float, trials: int, seed: int, workers: int = 1) -> float:
    """
    (1/n) E sum_{i<=Z(n)} X_i^2 1{X_i^2 > n eps}, X_i = a_i xi_i Y_{i-1}

    Exactly 0.0 when no X_i^2 can exceed n eps; otherwise a Monte Carlo mean.
    On the heating side 0 < a_i <= 1 past the side onset, so X_i^2 <= 4 there
    and Z(n) is never needed when 4 <= n eps.
    """
    if eps <= 0:
        raise InvalidParameters("eps must be positive")
    threshold = n * eps
    if s.eventual_side() in ("high", "half"):
        onset = s.side_onset()
        table = exact_service.v_table(s, onset)
        head = _drogin_sup(s, onset, table)
        if max(head, 4.0) <= threshold:
            return 0.0

    horizon = exact_service.time_change(s, float(n))
    table = exact_service.v_table(s, horizon)
    if _drogin_sup(s, horizon, table) <= threshold:
        logger.info(f"Drogin sum vanishes identically up to Z({n}) = {horizon}")
        return 0.0

    task = _DroginTask(s.span(1, horizon), table.a[1:horizon + 1] ** 2, threshold, float(n))
    return float(np.mean(run_trials(task, trials, seed, workers)))


def zero_hits(w: WalkPath) -> int:
    """Number of k >= 1 with S_k = 0"""
    return int(np.count_nonzero(w.sums[1:] == 0))


class _ZeroHitTask:
    def __init__(self, s, n):
        self.s = s
        self.n = n

    def __call__(self, trial, rng):
        return zero_hits(_walk_from_rng(self.s, self.n, rng))


def zero_hit_counts(s, n: int, trials: int, seed: int, workers: int = 1) -> np.ndarray:
    """zero_hits for an ensemble of walks of length n"""
    return np.array(run_trials(_ZeroHitTask(s, n), trials, seed, workers), dtype=np.int64)


def wlln_exceedance(s, n: int, threshold: float, trials: int, seed: int, workers: int = 1) -> float:
    """Empirical P(|S_n / n| > threshold)"""
    sums, _ = sample_endpoints(s, n, trials, seed, workers=workers)
    return float(np.mean(np.abs(sums / n) > threshold))
