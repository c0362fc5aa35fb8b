"""
Zigzag limit process

Turning points form a Poisson point process with intensity c/x. Under
u = ln x the process is homogeneous with rate c, so atoms are generated
downwards from the horizon with exponential log-gaps and the sampler stops
at the truncation level epsilon.
"""
import logging
import math
from typing import Optional, Sequence

import numpy as np

from ..errors import AnchorOutOfRange, InvalidParameters
from ..models.paths import PointMeasure, ZigzagPath
from ..models.schedule import CriticalCooling
from .ensemble import run_trials, seeded_rng
from .simulation_service import TurnSampler

logger = logging.getLogger("cointurn.zigzag")


def _check_ppp_parameters(c: float, horizon: float, eps: float):
    if c <= 0:
        raise InvalidParameters(f"intensity c must be positive, got {c}")
    if not 0 < eps < horizon:
        raise InvalidParameters(f"need 0 < eps < T, got eps={eps}, T={horizon}")


def sample_atoms(c: float, horizon: float, eps: float, rng) -> np.ndarray:
    """Sorted atoms x_k = T exp(-(G_1 + ... + G_k)) > eps, G_i ~ Exp(mean 1/c)"""
    depth = math.log(horizon / eps)
    batch = max(16, int(1.5 * c * depth) + 8)
    logs = []
    level = 0.0
    while level <= depth:
        steps = level + np.cumsum(rng.exponential(1.0 / c, size=batch))
        logs.append(steps)
        level = float(steps[-1])
    logs = np.concatenate(logs)
    logs = logs[logs < depth]
    return np.sort(horizon * np.exp(-logs))


def sample_ppp(c: float, horizon: float, eps: float, seed: int) -> PointMeasure:
    _check_ppp_parameters(c, horizon, eps)
    atoms = sample_atoms(c, horizon, eps, seeded_rng(seed))
    return PointMeasure(atoms=atoms, epsilon=eps, horizon=horizon, intensity=c, seed=seed)


def _coloring(pm: PointMeasure, anchor: float):
    """Breakpoints, values and slopes of Phi_anchor on [epsilon, T]

    The piece containing the anchor (an atom at the anchor starts it) has
    slope +1; slopes alternate across every atom in both directions.
    """
    if not pm.epsilon < anchor <= pm.horizon:
        raise AnchorOutOfRange(f"anchor {anchor} outside ({pm.epsilon}, {pm.horizon}]")
    return _path_arrays(pm.atoms, pm.epsilon, pm.horizon, anchor)


def _path_arrays(atoms, eps, horizon, anchor):
    breakpoints = np.concatenate(([eps], atoms, [horizon]))
    pieces = len(atoms) + 1
    anchor_piece = int(np.searchsorted(atoms, anchor, side="right"))
    slopes = np.where((np.arange(pieces) - anchor_piece) % 2 == 0, 1.0, -1.0)
    values = np.concatenate(([0.0], np.cumsum(slopes * np.diff(breakpoints))))
    return breakpoints, values, slopes


def _evaluate(breakpoints, values, slopes, r):
    r = np.asarray(r, dtype=np.float64)
    piece = np.clip(np.searchsorted(breakpoints, r, side="right") - 1, 0, len(slopes) - 1)
    result = values[piece] + slopes[piece] * (r - breakpoints[piece])
    return np.where(r <= breakpoints[0], 0.0, result)


def phi(pm: PointMeasure, t: float, r):
    """
    Phi_t(r): signed length of (0, r] under the coloring anchored at t

    The unresolved mass in (0, epsilon] counts as zero, which keeps the
    error against the untruncated process within epsilon.
    """
    if np.any(np.asarray(r) < 0) or np.any(np.asarray(r) > pm.horizon):
        raise InvalidParameters(f"r must lie in [0, {pm.horizon}]")
    breakpoints, values, slopes = _coloring(pm, t)
    result = _evaluate(breakpoints, values, slopes, r)
    return float(result) if np.ndim(result) == 0 else result


def zigzag_from_measure(pm: PointMeasure, w: int, anchor: Optional[float] = None) -> ZigzagPath:
    if anchor is None:
        anchor = float(pm.atoms[-1]) if len(pm.atoms) else pm.horizon
    breakpoints, values, slopes = _coloring(pm, anchor)
    return ZigzagPath(pm=pm, w=w, anchor=anchor, breakpoints=breakpoints, values=values, slopes=slopes)


def _draw_zigzag(c, horizon, eps, rng, seed=None) -> ZigzagPath:
    w = 1 if rng.random() < 0.5 else -1
    atoms = sample_atoms(c, horizon, eps, rng)
    pm = PointMeasure(atoms=atoms, epsilon=eps, horizon=horizon, intensity=c, seed=seed)
    return zigzag_from_measure(pm, w)


def sample_zigzag(c: float, horizon: float, eps: float, seed: int) -> ZigzagPath:
    """Zigzag path anchored at the largest atom with an independent fair sign W"""
    _check_ppp_parameters(c, horizon, eps)
    return _draw_zigzag(c, horizon, eps, seeded_rng(seed), seed)


def evaluate(z: ZigzagPath, t):
    """X_t = W Phi_{t*}(t); error at most epsilon for t >= epsilon and at most t below"""
    if np.any(np.asarray(t) < 0) or np.any(np.asarray(t) > z.pm.horizon):
        raise InvalidParameters(f"t must lie in [0, {z.pm.horizon}]")
    result = z.w * _evaluate(z.breakpoints, z.values, z.slopes, t)
    return float(result) if np.ndim(result) == 0 else result


def _sign_changes(values: np.ndarray) -> int:
    values = values[values != 0.0]
    return int(np.count_nonzero(np.sign(values[1:]) != np.sign(values[:-1])))


def zeros(z: ZigzagPath, t0: float, t1: float) -> int:
    """Sign changes of the piecewise-linear path on [t0, t1]

    t0 may lie below epsilon; the path is zero there and adds no change.
    """
    if not 0 < t0 < t1 <= z.pm.horizon:
        raise InvalidParameters(f"need 0 < t0 < t1 <= T, got t0={t0}, t1={t1}")
    inside = z.breakpoints[(z.breakpoints > t0) & (z.breakpoints < t1)]
    points = np.concatenate(([t0], inside, [t1]))
    return _sign_changes(_evaluate(z.breakpoints, z.values, z.slopes, points))


def grid_zeros(z: ZigzagPath, t0: float, t1: float, points: int = 10**4) -> int:
    """Sign changes seen on a uniform grid; a check on zeros()"""
    return _sign_changes(np.asarray(evaluate(z, np.linspace(t0, t1, points + 1))))


class _ZigzagTask:
    """One zigzag draw reduced to its values at fixed times, zero count and atom count"""

    def __init__(self, c, horizon, eps, times, with_zeros=True):
        self.c = c
        self.horizon = horizon
        self.eps = eps
        self.times = times
        self.with_zeros = with_zeros

    def __call__(self, trial, rng):
        w = 1 if rng.random() < 0.5 else -1
        atoms = sample_atoms(self.c, self.horizon, self.eps, rng)
        anchor = atoms[-1] if len(atoms) else self.horizon
        breakpoints, values, slopes = _path_arrays(atoms, self.eps, self.horizon, anchor)
        at_times = w * _evaluate(breakpoints, values, slopes, self.times)
        zero_count = _sign_changes(values[1:]) if self.with_zeros else 0
        return at_times, zero_count, len(atoms)


def zigzag_ensemble(c: float, horizon: float, eps: float, trials: int, seed: int,
                    times: Sequence[float], workers: int = 1, with_zeros: bool = True):
    """
    Values at the given times plus per-trial summaries

    Returns:
        (values of shape (trials, len(times)), zero counts on [eps, T], atom counts)
    """
    _check_ppp_parameters(c, horizon, eps)
    times = np.asarray(times, dtype=np.float64)
    if np.any((times < 0) | (times > horizon)):
        raise InvalidParameters(f"times must lie in [0, {horizon}]")
    task = _ZigzagTask(c, horizon, eps, times, with_zeros)
    rows = run_trials(task, trials, seed, workers)
    values = np.array([row[0] for row in rows]).reshape(trials, len(times))
    zero_counts = np.array([row[1] for row in rows], dtype=np.int64)
    atom_counts = np.array([row[2] for row in rows], dtype=np.int64)
    return values, zero_counts, atom_counts


class _CountTask:
    def __init__(self, c, horizon, eps, windows):
        self.c = c
        self.horizon = horizon
        self.eps = eps
        self.windows = windows

    def __call__(self, trial, rng):
        atoms = sample_atoms(self.c, self.horizon, self.eps, rng)
        return [int(np.searchsorted(atoms, b, side="right") - np.searchsorted(atoms, a, side="right"))
                for a, b in self.windows]


def ppp_window_counts(c: float, horizon: float, eps: float, windows, trials: int, seed: int,
                      workers: int = 1) -> np.ndarray:
    """Atom counts in each (a, b] window, one row per trial"""
    _check_ppp_parameters(c, horizon, eps)
    rows = run_trials(_CountTask(c, horizon, eps, list(windows)), trials, seed, workers)
    return np.array(rows, dtype=np.int64).reshape(trials, len(windows))


class _TurnCountTask:
    def __init__(self, sampler: TurnSampler):
        self.sampler = sampler

    def __call__(self, trial, rng):
        return len(self.sampler.sample(rng))


def walk_turn_counts(n: int, a: float, b: float, trials: int, seed: int, c: float = 1.0,
                     s=None, workers: int = 1) -> np.ndarray:
    """Turns of the walk in steps ceil(a n) + 1 .. ceil(b n), one count per trial"""
    if not 0 < a < b:
        raise InvalidParameters(f"need 0 < a < b, got a={a}, b={b}")
    s = s if s is not None else CriticalCooling(c=c)
    lo = math.ceil(a * n) + 1
    hi = math.ceil(b * n)
    sampler = TurnSampler(s, lo, hi)
    logger.info(f"Counting turns in steps {lo}..{hi} over {trials} trials")
    return np.array(run_trials(_TurnCountTask(sampler), trials, seed, workers), dtype=np.int64)
