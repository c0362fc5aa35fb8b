"""
Schedule service: evaluation, regime classification and config parsing

Schedules are built from plain-text key=value configs (inline or file) and
classified on the regime diagram, analytically for the named families and
from partial-sum diagnostics for custom tables.
"""
import logging
import math
import os
import re
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import TypeAdapter, ValidationError

from ..errors import InvalidParameters
from ..models.schedule import (
    CustomTable,
    EvenOdd,
    RegimeDiagnostics,
    RegimeVerdict,
    Schedule,
)

logger = logging.getLogger("cointurn.schedule")

MIXING_WITNESS = 25.0
SMALL_RATE = 0.05
SLOPE_SUPERCRITICAL = 1.1
SLOPE_SUBCRITICAL = 0.9
FLAT_SLOPE = 0.05
# expected turns inside the horizon below this count as none
NEGLIGIBLE_TURNS = 1e-6

SCALING_LIMITS = {
    "lower-supercritical": "ray (almost surely)",
    "strongly-critical": "ray (in law)",
    "critical-cooling": "zigzag",
    "subcritical-cooling": "Brownian motion (time-changed); S_n/n -> 0",
    "bounded-band": "Brownian motion",
    "heating": "Brownian motion (time-changed)",
    "upper-supercritical": "none (bounded oscillation)",
    "irregular": "unknown",
}

_schedule_adapter = TypeAdapter(Schedule)


def prob(s, n: int) -> float:
    """p_n of schedule s, n >= 1"""
    if n < 1:
        raise InvalidParameters(f"index must be >= 1, got {n}")
    return s.prob(n)


def probs(s, start: int, stop: int) -> np.ndarray:
    """p_start..p_stop as an array"""
    if start < 1:
        raise InvalidParameters(f"index must be >= 1, got {start}")
    return s.span(start, stop)


def _dominance(q_num: np.ndarray, q_den: np.ndarray) -> Optional[float]:
    """min_m q_num[m] / max_{l >= m} q_den[l] over the common range"""
    size = min(len(q_num), len(q_den))
    if size == 0:
        return None
    suffix_max = np.maximum.accumulate(q_den[:size][::-1])[::-1]
    valid = suffix_max > 0
    if not valid.any():
        return None
    return float(np.min(q_num[:size][valid] / suffix_max[valid]))


def regime_diagnostics(s, horizon: int) -> RegimeDiagnostics:
    """Partial sums of p, q and min(p, q) plus the even/odd heating constants"""
    p = s.span(1, horizon)
    q = 1.0 - p
    n = np.arange(1, horizon + 1)
    # q_{2m} for m >= 1 and q_{2l+1} for l >= 1
    q_even = q[n % 2 == 0]
    q_odd = q[(n % 2 == 1) & (n > 1)]
    notes = []
    if horizon < 8:
        notes.append("horizon too short for slope diagnostics")
    return RegimeDiagnostics(
        horizon=horizon,
        sum_p=float(p.sum()),
        sum_q=float(q.sum()),
        sum_min=float(np.minimum(p, q).sum()),
        turn_rate=float(horizon * p[-1]),
        sum_q_even=float(q_even.sum()),
        sum_q_odd=float(q_odd.sum()),
        even_dominance=_dominance(q_even, q_odd),
        odd_dominance=_dominance(q_odd, q_even[1:]),
        notes=notes,
    )


def _loglog_slope(n: np.ndarray, values: np.ndarray) -> float:
    """Decay exponent beta of values ~ n^-beta; inf if the values hit zero"""
    if len(values) < 3:
        return math.nan
    if np.any(values <= 0.0):
        return math.inf
    slope, _ = np.polyfit(np.log(n), np.log(values), 1)
    return float(-slope)


def _one_sided_regime(n: np.ndarray, r: np.ndarray, horizon: int, low: bool) -> str:
    """Regime from the small rate r (p on the cooling side, q on the heating side)"""
    rate = n * r
    if horizon * r.max() < NEGLIGIBLE_TURNS:
        return "lower-supercritical" if low else "upper-supercritical"
    if rate.min() < SMALL_RATE and rate.max() > 5.0:
        return "irregular"
    beta = _loglog_slope(n, r)
    if beta > SLOPE_SUPERCRITICAL:
        return "lower-supercritical" if low else "upper-supercritical"
    if r.min() >= SMALL_RATE or abs(beta) < FLAT_SLOPE:
        return "bounded-band"
    if not low:
        return "heating"
    if beta < SLOPE_SUBCRITICAL:
        return "subcritical-cooling"
    if horizon * r[-1] < SMALL_RATE:
        return "strongly-critical"
    return "critical-cooling"


def _diagnostic_regime(s, horizon: int) -> str:
    start = max(2, horizon // 2)
    stop = max(horizon, start)
    n = np.arange(start, stop + 1)
    p = s.span(start, stop)
    q = 1.0 - p
    if np.all(p <= 0.5):
        return _one_sided_regime(n, p, horizon, low=True)
    if np.all(p >= 0.5):
        return _one_sided_regime(n, q, horizon, low=False)
    if np.minimum(p, q).min() >= SMALL_RATE:
        return "bounded-band"
    return "irregular"


def _needs_diagnostics(s, horizon: int) -> bool:
    if isinstance(s, CustomTable):
        tail = s.tail_value
        settled = tail in (0.0, 1.0) or min(tail, 1.0 - tail) >= SMALL_RATE
        return horizon <= s.last_index or not settled
    if isinstance(s, EvenOdd):
        return _needs_diagnostics(s.even_rule, horizon) or _needs_diagnostics(s.odd_rule, horizon)
    return s.analytic_regime() is None


def classify(s, horizon: int, witness: float = MIXING_WITNESS) -> RegimeVerdict:
    """Place s on the regime diagram, deciding mixing where possible"""
    if horizon < 1:
        raise InvalidParameters(f"horizon must be >= 1, got {horizon}")
    diagnostics = regime_diagnostics(s, horizon)

    if not _needs_diagnostics(s, horizon):
        mixing, regime = s.analytic_regime()
        return RegimeVerdict(
            mixing="mixing" if mixing else "non-mixing",
            regime=regime,
            scaling_limit=SCALING_LIMITS[regime],
            method="analytic",
            diagnostics=diagnostics,
        )

    regime = _diagnostic_regime(s, horizon)
    if regime in ("lower-supercritical", "upper-supercritical"):
        mixing = "non-mixing"
    elif diagnostics.sum_min >= witness and regime != "irregular":
        mixing = "mixing"
    else:
        mixing = "undetermined-at-horizon"
    logger.warning(f"Heuristic classification at horizon {horizon}: {mixing}, {regime}")
    return RegimeVerdict(
        mixing=mixing,
        regime=regime,
        scaling_limit=SCALING_LIMITS[regime],
        method="diagnostic",
        diagnostics=diagnostics,
    )


def parse_key_values(text: str) -> Dict[str, str]:
    """Parse 'k=v' pairs separated by commas, whitespace or newlines; '#' starts a comment"""
    pairs: Dict[str, str] = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        for token in re.split(r"[,\s]+", line.strip()):
            if not token:
                continue
            if "=" not in token:
                raise InvalidParameters(f"expected key=value, got '{token}'")
            key, value = token.split("=", 1)
            key = key.strip()
            if key in pairs:
                raise InvalidParameters(f"duplicate key '{key}'")
            pairs[key] = value.strip()
    return pairs


def read_config_text(source: str) -> str:
    """An existing file path is read, anything else is taken as inline config"""
    if os.path.isfile(source):
        with open(source, "r", encoding="utf-8") as handle:
            return handle.read()
    return source


def load_custom_table(path: str) -> Dict[int, float]:
    """Read a two-column (n, p_n) CSV; a header row is optional"""
    try:
        frame = pd.read_csv(path, header=None, comment="#", skipinitialspace=True)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise InvalidParameters(f"cannot read custom table {path}: {e}")
    if frame.shape[1] != 2:
        raise InvalidParameters(f"custom table {path} must have exactly two columns")
    frame = frame.apply(pd.to_numeric, errors="coerce").dropna()
    if frame.empty:
        raise InvalidParameters(f"custom table {path} has no numeric rows")
    return {int(n): float(p) for n, p in zip(frame.iloc[:, 0], frame.iloc[:, 1])}


def _parse_inline_table(text: str) -> Dict[int, float]:
    """'2:0.1;3:0.2' -> {2: 0.1, 3: 0.2}"""
    table = {}
    for item in text.split(";"):
        if not item:
            continue
        try:
            n, p = item.split(":", 1)
            table[int(n)] = float(p)
        except ValueError:
            raise InvalidParameters(f"bad table entry '{item}', expected n:p")
    return table


def _nest(pairs: Dict[str, str]) -> dict:
    """Turn 'even.kind=...' style keys into nested dicts for EvenOdd"""
    data: dict = {}
    for key, value in pairs.items():
        target = data
        parts = key.split(".")
        for part in parts[:-1]:
            target = target.setdefault(f"{part}_rule", {})
            if not isinstance(target, dict):
                raise InvalidParameters(f"key '{key}' conflicts with a scalar value")
        target[parts[-1]] = value
    return data


def _resolve_tables(data: dict) -> dict:
    if "values" in data:
        data["table"] = _parse_inline_table(data.pop("values"))
    elif isinstance(data.get("table"), str):
        data["table"] = load_custom_table(data["table"])
    for key in ("even_rule", "odd_rule"):
        if isinstance(data.get(key), dict):
            data[key] = _resolve_tables(data[key])
    return data


def schedule_from_mapping(pairs: Dict[str, str]):
    """Build a schedule from parsed key=value pairs"""
    data = _resolve_tables(_nest(dict(pairs)))
    try:
        schedule = _schedule_adapter.validate_python(data)
    except ValidationError as e:
        raise InvalidParameters(f"invalid schedule config {pairs}: {e}")
    logger.debug(f"Built schedule {schedule.cache_key()}")
    return schedule


def parse_schedule(source: str):
    """Schedule from inline key=value text, a JSON object or a config file path"""
    text = read_config_text(source)
    if text.lstrip().startswith("{"):
        return schedule_from_json(text)
    return schedule_from_mapping(parse_key_values(text))


def schedule_from_json(text: str):
    """Schedule from a JSON object such as the model's own dump"""
    try:
        return _schedule_adapter.validate_json(text)
    except ValidationError as e:
        raise InvalidParameters(f"invalid schedule JSON: {e}")


def parse_schedule_list(lines: Iterable[str]) -> List[Tuple[str, object]]:
    """(source text, schedule) for each non-empty line, as read by the scan command"""
    schedules = []
    for number, line in enumerate(lines, start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        try:
            schedules.append((stripped, parse_schedule(stripped)))
        except InvalidParameters as e:
            raise InvalidParameters(f"line {number}: {e}")
    return schedules
