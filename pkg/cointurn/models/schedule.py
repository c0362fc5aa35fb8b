"""
Turning-probability schedule models

A schedule is the rule n -> p_n giving the probability that the coin is
turned over at step n. Each named family is a frozen pydantic model; the
discriminated union ``Schedule`` accepts any of them.
"""
import math
from typing import Annotated, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, PrivateAttr, field_validator

HALF = 0.5

# k! for k = 1..20 (21! overflows int64)
_FACTORIALS = np.array([math.factorial(k) for k in range(1, 21)], dtype=np.int64)

Side = Literal["low", "high", "half", "mixed"]


class BaseSchedule(BaseModel):
    """Evaluation rules shared by every family: head value, n0 fallback, clamping"""
    first: float = Field(default=HALF, ge=0.0, le=1.0)

    class Config:
        frozen = True
        extra = "forbid"

    def _formula(self, n: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _n0(self) -> int:
        return 1

    def probs(self, n) -> np.ndarray:
        """Vectorised p_n for an integer array of indices n >= 1"""
        n = np.atleast_1d(np.asarray(n, dtype=np.int64))
        with np.errstate(divide="ignore", invalid="ignore"):
            p = np.asarray(self._formula(n), dtype=np.float64)
        p = np.clip(p, 0.0, 1.0)
        if self._n0() > 1:
            p = np.where(n < self._n0(), HALF, p)
        return np.where(n == 1, self.first, p)

    def span(self, start: int, stop: int) -> np.ndarray:
        """p_n for start <= n <= stop"""
        if stop < start:
            return np.empty(0, dtype=np.float64)
        return self.probs(np.arange(start, stop + 1, dtype=np.int64))

    def prob(self, n: int) -> float:
        return float(self.probs(n)[0])

    def q(self, n: int) -> float:
        return 1.0 - self.prob(n)

    def turn_rate(self, n: int) -> float:
        """A_n := n * p_n"""
        return n * self.prob(n)

    # Analytic facts about the tail. Families override what they know.

    def eventual_side(self) -> Side:
        """Which side of 1/2 the sequence settles on (from side_onset() on)"""
        raise NotImplementedError

    def side_onset(self) -> int:
        """Smallest K >= 2 such that every p_k, k >= K, lies on eventual_side()"""
        return 2

    def tail_min_sum(self, k: int) -> float:
        """Upper bound on sum_{i>k} min(p_i, q_i); inf when the sum diverges"""
        return math.inf

    def analytic_regime(self) -> Optional[Tuple[bool, str]]:
        """(mixing, regime) when the family decides it in closed form"""
        return None

    def cache_key(self) -> str:
        return self.model_dump_json()

    def _settle_onset(self, candidate: int, side: Side) -> int:
        """Correct a closed-form onset estimate against the actual values"""
        def on_side(k: int) -> bool:
            p = self.prob(k)
            return p <= HALF if side == "low" else p >= HALF

        k = max(2, int(candidate))
        while k > 2 and on_side(k - 1):
            k -= 1
        while not on_side(k):
            k += 1
        return k


class Constant(BaseSchedule):
    kind: Literal["constant"] = "constant"
    c: float

    @field_validator("c")
    @classmethod
    def _open_unit(cls, v):
        if not 0.0 < v < 1.0:
            raise ValueError("constant schedule needs 0 < c < 1")
        return v

    def _formula(self, n):
        return np.full(n.shape, self.c)

    def eventual_side(self):
        if self.c == HALF:
            return "half"
        return "low" if self.c < HALF else "high"

    def analytic_regime(self):
        return True, "bounded-band"


class PowerCooling(BaseSchedule):
    """p_n = a / n^gamma, 0 < gamma < 1"""
    kind: Literal["power_cooling"] = "power_cooling"
    a: float = Field(gt=0.0)
    gamma: float
    n0: int = Field(default=1, ge=1)

    @field_validator("gamma")
    @classmethod
    def _gamma_range(cls, v):
        if not 0.0 < v < 1.0:
            raise ValueError("power cooling needs 0 < gamma < 1")
        return v

    def _n0(self):
        return self.n0

    def _formula(self, n):
        return self.a / np.power(n.astype(np.float64), self.gamma)

    def eventual_side(self):
        return "low"

    def side_onset(self):
        return self._settle_onset(math.ceil((2.0 * self.a) ** (1.0 / self.gamma)), "low")

    def analytic_regime(self):
        return True, "subcritical-cooling"


class CriticalCooling(BaseSchedule):
    """p_n = c/n ∧ 1"""
    kind: Literal["critical_cooling"] = "critical_cooling"
    c: float = Field(gt=0.0)
    n0: int = Field(default=1, ge=1)

    def _n0(self):
        return self.n0

    def _formula(self, n):
        return self.c / n.astype(np.float64)

    def eventual_side(self):
        return "low"

    def side_onset(self):
        return self._settle_onset(math.ceil(2.0 * self.c), "low")

    def analytic_regime(self):
        return True, "critical-cooling"


class HarmonicHeating(BaseSchedule):
    """p_n = 1 - c/n ∨ 0"""
    kind: Literal["harmonic_heating"] = "harmonic_heating"
    c: float = Field(gt=0.0)
    n0: int = Field(default=1, ge=1)

    def _n0(self):
        return self.n0

    def _formula(self, n):
        return 1.0 - self.c / n.astype(np.float64)

    def eventual_side(self):
        return "high"

    def side_onset(self):
        return self._settle_onset(math.ceil(2.0 * self.c), "high")

    def analytic_regime(self):
        return True, "heating"


class PowerHeating(BaseSchedule):
    """p_n = 1 - c / (2 n^gamma), 0 < gamma < 1"""
    kind: Literal["power_heating"] = "power_heating"
    c: float = Field(gt=0.0)
    gamma: float
    n0: int = Field(default=1, ge=1)

    @field_validator("gamma")
    @classmethod
    def _gamma_range(cls, v):
        if not 0.0 < v < 1.0:
            raise ValueError("power heating needs 0 < gamma < 1")
        return v

    def _n0(self):
        return self.n0

    def _formula(self, n):
        return 1.0 - self.c / (2.0 * np.power(n.astype(np.float64), self.gamma))

    def eventual_side(self):
        return "high"

    def side_onset(self):
        return self._settle_onset(math.ceil(self.c ** (1.0 / self.gamma)), "high")

    def analytic_regime(self):
        return True, "heating"


class FactorialCounterexample(BaseSchedule):
    """p_i = ln k / (2 k!) for k! < i <= (k+1)!"""
    kind: Literal["factorial_counterexample"] = "factorial_counterexample"

    def _formula(self, n):
        # first (k+1)! >= n, so k! < n <= (k+1)!
        k = np.searchsorted(_FACTORIALS, n, side="left")
        k = np.clip(k, 1, len(_FACTORIALS) - 1)
        k_fact = _FACTORIALS[k - 1].astype(np.float64)
        return np.log(k.astype(np.float64)) / (2.0 * k_fact)

    def eventual_side(self):
        return "low"

    def analytic_regime(self):
        return True, "subcritical-cooling"


class UniformFootnote(BaseSchedule):
    """p_n = 1/(n+1): S_N/N is exactly uniform on its lattice"""
    kind: Literal["uniform_footnote"] = "uniform_footnote"

    def _formula(self, n):
        return 1.0 / (n.astype(np.float64) + 1.0)

    def eventual_side(self):
        return "low"

    def analytic_regime(self):
        return True, "critical-cooling"


class CustomTable(BaseSchedule):
    """Explicit p_n values for listed n, then a tail rule

    Missing indices below the largest listed one fall back to 1/2. A row for
    n = 1 overrides ``first``.
    """
    kind: Literal["custom_table"] = "custom_table"
    table: Dict[int, float]
    tail: str = "last"

    _dense: np.ndarray = PrivateAttr()
    _tail_value: float = PrivateAttr()

    @field_validator("table")
    @classmethod
    def _check_table(cls, v):
        if not v:
            raise ValueError("custom table needs at least one row")
        for n, p in v.items():
            if n < 1:
                raise ValueError(f"table index must be >= 1, got {n}")
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"table probability out of [0, 1] at n={n}: {p}")
        return v

    @field_validator("tail")
    @classmethod
    def _check_tail(cls, v):
        if v == "last":
            return v
        if v.startswith("constant:"):
            value = float(v.split(":", 1)[1])
            if not 0.0 <= value <= 1.0:
                raise ValueError("tail constant must lie in [0, 1]")
            return v
        raise ValueError("tail must be 'last' or 'constant:<v>'")

    def model_post_init(self, __context):
        last = max(self.table)
        dense = np.full(last + 1, HALF, dtype=np.float64)
        for n, p in self.table.items():
            dense[n] = p
        if 1 not in self.table:
            dense[1] = self.first
        self._dense = dense
        if self.tail == "last":
            self._tail_value = float(self.table[last])
        else:
            self._tail_value = float(self.tail.split(":", 1)[1])

    @property
    def last_index(self) -> int:
        return len(self._dense) - 1

    @property
    def tail_value(self) -> float:
        return self._tail_value

    def probs(self, n) -> np.ndarray:
        n = np.atleast_1d(np.asarray(n, dtype=np.int64))
        inside = n <= self.last_index
        out = np.full(n.shape, self._tail_value, dtype=np.float64)
        out[inside] = self._dense[n[inside]]
        return out

    def eventual_side(self):
        v = self._tail_value
        if v == HALF:
            return "half"
        return "low" if v < HALF else "high"

    def side_onset(self):
        side = self.eventual_side()
        values = self._dense[2:]
        if side == "low":
            wrong = np.nonzero(values > HALF)[0]
        elif side == "high":
            wrong = np.nonzero(values < HALF)[0]
        else:
            wrong = np.nonzero(values != HALF)[0]
        if len(wrong) == 0:
            return 2
        return int(wrong[-1]) + 3

    def tail_min_sum(self, k):
        if min(self._tail_value, 1.0 - self._tail_value) > 0.0:
            return math.inf
        body = self._dense[k + 1:] if k + 1 <= self.last_index else np.empty(0)
        return float(np.minimum(body, 1.0 - body).sum())

    def analytic_regime(self):
        v = self._tail_value
        if v == 0.0:
            return False, "lower-supercritical"
        if v == 1.0:
            return False, "upper-supercritical"
        return True, "bounded-band"


class EvenOdd(BaseSchedule):
    """Even indices follow one rule, odd indices another"""
    kind: Literal["even_odd"] = "even_odd"
    even_rule: "Schedule"
    odd_rule: "Schedule"

    def _formula(self, n):
        return np.where(n % 2 == 0, self.even_rule.probs(n), self.odd_rule.probs(n))

    def eventual_side(self):
        sides = {self.even_rule.eventual_side(), self.odd_rule.eventual_side()}
        sides.discard("half")
        if not sides:
            return "half"
        if len(sides) == 1:
            return sides.pop()
        return "mixed"

    def side_onset(self):
        return max(self.even_rule.side_onset(), self.odd_rule.side_onset())

    def tail_min_sum(self, k):
        return self.even_rule.tail_min_sum(k) + self.odd_rule.tail_min_sum(k)

    def analytic_regime(self):
        even = self.even_rule.analytic_regime()
        odd = self.odd_rule.analytic_regime()
        if even is None or odd is None:
            return None
        mixing = even[0] or odd[0]
        if even[1] == odd[1]:
            return mixing, even[1]
        return mixing, "irregular"


Schedule = Annotated[
    Union[
        Constant,
        PowerCooling,
        CriticalCooling,
        HarmonicHeating,
        PowerHeating,
        FactorialCounterexample,
        UniformFootnote,
        CustomTable,
        EvenOdd,
    ],
    Field(discriminator="kind"),
]

EvenOdd.model_rebuild()


class RegimeDiagnostics(BaseModel):
    """Partial sums and rates at the classification horizon"""
    horizon: int
    sum_p: float
    sum_q: float
    sum_min: float
    turn_rate: float
    sum_q_even: float
    sum_q_odd: float
    even_dominance: Optional[float] = None
    odd_dominance: Optional[float] = None
    notes: List[str] = Field(default_factory=list)


class RegimeVerdict(BaseModel):
    """Where a schedule sits on the regime diagram"""
    mixing: Literal["mixing", "non-mixing", "undetermined-at-horizon"]
    regime: Literal[
        "lower-supercritical",
        "strongly-critical",
        "critical-cooling",
        "subcritical-cooling",
        "bounded-band",
        "heating",
        "upper-supercritical",
        "irregular",
    ]
    scaling_limit: str
    method: Literal["analytic", "diagnostic"]
    diagnostics: RegimeDiagnostics
