"""
Path and distribution models: sampled walks, exact laws, zigzag paths
"""
from typing import Dict, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field


class WalkPath(BaseModel):
    """One realisation of the walk up to step n

    turns holds W_2..W_n, signs Y_1..Y_n and sums S_0..S_n.
    """
    n: int = Field(ge=1)
    turns: np.ndarray
    signs: np.ndarray
    sums: np.ndarray
    seed: Optional[int] = None

    class Config:
        arbitrary_types_allowed = True

    def value_at(self, x):
        """S at real time x by linear interpolation"""
        return np.interp(x, np.arange(self.n + 1), self.sums)

    def is_valid(self) -> bool:
        steps = np.diff(self.sums)
        flips = self.signs[1:] != self.signs[:-1]
        return (
            self.sums[0] == 0
            and np.array_equal(steps, self.signs)
            and np.all(np.abs(self.signs) == 1)
            and np.array_equal(flips, self.turns.astype(bool))
        )


class ExactDist(BaseModel):
    """Exact law of (S_n, Y_n); arrays are indexed by S + n"""
    n: int = Field(ge=1)
    plus: np.ndarray
    minus: np.ndarray

    class Config:
        arbitrary_types_allowed = True

    @property
    def values(self) -> np.ndarray:
        return np.arange(-self.n, self.n + 1)

    def marginal(self) -> Tuple[np.ndarray, np.ndarray]:
        """Support of S_n (parity of n) and its probabilities"""
        values = self.values
        keep = (values - self.n) % 2 == 0
        return values[keep], (self.plus + self.minus)[keep]

    def pmf(self) -> Dict[Tuple[int, int], float]:
        table = {}
        for sign, weights in ((1, self.plus), (-1, self.minus)):
            for s_value, weight in zip(self.values, weights):
                if weight > 0.0:
                    table[(int(s_value), sign)] = float(weight)
        return table

    def total(self) -> float:
        return float(self.plus.sum() + self.minus.sum())

    def head_prob(self) -> float:
        """P(Y_n = 1)"""
        return float(self.plus.sum() / self.total())

    def mean(self) -> float:
        return float(np.dot(self.values, self.plus + self.minus))

    def variance(self) -> float:
        weights = self.plus + self.minus
        mean = np.dot(self.values, weights)
        return float(np.dot((self.values - mean) ** 2, weights))

    def tv(self, other: "ExactDist") -> float:
        if other.n != self.n:
            raise ValueError("distributions at different n")
        return 0.5 * float(np.abs(self.plus - other.plus).sum() + np.abs(self.minus - other.minus).sum())


class RescaledPath(BaseModel):
    mode: Literal["cooling", "diffusive"]
    scale: int
    t: np.ndarray
    values: np.ndarray
    indices: Optional[np.ndarray] = None

    class Config:
        arbitrary_types_allowed = True


class PointMeasure(BaseModel):
    """Truncated Poisson point process with intensity c/x on (epsilon, horizon]"""
    atoms: np.ndarray
    epsilon: float = Field(gt=0.0)
    horizon: float
    intensity: float = Field(gt=0.0)
    seed: Optional[int] = None

    class Config:
        arbitrary_types_allowed = True

    def count(self, a: float, b: float) -> int:
        """Number of atoms in (a, b]"""
        return int(np.searchsorted(self.atoms, b, side="right") - np.searchsorted(self.atoms, a, side="right"))


class ZigzagPath(BaseModel):
    """Slope +-1 path turning at the atoms, zero on (0, epsilon]

    breakpoints are epsilon, the atoms and horizon; values holds the path
    (before the global sign) at each breakpoint and slopes the slope on each
    piece.
    """
    pm: PointMeasure
    w: int
    anchor: float
    breakpoints: np.ndarray
    values: np.ndarray
    slopes: np.ndarray

    class Config:
        arbitrary_types_allowed = True

    @property
    def truncation_error(self) -> float:
        return self.pm.epsilon
