"""
Result models for the exact analytics
"""
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, Field


class CorrProduct(BaseModel):
    """e_{i,j} = E(Y_i Y_j)"""
    i: int
    j: int
    value: float = Field(ge=-1.0, le=1.0)


class MartingaleCoeffs(BaseModel):
    """a_n together with how it was obtained"""
    n: int
    a_n: float
    truncation_error_bound: float = Field(ge=0.0)
    converged: bool
    terms: int = 0


class VarianceLedger(BaseModel):
    m: int
    v_m: float = Field(ge=0.0)
    sigma2_m: float = Field(ge=0.0)
    r_m: float


class RhoResult(BaseModel):
    """Infinite product of (1 - 2 p_i), i >= 2

    status is "mixing" when the product tends to zero and "undefined" when
    infinitely many p_i exceed 1/2.
    """
    value: Optional[float] = None
    status: Literal["converged", "not-converged", "mixing", "undefined"]
    log_error_bound: float = 0.0
    terms: int = 0


class ErgodicVerdict(BaseModel):
    """Limit behaviour of P(Y_n = 1 | Y_1)"""
    case: Literal["half", "rho-limit", "no-limit"]
    rho: Optional[float] = None
    limit_plus: Optional[float] = None
    limit_minus: Optional[float] = None
    n_count: int
    horizon: int
    speed_proxy: float
    tv_bound: float


class MartingaleDiagnostics(BaseModel):
    n: int
    a_n: float
    v_n: float
    ratio: Optional[float]
    gap: float
    bound: float = 0.0


class CoefficientTable(BaseModel):
    """a_i, their error bounds and v_i for 1 <= i <= capacity (index 0 unused)"""
    schedule_key: str
    capacity: int
    a: np.ndarray
    bound: np.ndarray
    v: np.ndarray
    head_converged: bool = True
    tol: float

    class Config:
        arbitrary_types_allowed = True
