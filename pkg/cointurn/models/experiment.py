"""
Experiment configuration and report models for the cointurn CLI
"""
from typing import Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field, field_validator


class ExperimentConfig(BaseModel):
    """Options shared by every subcommand; unknown keys are rejected"""
    master_seed: int = Field(default=0, ge=0)
    out: Optional[str] = None
    workers: int = Field(default=1, ge=1)

    class Config:
        extra = "forbid"

    def header_items(self) -> Dict[str, str]:
        """Resolved config as ordered key=value strings for output headers"""
        items = {}
        for key, value in self.model_dump().items():
            if value is None:
                continue
            items[key] = ";".join(str(v) for v in value) if isinstance(value, list) else str(value)
        return items


def _split_list(value: str) -> List[str]:
    return [item for item in value.replace(";", " ").replace(",", " ").split() if item]


def _parse_grid(value) -> List[float]:
    if isinstance(value, str):
        return [float(item) for item in _split_list(value)]
    return [float(item) for item in value]


class ExactConfig(ExperimentConfig):
    schedule: str
    n_start: int = Field(default=1, ge=1)
    n_stop: int = Field(default=100, ge=1)
    step: int = Field(default=1, ge=1)


class SimulateConfig(ExperimentConfig):
    schedule: str
    n: int = Field(ge=1)
    trials: int = Field(default=1, ge=1)
    grid: List[float] = Field(default_factory=list)
    mode: Optional[Literal["cooling", "diffusive"]] = None
    y1: Optional[int] = None

    @field_validator("grid", mode="before")
    @classmethod
    def _grid(cls, value):
        return _parse_grid(value)

    @field_validator("y1")
    @classmethod
    def _y1(cls, value):
        if value is not None and value not in (-1, 1):
            raise ValueError("y1 must be +1 or -1")
        return value


class ZigzagConfig(ExperimentConfig):
    c: float = Field(gt=0.0)
    T: float = Field(default=1.0, gt=0.0)
    eps: float = Field(default=1e-4, gt=0.0)
    trials: int = Field(default=1, ge=1)
    grid: List[float] = Field(default_factory=list)

    @field_validator("grid", mode="before")
    @classmethod
    def _grid(cls, value):
        return _parse_grid(value)


class VerifyConfig(ExperimentConfig):
    criteria: List[int] = Field(default_factory=list)
    quick: bool = False

    @field_validator("criteria", mode="before")
    @classmethod
    def _criteria(cls, value):
        if isinstance(value, str):
            return [int(item) for item in _split_list(value)]
        return value


class ScanConfig(ExperimentConfig):
    schedules: str
    horizon: int = Field(default=10**5, ge=1)


class CriterionResult(BaseModel):
    """Outcome of one acceptance criterion"""
    id: int
    title: str
    claim: str
    passed: bool
    statistics: Dict[str, Union[float, int, str, None]]
    thresholds: Dict[str, str]
    error: Optional[str] = None


class VerificationReport(BaseModel):
    tool: str = "cointurn"
    version: str
    master_seed: int
    criteria: List[CriterionResult]
    all_passed: bool
