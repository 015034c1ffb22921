"""Pydantic schemas for estimates and check reports"""
from pydantic import BaseModel, Field
from typing import Optional, List, Dict, Any


class EstimateWithCI(BaseModel):
    mean: float
    se: float = Field(ge=0.0)
    n: int
    target: float
    z: float
    passed: bool
    seed: Optional[int] = None


class AssertionResult(BaseModel):
    name: str
    target: float
    estimate: float
    se: float = 0.0
    z: Optional[float] = None
    tol: float
    passed: bool


class SweepResult(BaseModel):
    dts: List[float]
    errors: List[float]
    order: Optional[float] = None
    exact: bool = False
    monotone: bool = True
    band: Optional[List[float]] = None
    passed: bool


class CheckReport(BaseModel):
    check_id: str
    model: str
    seed: int
    config: Dict[str, Any]
    assertions: List[AssertionResult]
    sweeps: List[SweepResult] = []
    wall_ms: float = 0.0
    verdict: str
    trivial: bool = False
    notes: List[str] = []
    error: Optional[str] = None

    @property
    def n_assertions(self) -> int:
        return len(self.assertions)

    @property
    def n_pass(self) -> int:
        return sum(1 for a in self.assertions if a.passed)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


class SummaryRow(BaseModel):
    check_id: str
    verdict: str
    n_assertions: int
    n_pass: int
    seed: int
    wall_ms: float
