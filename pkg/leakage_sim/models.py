from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from . import __version__

RESULTS_SCHEMA = "leakage-sim/results/v1"
_BOUND_TOL = 1e-12


class IntervalEstimate(BaseModel):
    value: float
    lo: float
    hi: float
    method: str = Field(..., description="Estimator that produced the interval, e.g. 'wilson(z=1)'.")

    @model_validator(mode="after")
    def _validate_order(self) -> "IntervalEstimate":
        if not self.lo - _BOUND_TOL <= self.value <= self.hi + _BOUND_TOL:
            raise ValueError("interval must satisfy lo <= value <= hi.")
        return self

    @property
    def halfwidth(self) -> float:
        return (self.hi - self.lo) / 2

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi


class ScanPoint(BaseModel):
    phi_rad: float
    n: float = Field(..., description="Postselected shots at this phase (expected shots for exact runs).")
    k: float = Field(..., description="Shots reporting the counted outcome.")

    @model_validator(mode="after")
    def _validate_counts(self) -> "ScanPoint":
        if self.n < 0 or not 0 <= self.k <= self.n + _BOUND_TOL:
            raise ValueError("scan counts must satisfy 0 <= k <= n.")
        return self


class ScanData(BaseModel):
    label: str = ""
    points: List[ScanPoint] = Field(default_factory=list)

    @field_validator("points")
    @classmethod
    def _validate_distinct(cls, value: List[ScanPoint]) -> List[ScanPoint]:
        phis = [round(point.phi_rad, 12) for point in value]
        if len(set(phis)) != len(phis):
            raise ValueError("scan phases must be distinct.")
        return value

    def columns(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        phi = np.array([p.phi_rad for p in self.points], dtype=float)
        n = np.array([p.n for p in self.points], dtype=float)
        k = np.array([p.k for p in self.points], dtype=float)
        return phi, n, k


class FitResult(BaseModel):
    model: str
    parameters: Dict[str, float] = Field(default_factory=dict)
    uncertainties: Dict[str, float] = Field(default_factory=dict)
    residual_norm: float = 0.0
    converged: bool = True
    usable: bool = True
    at_boundary: bool = Field(default=False, description="Optimum pinned to a parameter bound.")
    notes: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def _unusable_when_not_converged(self) -> "FitResult":
        if not self.converged:
            self.usable = False
        return self


class CountsRow(BaseModel):
    condition: str = Field(..., description="Prepared condition the row belongs to, e.g. 'present'.")
    data: str = Field(..., description="Data-site outcome letter (0/1/N, '-' if unmeasured).")
    ancilla: str = Field(..., description="Ancilla-site outcome letter.")
    interpretation: str = Field(..., description="Meaning under the circuit's declared semantics.")
    count: float


class CountsTable(BaseModel):
    rule: str = Field(..., description="Postselection rule applied to the raw records.")
    rows: List[CountsRow] = Field(default_factory=list)
    excluded: float = 0.0
    total: float = 0.0

    @model_validator(mode="after")
    def _validate_total(self) -> "CountsTable":
        kept = sum(row.count for row in self.rows)
        if abs(kept + self.excluded - self.total) > 1e-6 * max(1.0, self.total):
            raise ValueError("counts plus excluded shots must equal the total.")
        return self

    def count(self, condition: Optional[str] = None, interpretation: Optional[str] = None, **letters: str) -> float:
        total = 0.0
        for row in self.rows:
            if condition is not None and row.condition != condition:
                continue
            if interpretation is not None and row.interpretation != interpretation:
                continue
            if any(getattr(row, key) != value for key, value in letters.items()):
                continue
            total += row.count
        return total

    @property
    def kept(self) -> float:
        return self.total - self.excluded


class EngineComparison(BaseModel):
    experiment: str
    outcome: str
    frequency: float
    probability: float
    deviation: float
    bound: float = Field(..., description="Four-sigma binomial bound on the deviation.")
    within_bound: bool


class ScenarioResult(BaseModel):
    name: str
    engine: str
    shots: int
    counts: Dict[str, CountsTable] = Field(default_factory=dict)
    scans: Dict[str, ScanData] = Field(default_factory=dict)
    fits: Dict[str, FitResult] = Field(default_factory=dict)
    estimates: Dict[str, IntervalEstimate] = Field(default_factory=dict)
    metrics: Dict[str, float] = Field(default_factory=dict)
    comparisons: List[EngineComparison] = Field(default_factory=list)


class ResultsDocument(BaseModel):
    """Persisted outcome of one run; reproducible except for ``wall_clock_seconds``."""

    model_config = ConfigDict(populate_by_name=True)

    schema_tag: str = Field(default=RESULTS_SCHEMA, alias="schema")
    library_version: str = __version__
    config: Dict[str, Any] = Field(default_factory=dict)
    seed: int = 0
    scenarios: List[ScenarioResult] = Field(default_factory=list)
    wall_clock_seconds: float = 0.0

    def scenario(self, name: str, engine: Optional[str] = None) -> ScenarioResult:
        for result in self.scenarios:
            if result.name == name and (engine is None or result.engine == engine):
                return result
        raise KeyError(f"no result for scenario {name!r}")
