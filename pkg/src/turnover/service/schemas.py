"""Pydantic request/response models for the HTTP JSON API."""

from __future__ import annotations

from pydantic import BaseModel, Field


class MatchTestDoc(BaseModel):
    feature: str
    op: str = Field(pattern="^(eq|in|range)$")
    value: str | float | None = None
    values: list[str] = []
    lo: float | None = None
    hi: float | None = None


class AssignDoc(BaseModel):
    feature: str
    value: str | float


class RewriteDoc(BaseModel):
    match: list[MatchTestDoc] = []
    assign: list[AssignDoc] = []


class PolicyDoc(BaseModel):
    name: str = Field(min_length=1)
    description: str = ""
    rewrites: list[RewriteDoc] = []
    hold_match: list[MatchTestDoc] | None = None


class MassRequest(BaseModel):
    policy: PolicyDoc


class TargetedRequest(BaseModel):
    policies: list[PolicyDoc]


class ValidationIssueDoc(BaseModel):
    field: str
    message: str


class ValidationResponse(BaseModel):
    valid: bool
    errors: list[ValidationIssueDoc] = []


class FeatureDoc(BaseModel):
    name: str
    kind: str
    levels: list[str]
    actionable: bool


class LevelCount(BaseModel):
    level: str
    count: int


class FeatureDistribution(BaseModel):
    feature: str
    counts: list[LevelCount]


class HistogramBin(BaseModel):
    lo: float
    hi: float
    count: int


class PopulationSummary(BaseModel):
    population: int
    baseline_leaver_share: float
    threshold: float
    features: list[FeatureDoc]
    distributions: list[FeatureDistribution]
    risk_histogram: list[HistogramBin]


class ModelInfo(BaseModel):
    family: str
    threshold: float
    selected_features: list[str]
    schema_fingerprint: str
    converged: bool
    metrics: dict


class ImportanceEntryDoc(BaseModel):
    feature: str
    mean_drop: float
    std_error: float | None
    repetitions: int


class ImportanceDoc(BaseModel):
    baseline_auc: float
    entries: list[ImportanceEntryDoc]


class MassResponse(BaseModel):
    policy: str
    description: str = ""
    baseline_leaver_share: float
    post_leaver_share: float
    rows_touched: int
    threshold: float
    population: int
    hold_leaver_share: float | None = None


class ProgramShareDoc(BaseModel):
    program: str
    population_share: float
    leaver_share: float
    count: int


class AssignmentDoc(BaseModel):
    id: str
    program: str | None


class TargetedResponse(BaseModel):
    baseline_leaver_share: float
    residual_leaver_share: float
    threshold: float
    population: int
    flagged: int
    shares: list[ProgramShareDoc]
    assignments: list[AssignmentDoc]


class ProgramRisk(BaseModel):
    program: str
    probability: float
    flips: bool


class EmployeeRisk(BaseModel):
    id: str
    baseline_probability: float
    flagged: bool
    threshold: float
    programs: list[ProgramRisk]
    assigned: str | None


class ErrorResponse(BaseModel):
    code: str
    message: str
    errors: list[ValidationIssueDoc] = []
