"""HTTP JSON service exposing a frozen risk model and the policy simulators.

All shared state is loaded once at startup and never mutated, so concurrent
requests need no synchronization and identical request bodies always produce
identical responses. Retraining happens in the CLI, never here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from ..data import Dataset, load_dataset
from ..models import FingerprintError, predict_proba
from ..pipeline import RiskModel, load_bundle
from ..policy import (
    Policy,
    PolicyError,
    apply_policy,
    builtin_programs,
    simulate_mass,
    simulate_targeted,
    validate_policy,
)
from .schemas import (
    AssignmentDoc,
    EmployeeRisk,
    FeatureDistribution,
    FeatureDoc,
    HistogramBin,
    ImportanceDoc,
    LevelCount,
    MassRequest,
    MassResponse,
    ModelInfo,
    PolicyDoc,
    PopulationSummary,
    ProgramRisk,
    ProgramShareDoc,
    TargetedRequest,
    TargetedResponse,
    ValidationResponse,
)


@dataclass
class ServiceState:
    bundle: RiskModel
    prediction: Dataset          # model-space rows
    baseline_probs: np.ndarray
    menu: list[Policy]
    metrics: dict
    importance: dict
    row_index: dict[str, int]


def load_state(model_dir: str | Path, data_path: str | Path) -> ServiceState:
    """Load artifacts and verify fingerprint compatibility (fail fast)."""
    model_dir = Path(model_dir)
    bundle = load_bundle(model_dir / "model.json")
    raw = load_dataset(data_path, bundle.raw_schema)
    prediction = bundle.prepare(raw)
    try:
        baseline = predict_proba(bundle.model, prediction)
    except FingerprintError as e:
        raise FingerprintError(f"prediction data incompatible with model: {e}") from e

    metrics = {}
    metrics_path = model_dir / "test_metrics.json"
    if metrics_path.exists():
        metrics = json.loads(metrics_path.read_text())
    importance = {}
    importance_path = model_dir / "importance.json"
    if importance_path.exists():
        importance = json.loads(importance_path.read_text())

    return ServiceState(
        bundle=bundle,
        prediction=prediction,
        baseline_probs=baseline,
        menu=builtin_programs(bundle.model_schema),
        metrics=metrics,
        importance=importance,
        row_index={r.id: i for i, r in enumerate(prediction.rows)},
    )


def _policy_from_doc(doc: PolicyDoc) -> Policy:
    try:
        return Policy.from_dict(doc.model_dump())
    except PolicyError as e:
        raise HTTPException(
            status_code=400,
            detail={"code": "malformed_policy", "message": str(e), "errors": []},
        )


def _validated_policy(doc: PolicyDoc, state: ServiceState) -> Policy:
    policy = _policy_from_doc(doc)
    issues = validate_policy(policy, state.bundle.model_schema)
    if issues:
        raise HTTPException(
            status_code=400,
            detail={
                "code": "invalid_policy",
                "message": f"policy {policy.name!r} failed validation",
                "errors": [{"field": i.field, "message": i.message} for i in issues],
            },
        )
    return policy


def create_app(state: ServiceState, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="turnover risk service", version="1.0")

    @app.exception_handler(HTTPException)
    async def http_error(request: Request, exc: HTTPException):
        detail = exc.detail
        if not isinstance(detail, dict):
            detail = {"code": "error", "message": str(detail), "errors": []}
        return JSONResponse(status_code=exc.status_code, content=detail)

    @app.exception_handler(RequestValidationError)
    async def body_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={
                "code": "malformed_request",
                "message": "request body failed validation",
                "errors": [
                    {"field": ".".join(str(p) for p in e["loc"]), "message": e["msg"]}
                    for e in exc.errors()
                ],
            },
        )

    @app.exception_handler(FingerprintError)
    async def fingerprint_error(request: Request, exc: FingerprintError):
        return JSONResponse(
            status_code=409,
            content={"code": "fingerprint_mismatch", "message": str(exc), "errors": []},
        )

    @app.get("/api/model", response_model=ModelInfo)
    def model_info():
        m = state.bundle.model
        return ModelInfo(
            family=m.family,
            threshold=m.threshold,
            selected_features=list(m.selected),
            schema_fingerprint=m.schema_fingerprint,
            converged=m.converged,
            metrics=state.metrics,
        )

    @app.get("/api/importance", response_model=ImportanceDoc)
    def importance():
        if not state.importance:
            raise HTTPException(
                status_code=404,
                detail={"code": "no_importance", "message": "no importance report loaded",
                        "errors": []},
            )
        doc = {k: v for k, v in state.importance.items() if k != "schema_version"}
        return ImportanceDoc(**doc)

    @app.get("/api/population/summary", response_model=PopulationSummary)
    def population_summary():
        schema = state.bundle.model_schema
        features = [
            FeatureDoc(
                name=f.name, kind=f.kind, levels=list(f.domain), actionable=f.actionable
            )
            for f in schema.features
        ]
        distributions = []
        for f in schema.features:
            column = state.prediction.column(f.name)
            counts = [
                LevelCount(level=lv, count=sum(v == lv for v in column))
                for lv in f.domain
            ]
            distributions.append(FeatureDistribution(feature=f.name, counts=counts))
        edges = np.linspace(0.0, 1.0, 11)
        hist, _ = np.histogram(state.baseline_probs, bins=edges)
        bins = [
            HistogramBin(lo=float(edges[i]), hi=float(edges[i + 1]), count=int(hist[i]))
            for i in range(len(hist))
        ]
        thr = state.bundle.model.threshold
        return PopulationSummary(
            population=len(state.prediction.rows),
            baseline_leaver_share=float(np.mean(state.baseline_probs >= thr)),
            threshold=thr,
            features=features,
            distributions=distributions,
            risk_histogram=bins,
        )

    @app.get("/api/policies", response_model=list[PolicyDoc])
    def policies():
        return [PolicyDoc(**p.to_dict()) for p in state.menu]

    @app.post("/api/policies/validate", response_model=ValidationResponse)
    def validate(doc: PolicyDoc):
        policy = _policy_from_doc(doc)
        issues = validate_policy(policy, state.bundle.model_schema)
        if issues:
            raise HTTPException(
                status_code=400,
                detail={
                    "code": "invalid_policy",
                    "message": f"policy {policy.name!r} failed validation",
                    "errors": [{"field": i.field, "message": i.message} for i in issues],
                },
            )
        return ValidationResponse(valid=True, errors=[])

    @app.post("/api/simulate/mass", response_model=MassResponse)
    def mass(req: MassRequest):
        policy = _validated_policy(req.policy, state)
        report = simulate_mass(state.bundle.model, state.prediction, policy)
        return MassResponse(**report.to_dict())

    @app.post("/api/simulate/targeted", response_model=TargetedResponse)
    def targeted(req: TargetedRequest):
        menu = [_validated_policy(doc, state) for doc in req.policies]
        names = [p.name for p in menu]
        if len(set(names)) != len(names):
            raise HTTPException(
                status_code=400,
                detail={"code": "invalid_policy", "message": "duplicate policy names in menu",
                        "errors": []},
            )
        report = simulate_targeted(state.bundle.model, state.prediction, menu)
        doc = report.to_dict()
        doc["shares"] = [ProgramShareDoc(**s) for s in doc["shares"]]
        doc["assignments"] = [AssignmentDoc(**a) for a in doc["assignments"]]
        return TargetedResponse(**doc)

    @app.get("/api/employees/{employee_id}/risk", response_model=EmployeeRisk)
    def employee_risk(employee_id: str):
        idx = state.row_index.get(employee_id)
        if idx is None:
            raise HTTPException(
                status_code=404,
                detail={"code": "unknown_id", "message": f"no employee {employee_id!r}",
                        "errors": []},
            )
        thr = state.bundle.model.threshold
        baseline = float(state.baseline_probs[idx])
        single = state.prediction.subset([idx])
        programs = []
        assigned = None
        best = None
        for p in state.menu:
            prob = float(predict_proba(state.bundle.model, apply_policy(single, p))[0])
            flips = baseline >= thr and prob < thr
            programs.append(ProgramRisk(program=p.name, probability=prob, flips=flips))
            if flips and (best is None or prob < best):
                best = prob
                assigned = p.name
        return EmployeeRisk(
            id=employee_id,
            baseline_probability=baseline,
            flagged=baseline >= thr,
            threshold=thr,
            programs=programs,
            assigned=assigned,
        )

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
