"""Declarative retention programs and counterfactual simulation.

A policy is an ordered list of feature rewrites; each rewrite pairs a match
predicate (conjunction of equality / set / numeric-range tests) with
assignments to actionable features. Mass simulation rescores the whole
population after a rewrite; targeted simulation tries every menu program on
each flagged leaver alone and assigns the cheapest flip (lowest post-rewrite
risk, menu order on ties).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data import NUMERIC, Dataset, EmployeeRecord, Schema
from .models import TrainedModel, predict_proba

log = logging.getLogger(__name__)


class PolicyError(Exception):
    pass


@dataclass(frozen=True)
class ValidationIssue:
    field: str
    message: str


EQ = "eq"
IN = "in"
RANGE = "range"


@dataclass(frozen=True)
class MatchTest:
    feature: str
    op: str
    value: str | None = None
    values: tuple[str, ...] = ()
    lo: float | None = None
    hi: float | None = None

    def __post_init__(self):
        if self.op not in (EQ, IN, RANGE):
            raise PolicyError(f"unknown match op {self.op!r}")

    def matches(self, record: EmployeeRecord) -> bool:
        v = record.values[self.feature]
        if self.op == EQ:
            return v == self.value
        if self.op == IN:
            return v in self.values
        lo = self.lo if self.lo is not None else -float("inf")
        hi = self.hi if self.hi is not None else float("inf")
        return lo <= float(v) <= hi


@dataclass(frozen=True)
class FeatureRewrite:
    match: tuple[MatchTest, ...]
    assign: tuple[tuple[str, str | float], ...]

    def matches(self, record: EmployeeRecord) -> bool:
        return all(t.matches(record) for t in self.match)


@dataclass(frozen=True)
class Policy:
    name: str
    rewrites: tuple[FeatureRewrite, ...] = ()
    description: str = ""
    hold_match: tuple[MatchTest, ...] | None = None  # alternative hard-hold reading

    def to_dict(self) -> dict:
        def test_doc(t: MatchTest) -> dict:
            doc = {"feature": t.feature, "op": t.op}
            if t.op == EQ:
                doc["value"] = t.value
            elif t.op == IN:
                doc["values"] = list(t.values)
            else:
                doc["lo"] = t.lo
                doc["hi"] = t.hi
            return doc

        return {
            "name": self.name,
            "description": self.description,
            "rewrites": [
                {
                    "match": [test_doc(t) for t in rw.match],
                    "assign": [{"feature": f, "value": v} for f, v in rw.assign],
                }
                for rw in self.rewrites
            ],
            "hold_match": [test_doc(t) for t in self.hold_match] if self.hold_match else None,
        }

    @staticmethod
    def from_dict(doc: dict) -> "Policy":
        def parse_test(td: dict, where: str) -> MatchTest:
            if not isinstance(td, dict) or "feature" not in td or "op" not in td:
                raise PolicyError(f"{where}: each match test needs 'feature' and 'op'")
            op = td["op"]
            if op == EQ:
                return MatchTest(td["feature"], EQ, value=td.get("value"))
            if op == IN:
                return MatchTest(td["feature"], IN, values=tuple(td.get("values", ())))
            if op == RANGE:
                return MatchTest(td["feature"], RANGE, lo=td.get("lo"), hi=td.get("hi"))
            raise PolicyError(f"{where}: unknown op {op!r}")

        if not isinstance(doc, dict) or not doc.get("name"):
            raise PolicyError("policy document needs a non-empty 'name'")
        rewrites = []
        for i, rw in enumerate(doc.get("rewrites", [])):
            match = tuple(
                parse_test(td, f"rewrites[{i}].match[{j}]")
                for j, td in enumerate(rw.get("match", []))
            )
            assign = []
            for j, ad in enumerate(rw.get("assign", [])):
                if "feature" not in ad or "value" not in ad:
                    raise PolicyError(
                        f"rewrites[{i}].assign[{j}]: needs 'feature' and 'value'"
                    )
                assign.append((ad["feature"], ad["value"]))
            rewrites.append(FeatureRewrite(match, tuple(assign)))
        hold = doc.get("hold_match")
        hold_match = (
            tuple(parse_test(td, f"hold_match[{j}]") for j, td in enumerate(hold))
            if hold
            else None
        )
        return Policy(
            name=doc["name"],
            rewrites=tuple(rewrites),
            description=doc.get("description", ""),
            hold_match=hold_match,
        )


def validate_policy(policy: Policy, schema: Schema) -> list[ValidationIssue]:
    """Field-level validation against a schema; empty list means valid."""
    issues: list[ValidationIssue] = []
    names = set(schema.feature_names)

    def check_tests(tests, where):
        for j, t in enumerate(tests):
            loc = f"{where}[{j}]"
            if t.feature not in names:
                issues.append(ValidationIssue(loc, f"unknown feature {t.feature!r}"))
                continue
            spec = schema.feature(t.feature)
            if t.op == RANGE and spec.kind != NUMERIC:
                issues.append(
                    ValidationIssue(loc, f"range test needs a numeric feature, {t.feature!r} is {spec.kind}")
                )
            if t.op == EQ and spec.kind != NUMERIC and t.value not in spec.domain:
                issues.append(
                    ValidationIssue(loc, f"value {t.value!r} is not a level of {t.feature!r}")
                )
            if t.op == IN and spec.kind != NUMERIC:
                for v in t.values:
                    if v not in spec.domain:
                        issues.append(
                            ValidationIssue(loc, f"value {v!r} is not a level of {t.feature!r}")
                        )

    for i, rw in enumerate(policy.rewrites):
        check_tests(rw.match, f"rewrites[{i}].match")
        for j, (fname, value) in enumerate(rw.assign):
            loc = f"rewrites[{i}].assign[{j}]"
            if fname not in names:
                issues.append(ValidationIssue(loc, f"unknown feature {fname!r}"))
                continue
            spec = schema.feature(fname)
            if not spec.actionable:
                issues.append(
                    ValidationIssue(loc, f"feature {fname!r} is not actionable")
                )
            if spec.kind == NUMERIC:
                try:
                    float(value)
                except (TypeError, ValueError):
                    issues.append(ValidationIssue(loc, f"value {value!r} is not numeric"))
            elif value not in spec.domain:
                issues.append(
                    ValidationIssue(loc, f"value {value!r} is not a level of {fname!r}")
                )
    if policy.hold_match:
        check_tests(policy.hold_match, "hold_match")
    return issues


def builtin_programs(schema: Schema) -> list[Policy]:
    """The five stock retention programs, adapted to the given schema.

    Programs referencing features or levels the schema does not declare are
    omitted with a logged warning.
    """
    names = set(schema.feature_names)

    def has_levels(feature: str, *levels: str) -> bool:
        if feature not in names:
            return False
        domain = schema.feature(feature).domain
        return all(lv in domain for lv in levels)

    candidates: list[Policy] = []

    if has_levels("location", "Remote", "Location1"):
        candidates.append(
            Policy(
                name="P1",
                description="Remote jobs reassigned to Location1",
                rewrites=(
                    FeatureRewrite(
                        match=(MatchTest("location", EQ, value="Remote"),),
                        assign=(("location", "Location1"),),
                    ),
                ),
            )
        )
    else:
        log.warning("builtin P1 omitted: schema lacks location levels Remote/Location1")

    if has_levels("location", "Location3", "Location1"):
        candidates.append(
            Policy(
                name="P2",
                description="Location3 jobs reassigned to Location1",
                rewrites=(
                    FeatureRewrite(
                        match=(MatchTest("location", EQ, value="Location3"),),
                        assign=(("location", "Location1"),),
                    ),
                ),
            )
        )
    else:
        log.warning("builtin P2 omitted: schema lacks location levels Location3/Location1")

    if has_levels("manager_company_tenure", "0-2", "3-7"):
        candidates.append(
            Policy(
                name="P3",
                description="Managers gain one internal role before managing (tenure 0-2 -> 3-7)",
                rewrites=(
                    FeatureRewrite(
                        match=(MatchTest("manager_company_tenure", EQ, value="0-2"),),
                        assign=(("manager_company_tenure", "3-7"),),
                    ),
                ),
            )
        )
    else:
        log.warning("builtin P3 omitted: schema lacks manager_company_tenure bands 0-2/3-7")

    if "manager_time_in_position" in names:
        bands = schema.feature("manager_time_in_position").domain
        if len(bands) >= 2 and bands[0] == "0-2":
            candidates.append(
                Policy(
                    name="P4",
                    description="Manager rotation keeps manager time in position below 2 years",
                    rewrites=(
                        FeatureRewrite(
                            match=(MatchTest("manager_time_in_position", IN, values=tuple(bands[1:])),),
                            assign=(("manager_time_in_position", "0-2"),),
                        ),
                    ),
                )
            )
        else:
            log.warning("builtin P4 omitted: manager_time_in_position bands do not start at 0-2")
    else:
        log.warning("builtin P4 omitted: schema lacks manager_time_in_position")

    if "time_in_position" in names:
        bands = schema.feature("time_in_position").domain
        if len(bands) >= 2 and bands[0] == "0-2":
            candidates.append(
                Policy(
                    name="P5",
                    description="Bind newly assigned people past their first 2 years in position",
                    rewrites=(
                        FeatureRewrite(
                            match=(MatchTest("time_in_position", EQ, value=bands[0]),),
                            assign=(("time_in_position", bands[1]),),
                        ),
                    ),
                    hold_match=(MatchTest("time_in_position", EQ, value=bands[0]),),
                )
            )
        else:
            log.warning("builtin P5 omitted: time_in_position bands do not start at 0-2")
    else:
        log.warning("builtin P5 omitted: schema lacks time_in_position")

    return candidates


def _apply_counting(ds: Dataset, p: Policy) -> tuple[Dataset, int]:
    rows: list[EmployeeRecord] = []
    touched = 0
    for r in ds.rows:
        current = r
        changed = False
        for rw in p.rewrites:
            if rw.matches(current):
                updates = {f: v for f, v in rw.assign if current.values[f] != v}
                if updates:
                    current = current.with_values(updates)
                    changed = True
        rows.append(current)
        touched += changed
    return ds.replace_rows(rows), touched


def apply_policy(ds: Dataset, p: Policy) -> Dataset:
    """Apply each rewrite in order to every matching row.

    Ids, labels, and row count are preserved; only assigned features change.
    """
    issues = validate_policy(p, ds.schema)
    if issues:
        raise PolicyError(
            "invalid policy: " + "; ".join(f"{i.field}: {i.message}" for i in issues)
        )
    return _apply_counting(ds, p)[0]


@dataclass(frozen=True)
class PolicyImpactReport:
    policy: str
    baseline_leaver_share: float
    post_leaver_share: float
    rows_touched: int
    threshold: float
    population: int
    description: str = ""
    hold_leaver_share: float | None = None  # hard-hold reading, when declared

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "description": self.description,
            "baseline_leaver_share": self.baseline_leaver_share,
            "post_leaver_share": self.post_leaver_share,
            "rows_touched": self.rows_touched,
            "threshold": self.threshold,
            "population": self.population,
            "hold_leaver_share": self.hold_leaver_share,
        }


def simulate_mass(m: TrainedModel, prediction_set: Dataset, p: Policy) -> PolicyImpactReport:
    """Predicted leaver share before and after applying the policy to everyone."""
    issues = validate_policy(p, prediction_set.schema)
    if issues:
        raise PolicyError(
            "invalid policy: " + "; ".join(f"{i.field}: {i.message}" for i in issues)
        )
    n = len(prediction_set.rows)
    if n == 0:
        raise PolicyError("prediction set is empty")
    baseline_probs = predict_proba(m, prediction_set)
    flagged = baseline_probs >= m.threshold
    baseline = float(np.mean(flagged))
    rewritten, touched = _apply_counting(prediction_set, p)
    post = float(np.mean(predict_proba(m, rewritten) >= m.threshold))
    hold_share = None
    if p.hold_match is not None:
        held = np.array(
            [all(t.matches(r) for t in p.hold_match) for r in prediction_set.rows]
        )
        hold_share = float(np.mean(flagged & ~held))
    return PolicyImpactReport(
        policy=p.name,
        baseline_leaver_share=baseline,
        post_leaver_share=post,
        rows_touched=touched,
        threshold=m.threshold,
        population=n,
        description=p.description,
        hold_leaver_share=hold_share,
    )


@dataclass(frozen=True)
class ProgramShare:
    program: str  # policy name, or "None" for flagged rows no program flips
    population_share: float
    leaver_share: float
    count: int


@dataclass
class TargetedReport:
    baseline_leaver_share: float
    residual_leaver_share: float
    threshold: float
    population: int
    flagged: int
    shares: list[ProgramShare]
    assignments: list[tuple[str, str | None]]  # (employee id, program) in id order

    def to_dict(self) -> dict:
        return {
            "baseline_leaver_share": self.baseline_leaver_share,
            "residual_leaver_share": self.residual_leaver_share,
            "threshold": self.threshold,
            "population": self.population,
            "flagged": self.flagged,
            "shares": [
                {
                    "program": s.program,
                    "population_share": s.population_share,
                    "leaver_share": s.leaver_share,
                    "count": s.count,
                }
                for s in self.shares
            ],
            "assignments": [
                {"id": rid, "program": prog} for rid, prog in self.assignments
            ],
        }


def simulate_targeted(
    m: TrainedModel, prediction_set: Dataset, menu: list[Policy]
) -> TargetedReport:
    """Assign each flagged leaver the menu program that flips their prediction
    at the lowest post-rewrite risk; rows nothing flips are assigned None."""
    for p in menu:
        issues = validate_policy(p, prediction_set.schema)
        if issues:
            raise PolicyError(
                f"invalid policy {p.name!r}: "
                + "; ".join(f"{i.field}: {i.message}" for i in issues)
            )
    n = len(prediction_set.rows)
    if n == 0:
        raise PolicyError("prediction set is empty")
    baseline_probs = predict_proba(m, prediction_set)
    flagged_mask = baseline_probs >= m.threshold
    flagged_idx = np.nonzero(flagged_mask)[0]
    n_flagged = len(flagged_idx)

    assignment: dict[str, str | None] = {}
    counts = {p.name: 0 for p in menu}
    flips = 0
    if n_flagged and menu:
        flagged_ds = prediction_set.subset(flagged_idx.tolist())
        post = np.empty((n_flagged, len(menu)))
        for j, p in enumerate(menu):
            rewritten, _ = _apply_counting(flagged_ds, p)
            post[:, j] = predict_proba(m, rewritten)
        for i, row in enumerate(flagged_ds.rows):
            flipping = post[i] < m.threshold
            if flipping.any():
                masked = np.where(flipping, post[i], np.inf)
                j = int(np.argmin(masked))
                assignment[row.id] = menu[j].name
                counts[menu[j].name] += 1
                flips += 1
            else:
                assignment[row.id] = None
    else:
        for i in flagged_idx:
            assignment[prediction_set.rows[int(i)].id] = None

    none_count = n_flagged - flips
    shares = [
        ProgramShare(
            program="None",
            population_share=none_count / n,
            leaver_share=none_count / n_flagged if n_flagged else 0.0,
            count=none_count,
        )
    ]
    for p in menu:
        c = counts[p.name]
        shares.append(
            ProgramShare(
                program=p.name,
                population_share=c / n,
                leaver_share=c / n_flagged if n_flagged else 0.0,
                count=c,
            )
        )
    return TargetedReport(
        baseline_leaver_share=n_flagged / n,
        residual_leaver_share=(n_flagged - flips) / n,
        threshold=m.threshold,
        population=n,
        flagged=n_flagged,
        shares=shares,
        assignments=sorted(assignment.items()),
    )


def render_mass_table(reports: list[PolicyImpactReport]) -> str:
    """Mass-action summary: one baseline row plus one row per program."""
    lines = [f"{'program':<8} {'description':<55} {'% of leavers':>12}"]
    if reports:
        r0 = reports[0]
        lines.append(f"{'None':<8} {'No retention policy':<55} {100 * r0.baseline_leaver_share:>11.1f}%")
    for r in reports:
        extra = (
            f" (hard-hold reading: {100 * r.hold_leaver_share:.1f}%)"
            if r.hold_leaver_share is not None
            else ""
        )
        lines.append(
            f"{r.policy:<8} {r.description:<55} {100 * r.post_leaver_share:>11.1f}%{extra}"
        )
    return "\n".join(lines) + "\n"


def render_targeted_table(report: TargetedReport) -> str:
    lines = [
        f"flagged at baseline: {report.flagged}/{report.population} "
        f"({100 * report.baseline_leaver_share:.1f}%)",
        f"residual leaver share: {100 * report.residual_leaver_share:.1f}%",
        "",
        f"{'action':<8} {'% of population':>16} {'% of flagged leavers':>21}",
    ]
    for s in report.shares:
        lines.append(
            f"{s.program:<8} {100 * s.population_share:>15.2f}% {100 * s.leaver_share:>20.2f}%"
        )
    return "\n".join(lines) + "\n"
