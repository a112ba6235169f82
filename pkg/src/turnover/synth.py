"""Synthetic employee populations with a planted, configurable turnover mechanism.

Labels are drawn from a logistic model over the generated covariates:

    logit_i = intercept + sum of level weights + sum of interaction weights + noise_i
    Terminated  iff  u_i < sigmoid(logit_i)

where u_i are per-row uniform draws. The draws (covariates, uniforms, noise)
are fixed by the seed and reused across weight settings, so raising a level's
weight can only ever turn Active rows Terminated, never the reverse. The
intercept is calibrated by bisection until the empirical Terminated share
lands within +/-0.03 of the configured base rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import (
    CATEGORICAL,
    NUMERIC,
    ORDINAL_BAND,
    Dataset,
    EmployeeRecord,
    FeatureSpec,
    Label,
    Schema,
)


class GeneratorError(Exception):
    pass


@dataclass(frozen=True)
class LevelMarginal:
    """Draw a categorical/ordinal value from explicit level probabilities."""

    probs: dict[str, float]

    def __post_init__(self):
        total = sum(self.probs.values())
        if not math.isclose(total, 1.0, abs_tol=1e-9):
            raise GeneratorError(f"level probabilities sum to {total}, not 1")


@dataclass(frozen=True)
class NormalMarginal:
    mean: float
    sd: float
    lo: float | None = None
    hi: float | None = None


@dataclass(frozen=True)
class UniformMarginal:
    lo: float
    hi: float


Marginal = LevelMarginal | NormalMarginal | UniformMarginal


@dataclass(frozen=True)
class Interaction:
    """Extra log-odds applied when two specific levels co-occur."""

    a_feature: str
    a_level: str
    b_feature: str
    b_level: str
    weight: float


@dataclass(frozen=True)
class ManagerBlock:
    """Manager-pool wiring: manager features are drawn once per manager and
    copied to every report, and team features are derived from actual team
    composition, so team-level columns stay internally consistent."""

    manager_features: tuple[str, ...]
    mean_team_size: int = 8
    team_size_feature: str | None = None
    performance_feature: str | None = None
    high_level: str = "High"
    low_level: str = "Low"
    team_high_share_feature: str | None = None
    team_low_share_feature: str | None = None


@dataclass(frozen=True)
class GeneratorConfig:
    n: int
    base_rate: float
    schema: Schema
    marginals: dict[str, Marginal]
    effect_weights: dict[str, dict[str, float]] = field(default_factory=dict)
    interactions: tuple[Interaction, ...] = ()
    noise_scale: float = 0.0
    seed: int = 0
    manager_block: ManagerBlock | None = None

    def __post_init__(self):
        if self.n < 1:
            raise GeneratorError(f"population size must be positive, got {self.n}")
        if not (0.0 < self.base_rate < 1.0):
            raise GeneratorError(f"base_rate must be in (0,1), got {self.base_rate}")
        if self.noise_scale < 0:
            raise GeneratorError("noise_scale must be >= 0")
        names = set(self.schema.feature_names)
        for fname, levels in self.effect_weights.items():
            spec = self.schema.feature(fname) if fname in names else None
            if spec is None:
                raise GeneratorError(f"effect weight references unknown feature {fname!r}")
            for level in levels:
                if level not in spec.domain:
                    raise GeneratorError(
                        f"effect weight references unknown level {level!r} of {fname!r}"
                    )
        for it in self.interactions:
            for fname, level in ((it.a_feature, it.a_level), (it.b_feature, it.b_level)):
                if fname not in names:
                    raise GeneratorError(f"interaction references unknown feature {fname!r}")
                if level not in self.schema.feature(fname).domain:
                    raise GeneratorError(
                        f"interaction references unknown level {level!r} of {fname!r}"
                    )
        for fname in self.marginals:
            if fname not in names:
                raise GeneratorError(f"marginal for unknown feature {fname!r}")


def _draw_marginal(rng: np.random.Generator, spec: FeatureSpec, marg: Marginal, size: int):
    if isinstance(marg, LevelMarginal):
        levels = list(marg.probs)
        for lv in levels:
            if lv not in spec.domain:
                raise GeneratorError(f"marginal level {lv!r} not declared on {spec.name!r}")
        probs = np.array([marg.probs[lv] for lv in levels])
        return [levels[i] for i in rng.choice(len(levels), size=size, p=probs / probs.sum())]
    if isinstance(marg, NormalMarginal):
        vals = rng.normal(marg.mean, marg.sd, size=size)
        lo = marg.lo if marg.lo is not None else -np.inf
        hi = marg.hi if marg.hi is not None else np.inf
        return np.clip(vals, lo, hi).tolist()
    if isinstance(marg, UniformMarginal):
        return rng.uniform(marg.lo, marg.hi, size=size).tolist()
    raise GeneratorError(f"unsupported marginal for {spec.name!r}")


@dataclass
class PopulationDraw:
    """All randomness of one generated population, before labels.

    Holding covariates, uniforms, and noise separately lets labels be
    recomputed under different weights/intercepts with the draws fixed.
    """

    values: list[dict[str, str | float]]
    years: list[int]
    uniforms: np.ndarray
    noise: np.ndarray

    def logits(self, cfg: GeneratorConfig, intercept: float) -> np.ndarray:
        score = np.full(len(self.values), intercept, dtype=float)
        for i, vals in enumerate(self.values):
            s = 0.0
            for fname, levels in cfg.effect_weights.items():
                w = levels.get(vals[fname])
                if w is not None:
                    s += w
            for it in cfg.interactions:
                if vals[it.a_feature] == it.a_level and vals[it.b_feature] == it.b_level:
                    s += it.weight
            score[i] += s
        return score + self.noise

    def labels(self, cfg: GeneratorConfig, intercept: float) -> np.ndarray:
        probs = 1.0 / (1.0 + np.exp(-self.logits(cfg, intercept)))
        return self.uniforms < probs


def draw_population(cfg: GeneratorConfig) -> PopulationDraw:
    """Draw covariates and label randomness in a fixed, seed-determined order."""
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n
    values: list[dict[str, str | float]] = [{} for _ in range(n)]

    mb = cfg.manager_block
    manager_feature_names: set[str] = set(mb.manager_features) if mb else set()
    derived = set()
    if mb:
        for fn in (mb.team_size_feature, mb.team_high_share_feature, mb.team_low_share_feature):
            if fn:
                derived.add(fn)

    if mb:
        n_managers = max(1, n // mb.mean_team_size)
        pool: list[dict[str, str | float]] = [{} for _ in range(n_managers)]
        for spec in cfg.schema.features:
            if spec.name in manager_feature_names:
                if spec.name not in cfg.marginals:
                    raise GeneratorError(f"manager feature {spec.name!r} needs a marginal")
                drawn = _draw_marginal(rng, spec, cfg.marginals[spec.name], n_managers)
                for m, v in zip(pool, drawn):
                    m[spec.name] = v
        assignment = rng.integers(0, n_managers, size=n)
        for i in range(n):
            for fn in manager_feature_names:
                values[i][fn] = pool[assignment[i]][fn]

    for spec in cfg.schema.features:
        if spec.name in manager_feature_names or spec.name in derived:
            continue
        if spec.name not in cfg.marginals:
            raise GeneratorError(f"feature {spec.name!r} has no marginal distribution")
        drawn = _draw_marginal(rng, spec, cfg.marginals[spec.name], n)
        for i in range(n):
            values[i][spec.name] = drawn[i]

    if mb:
        counts = np.bincount(assignment, minlength=n_managers)
        if mb.performance_feature:
            high = np.zeros(n_managers)
            low = np.zeros(n_managers)
            for i in range(n):
                perf = values[i][mb.performance_feature]
                if perf == mb.high_level:
                    high[assignment[i]] += 1
                elif perf == mb.low_level:
                    low[assignment[i]] += 1
        for i in range(n):
            team = assignment[i]
            size = max(int(counts[team]), 1)
            if mb.team_size_feature:
                values[i][mb.team_size_feature] = float(counts[team])
            if mb.performance_feature and mb.team_high_share_feature:
                values[i][mb.team_high_share_feature] = float(high[team]) / size
            if mb.performance_feature and mb.team_low_share_feature:
                values[i][mb.team_low_share_feature] = float(low[team]) / size

    years = (rng.integers(0, 2, size=n) + 1).tolist()
    uniforms = rng.uniform(size=n)
    noise = rng.normal(size=n) * cfg.noise_scale
    return PopulationDraw(values, years, uniforms, noise)


def calibrate_intercept(
    cfg: GeneratorConfig, draw: PopulationDraw, tolerance: float = 0.03, max_iter: int = 100
) -> float:
    """Bisection on the intercept until the empirical share hits the target window."""
    lo, hi = -30.0, 30.0
    best_b, best_gap = 0.0, float("inf")
    for _ in range(max_iter):
        mid = (lo + hi) / 2.0
        share = float(draw.labels(cfg, mid).mean())
        gap = abs(share - cfg.base_rate)
        if gap < best_gap:
            best_b, best_gap = mid, gap
        if gap <= tolerance:
            return mid
        if share < cfg.base_rate:
            lo = mid
        else:
            hi = mid
    achieved = float(draw.labels(cfg, best_b).mean())
    raise GeneratorError(
        f"intercept calibration failed after {max_iter} iterations: "
        f"achieved rate {achieved:.4f}, target {cfg.base_rate:.4f}"
    )


def generate_population(cfg: GeneratorConfig, intercept: float | None = None) -> Dataset:
    """Generate a labeled population; deterministic for a fixed config.

    When intercept is None it is calibrated so the empirical Terminated share
    falls within +/-0.03 of cfg.base_rate.
    """
    draw = draw_population(cfg)
    if intercept is None:
        intercept = calibrate_intercept(cfg, draw)
    flags = draw.labels(cfg, intercept)
    width = max(4, len(str(cfg.n)))
    rows = tuple(
        EmployeeRecord(
            id=f"e{i + 1:0{width}d}",
            values=draw.values[i],
            label=Label.TERMINATED if flags[i] else Label.ACTIVE,
            year=draw.years[i],
        )
        for i in range(cfg.n)
    )
    return Dataset(cfg.schema, rows)


def scenario_schema() -> Schema:
    """Schema of the built-in turnover scenario."""
    return Schema(
        features=(
            FeatureSpec("location", CATEGORICAL,
                        levels=("Location1", "Location2", "Location3", "Remote"),
                        actionable=True),
            FeatureSpec("business_unit", CATEGORICAL,
                        levels=("Manufacturing", "Engineering", "Support")),
            FeatureSpec("hierarchy_level", CATEGORICAL,
                        levels=("Junior", "Senior", "Lead")),
            FeatureSpec("performance_rating", CATEGORICAL,
                        levels=("Low", "Middle", "High")),
            FeatureSpec("potential_rating", CATEGORICAL,
                        levels=("Low", "Middle", "High")),
            FeatureSpec("gender", CATEGORICAL, levels=("F", "M")),
            FeatureSpec("age", NUMERIC, unit="years"),
            FeatureSpec("company_tenure", ORDINAL_BAND,
                        bands=("0-2", "2-4", "4-7", "7+"), cut_points=(2.0, 4.0, 7.0)),
            FeatureSpec("time_in_position", ORDINAL_BAND,
                        bands=("0-2", "2-4", "4+"), cut_points=(2.0, 4.0),
                        actionable=True),
            FeatureSpec("manager_gender", CATEGORICAL, levels=("F", "M")),
            FeatureSpec("manager_age", NUMERIC, unit="years"),
            FeatureSpec("manager_company_tenure", ORDINAL_BAND,
                        bands=("0-2", "3-7", "8+"), cut_points=(3.0, 8.0),
                        actionable=True),
            FeatureSpec("manager_time_in_position", ORDINAL_BAND,
                        bands=("0-2", "2-4", "4+"), cut_points=(2.0, 4.0),
                        actionable=True),
            FeatureSpec("manager_performance", CATEGORICAL,
                        levels=("Low", "Middle", "High")),
            FeatureSpec("team_size", NUMERIC, unit="people"),
            FeatureSpec("team_high_performer_share", NUMERIC, unit="fraction"),
            FeatureSpec("team_low_performer_share", NUMERIC, unit="fraction"),
        ),
        label_name="status",
    )


def default_turnover_scenario(
    n: int = 1000, base_rate: float = 0.2, noise_scale: float = 0.15, seed: int = 7
) -> GeneratorConfig:
    """Built-in scenario with planted turnover drivers.

    The mechanism is deliberately non-additive: time in position is the
    strongest driver, but mostly through who it combines with. Low performers
    are at risk while new in position and settle once established; high
    potentials bolt after four years in the same role; long-entrenched
    managers churn their new joiners while retaining veterans; veterans
    re-rolled into a new position wobble; strong managers hold on to their
    weak performers. Location effects are near zero and demographics (gender,
    age, manager gender, team size) carry no signal at all, so the filter
    stage has something meaningful to drop.
    """
    schema = scenario_schema()
    marginals: dict[str, Marginal] = {
        "location": LevelMarginal({"Location1": 0.35, "Location2": 0.20, "Location3": 0.15, "Remote": 0.30}),
        "business_unit": LevelMarginal({"Manufacturing": 0.40, "Engineering": 0.35, "Support": 0.25}),
        "hierarchy_level": LevelMarginal({"Junior": 0.45, "Senior": 0.35, "Lead": 0.20}),
        "performance_rating": LevelMarginal({"Low": 0.30, "Middle": 0.50, "High": 0.20}),
        "potential_rating": LevelMarginal({"Low": 0.25, "Middle": 0.50, "High": 0.25}),
        "gender": LevelMarginal({"F": 0.45, "M": 0.55}),
        "age": NormalMarginal(38.0, 8.0, lo=21.0, hi=65.0),
        "company_tenure": LevelMarginal({"0-2": 0.30, "2-4": 0.25, "4-7": 0.25, "7+": 0.20}),
        "time_in_position": LevelMarginal({"0-2": 0.40, "2-4": 0.35, "4+": 0.25}),
        "manager_gender": LevelMarginal({"F": 0.40, "M": 0.60}),
        "manager_age": NormalMarginal(45.0, 7.0, lo=25.0, hi=65.0),
        "manager_company_tenure": LevelMarginal({"0-2": 0.25, "3-7": 0.45, "8+": 0.30}),
        "manager_time_in_position": LevelMarginal({"0-2": 0.30, "2-4": 0.35, "4+": 0.35}),
        "manager_performance": LevelMarginal({"Low": 0.15, "Middle": 0.60, "High": 0.25}),
    }
    effect_weights = {
        "performance_rating": {"Low": 0.5, "High": -0.25},
        "potential_rating": {"High": 0.2},
        "business_unit": {"Support": 0.25},
        "hierarchy_level": {"Lead": 0.2},
        "company_tenure": {"0-2": 0.25},
        "time_in_position": {"0-2": 0.5, "4+": 0.35},
        "manager_company_tenure": {"0-2": 0.25},
        "manager_time_in_position": {"2-4": 0.1, "4+": 0.25},
        "manager_performance": {"Low": 0.15},
        "location": {"Remote": 0.04, "Location3": 0.02},
    }
    interactions = (
        Interaction("performance_rating", "Low", "time_in_position", "0-2", 3.6),
        Interaction("performance_rating", "Low", "time_in_position", "2-4", -2.6),
        Interaction("performance_rating", "Low", "time_in_position", "4+", -1.4),
        Interaction("manager_time_in_position", "4+", "company_tenure", "0-2", 3.6),
        Interaction("manager_time_in_position", "4+", "company_tenure", "4-7", -2.0),
        Interaction("manager_time_in_position", "4+", "company_tenure", "7+", -2.0),
        Interaction("potential_rating", "High", "time_in_position", "4+", 3.4),
        Interaction("potential_rating", "High", "time_in_position", "0-2", -1.4),
        Interaction("business_unit", "Support", "manager_company_tenure", "0-2", 3.4),
        Interaction("business_unit", "Support", "manager_company_tenure", "8+", -2.0),
        Interaction("company_tenure", "7+", "time_in_position", "0-2", 3.2),
        Interaction("company_tenure", "7+", "time_in_position", "4+", -1.8),
        Interaction("performance_rating", "Low", "manager_performance", "High", -3.0),
    )
    manager_block = ManagerBlock(
        manager_features=(
            "manager_gender",
            "manager_age",
            "manager_company_tenure",
            "manager_time_in_position",
            "manager_performance",
        ),
        mean_team_size=8,
        team_size_feature="team_size",
        performance_feature="performance_rating",
        team_high_share_feature="team_high_performer_share",
        team_low_share_feature="team_low_performer_share",
    )
    return GeneratorConfig(
        n=n,
        base_rate=base_rate,
        schema=schema,
        marginals=marginals,
        effect_weights=effect_weights,
        interactions=interactions,
        noise_scale=noise_scale,
        seed=seed,
        manager_block=manager_block,
    )


def config_provenance(cfg: GeneratorConfig) -> dict:
    """Serializable record of how a population was generated.

    Marginal distributions are documented guesses, not estimates of any real
    workforce; the flag below says so explicitly.
    """

    def marg_doc(m: Marginal) -> dict:
        if isinstance(m, LevelMarginal):
            return {"kind": "levels", "probs": dict(sorted(m.probs.items()))}
        if isinstance(m, NormalMarginal):
            return {"kind": "normal", "mean": m.mean, "sd": m.sd, "lo": m.lo, "hi": m.hi}
        return {"kind": "uniform", "lo": m.lo, "hi": m.hi}

    return {
        "n": cfg.n,
        "base_rate": cfg.base_rate,
        "noise_scale": cfg.noise_scale,
        "seed": cfg.seed,
        "schema": cfg.schema.to_dict(),
        "marginals": {k: marg_doc(v) for k, v in sorted(cfg.marginals.items())},
        "marginals_are_documented_guesses": True,
        "effect_weights": {k: dict(sorted(v.items())) for k, v in sorted(cfg.effect_weights.items())},
        "interactions": [
            {
                "a_feature": it.a_feature,
                "a_level": it.a_level,
                "b_feature": it.b_feature,
                "b_level": it.b_level,
                "weight": it.weight,
            }
            for it in cfg.interactions
        ],
        "manager_block": (
            {
                "manager_features": list(cfg.manager_block.manager_features),
                "mean_team_size": cfg.manager_block.mean_team_size,
                "team_size_feature": cfg.manager_block.team_size_feature,
                "performance_feature": cfg.manager_block.performance_feature,
                "team_high_share_feature": cfg.manager_block.team_high_share_feature,
                "team_low_share_feature": cfg.manager_block.team_low_share_feature,
            }
            if cfg.manager_block
            else None
        ),
    }
