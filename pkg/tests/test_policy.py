import numpy as np
import pytest

from turnover.balance import ResamplingMethod, rebalance
from turnover.data import Dataset, EmployeeRecord, Label
from turnover.features import BinningRule, Discretizer, EQUAL_FREQUENCY
from turnover.models import ForestParams, TreeParams, fit
from turnover.policy import (
    EQ,
    FeatureRewrite,
    MatchTest,
    Policy,
    PolicyError,
    apply_policy,
    builtin_programs,
    render_mass_table,
    render_targeted_table,
    simulate_mass,
    simulate_targeted,
    validate_policy,
)
from turnover.synth import default_turnover_scenario, generate_population

T = Label.TERMINATED
A = Label.ACTIVE


@pytest.fixture(scope="module")
def planted():
    """A trained forest over the planted scenario plus a prediction set."""
    cfg = default_turnover_scenario(n=700, seed=19)
    ds = generate_population(cfg)
    rules = [
        BinningRule(f.name, EQUAL_FREQUENCY, bins=4)
        for f in ds.schema.features
        if f.kind == "numeric"
    ]
    disc = Discretizer.fit(ds, rules)
    banded = disc.apply(ds)
    wds = rebalance(banded, ResamplingMethod("up", seed=3))
    selected = [
        "location", "business_unit", "performance_rating", "potential_rating",
        "company_tenure", "time_in_position", "manager_company_tenure",
        "manager_time_in_position",
    ]
    model = fit(
        wds, "random_forest",
        ForestParams(n_trees=40, mtry=3, tree=TreeParams(max_depth=6, min_leaf=5.0)),
        selected, seed=11,
    )
    pred_cfg = default_turnover_scenario(n=400, seed=77)
    prediction = disc.apply(generate_population(pred_cfg))
    # prediction sets carry no outcome information
    prediction = Dataset(
        prediction.schema,
        tuple(EmployeeRecord(r.id, r.values, Label.UNKNOWN, r.year) for r in prediction.rows),
    )
    return model, prediction, banded.schema


class TestBuiltins:
    def test_all_five_present_for_scenario_schema(self, planted):
        _, _, schema = planted
        menu = builtin_programs(schema)
        assert [p.name for p in menu] == ["P1", "P2", "P3", "P4", "P5"]
        for p in menu:
            assert validate_policy(p, schema) == []

    def test_p1_moves_remote_only(self, planted):
        model, prediction, schema = planted
        p1 = next(p for p in builtin_programs(schema) if p.name == "P1")
        out = apply_policy(prediction, p1)
        for before, after in zip(prediction.rows, out.rows):
            if before.values["location"] == "Remote":
                assert after.values["location"] == "Location1"
            else:
                assert after.values["location"] == before.values["location"]
            for k in before.values:
                if k != "location":
                    assert after.values[k] == before.values[k]

    def test_p3_idempotent_on_compliant_rows(self, planted):
        _, prediction, schema = planted
        p3 = next(p for p in builtin_programs(schema) if p.name == "P3")
        once = apply_policy(prediction, p3)
        twice = apply_policy(once, p3)
        assert once == twice

    def test_missing_feature_omits_program(self, small_schema):
        menu = builtin_programs(small_schema)
        assert [p.name for p in menu] == ["P1", "P2"]


class TestApplyPolicy:
    def test_identity_policy(self, planted):
        _, prediction, _ = planted
        out = apply_policy(prediction, Policy(name="identity"))
        assert out == prediction

    def test_rewrites_apply_in_order(self, planted):
        _, prediction, schema = planted
        # first rewrite moves Remote to Location3, the second moves Location3 on
        chained = Policy(
            name="chain",
            rewrites=(
                FeatureRewrite(
                    match=(MatchTest("location", EQ, value="Remote"),),
                    assign=(("location", "Location3"),),
                ),
                FeatureRewrite(
                    match=(MatchTest("location", EQ, value="Location3"),),
                    assign=(("location", "Location2"),),
                ),
            ),
        )
        row = next(r for r in prediction.rows if r.values["location"] == "Remote")
        single = prediction.subset([prediction.rows.index(row)])
        out = apply_policy(single, chained)
        assert out.rows[0].values["location"] == "Location2"

    def test_labels_ids_preserved(self, planted):
        _, prediction, schema = planted
        p4 = next(p for p in builtin_programs(schema) if p.name == "P4")
        out = apply_policy(prediction, p4)
        assert out.ids() == prediction.ids()
        assert [r.label for r in out.rows] == [r.label for r in prediction.rows]
        assert len(out) == len(prediction)

    def test_invalid_assignment_rejected(self, planted):
        _, prediction, _ = planted
        bad = Policy(
            name="bad",
            rewrites=(
                FeatureRewrite(match=(), assign=(("performance_rating", "High"),)),
            ),
        )
        with pytest.raises(PolicyError, match="not actionable"):
            apply_policy(prediction, bad)


class TestValidate:
    def test_non_actionable_assignment_named(self, planted):
        _, _, schema = planted
        bad = Policy(
            name="x",
            rewrites=(FeatureRewrite(match=(), assign=(("gender", "F"),)),),
        )
        issues = validate_policy(bad, schema)
        assert any("gender" in i.message for i in issues)

    def test_unknown_level_named(self, planted):
        _, _, schema = planted
        bad = Policy(
            name="x",
            rewrites=(FeatureRewrite(match=(), assign=(("location", "Mars"),)),),
        )
        issues = validate_policy(bad, schema)
        assert any("Mars" in i.message for i in issues)

    def test_document_roundtrip(self, planted):
        _, _, schema = planted
        for p in builtin_programs(schema):
            assert Policy.from_dict(p.to_dict()) == p


class TestSimulateMass:
    def test_identity_post_equals_baseline_bitexact(self, planted):
        model, prediction, _ = planted
        report = simulate_mass(model, prediction, Policy(name="identity"))
        assert report.post_leaver_share == report.baseline_leaver_share
        assert report.rows_touched == 0

    def test_zero_match_zero_touch(self, planted):
        model, prediction, schema = planted
        none_match = Policy(
            name="nobody",
            rewrites=(
                FeatureRewrite(
                    match=(MatchTest("location", EQ, value="Location2"),
                           MatchTest("location", EQ, value="Location3")),
                    assign=(("location", "Location1"),),
                ),
            ),
        )
        report = simulate_mass(model, prediction, none_match)
        assert report.rows_touched == 0
        assert report.post_leaver_share == report.baseline_leaver_share

    def test_p5_strictly_reduces_leaver_share(self, planted):
        model, prediction, schema = planted
        p5 = next(p for p in builtin_programs(schema) if p.name == "P5")
        report = simulate_mass(model, prediction, p5)
        assert report.post_leaver_share < report.baseline_leaver_share
        assert report.hold_leaver_share is not None
        assert report.hold_leaver_share <= report.baseline_leaver_share

    def test_render_table_shape(self, planted):
        model, prediction, schema = planted
        reports = [simulate_mass(model, prediction, p) for p in builtin_programs(schema)]
        text = render_mass_table(reports)
        lines = text.strip().splitlines()
        assert len(lines) == 7  # header + baseline + P1..P5
        assert "None" in lines[1]


class TestSimulateTargeted:
    def test_empty_menu(self, planted):
        model, prediction, _ = planted
        report = simulate_targeted(model, prediction, [])
        assert report.residual_leaver_share == report.baseline_leaver_share
        assert all(prog is None for _, prog in report.assignments)
        assert len(report.assignments) == report.flagged

    def test_full_menu_invariants(self, planted):
        model, prediction, schema = planted
        menu = builtin_programs(schema)
        report = simulate_targeted(model, prediction, menu)
        assert report.residual_leaver_share <= report.baseline_leaver_share
        # every flagged leaver appears exactly once
        assert len(report.assignments) == report.flagged
        assert len({rid for rid, _ in report.assignments}) == report.flagged
        # shares account for the whole population
        unflagged = 1.0 - report.baseline_leaver_share
        total = unflagged + sum(s.population_share for s in report.shares)
        assert total == pytest.approx(1.0, abs=1e-12)
        text = render_targeted_table(report)
        assert "P4" in text

    def test_assignment_minimizes_risk(self, planted):
        model, prediction, schema = planted
        menu = builtin_programs(schema)
        report = simulate_targeted(model, prediction, menu)
        from turnover.models import predict_proba

        by_id = dict(report.assignments)
        flagged_ids = [rid for rid, _ in report.assignments]
        idx = {r.id: i for i, r in enumerate(prediction.rows)}
        flagged_ds = prediction.subset([idx[rid] for rid in flagged_ids])
        post = np.empty((len(flagged_ids), len(menu)))
        for j, p in enumerate(menu):
            post[:, j] = predict_proba(model, apply_policy(flagged_ds, p))
        for i, rid in enumerate(flagged_ids):
            assigned = by_id[rid]
            flips = post[i] < model.threshold
            if assigned is None:
                assert not flips.any()
            else:
                j = [p.name for p in menu].index(assigned)
                assert flips[j]
                assert post[i, j] == np.min(post[i][flips])

    def test_menu_monotonicity(self, planted):
        model, prediction, schema = planted
        menu = builtin_programs(schema)
        base = simulate_targeted(model, prediction, menu[:2])
        more = simulate_targeted(model, prediction, menu[:3])
        assert more.residual_leaver_share <= base.residual_leaver_share

    def test_single_row_flip(self, planted):
        model, prediction, schema = planted
        menu = builtin_programs(schema)
        full = simulate_targeted(model, prediction, menu)
        flipped = next(
            (rid for rid, prog in full.assignments if prog is not None), None
        )
        assert flipped is not None
        idx = {r.id: i for i, r in enumerate(prediction.rows)}
        single = prediction.subset([idx[flipped]])
        report = simulate_targeted(model, single, menu)
        assert report.residual_leaver_share == 0.0
        assert report.flagged == 1
