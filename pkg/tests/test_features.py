import math

import numpy as np
import pytest

from turnover.data import (
    CATEGORICAL,
    NUMERIC,
    Dataset,
    EmployeeRecord,
    FeatureSpec,
    Label,
    Schema,
)
from turnover.features import (
    BinningRule,
    ContingencyTable,
    DECLARED_BANDS,
    Discretizer,
    EQUAL_FREQUENCY,
    FeatureError,
    discretize,
    entropy_nats,
    mutual_information,
    rank_and_filter,
)
from turnover.synth import default_turnover_scenario, generate_population


def mi_direct(counts) -> float:
    """Independent cell-by-cell evaluation of the MI definition (oracle)."""
    counts = [[float(c) for c in row] for row in counts]
    total = sum(sum(row) for row in counts)
    px = [sum(row) / total for row in counts]
    py = [sum(counts[i][j] for i in range(len(counts))) / total for j in range(len(counts[0]))]
    mi = 0.0
    for i in range(len(counts)):
        for j in range(len(counts[0])):
            p = counts[i][j] / total
            if p > 0:
                mi += p * math.log(p / (px[i] * py[j]))
    return mi


def table(counts):
    c = np.asarray(counts)
    return ContingencyTable(
        tuple(f"x{i}" for i in range(c.shape[0])),
        tuple(f"y{j}" for j in range(c.shape[1])),
        c,
        feature="f",
    )


class TestMutualInformation:
    def test_deterministic_dependence_is_ln2(self):
        assert mutual_information(table([[50, 0], [0, 50]])).mi_nats == pytest.approx(
            math.log(2), abs=1e-12
        )

    def test_constant_x_is_zero(self):
        assert mutual_information(table([[20, 80]])).mi_nats == 0.0

    def test_frozen_derived_value(self):
        # value computed by the independent oracle before implementation
        assert mutual_information(table([[30, 10], [10, 50]])).mi_nats == pytest.approx(
            0.1777408838419502, abs=1e-12
        )

    def test_matches_oracle_on_random_tables(self):
        rng = np.random.default_rng(42)
        for _ in range(300):
            rows = int(rng.integers(1, 7))
            counts = rng.integers(0, 101, size=(rows, 2))
            if counts.sum() == 0:
                counts[0, 0] = 1
            got = mutual_information(table(counts)).mi_nats
            assert got == pytest.approx(mi_direct(counts), abs=1e-12)
            assert got >= 0.0
            assert mutual_information(table(counts).transposed()).mi_nats == pytest.approx(
                got, abs=1e-12
            )
            hx = entropy_nats(counts.sum(axis=1))
            hy = entropy_nats(counts.sum(axis=0))
            assert got <= min(hx, hy) + 1e-12

    def test_merging_levels_never_increases_mi(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            counts = rng.integers(0, 50, size=(4, 2))
            counts[0, 0] += 1
            merged = np.vstack([counts[0] + counts[1], counts[2:]])
            assert (
                mutual_information(table(merged)).mi_nats
                <= mutual_information(table(counts)).mi_nats + 1e-12
            )

    def test_label_shuffle_drives_mi_down(self):
        rng = np.random.default_rng(3)
        x = np.repeat([0, 1], 100)
        y = np.concatenate([rng.uniform(size=100) < 0.8, rng.uniform(size=100) < 0.2])

        def tab(xv, yv):
            counts = np.zeros((2, 2), dtype=int)
            for a, b in zip(xv, yv):
                counts[a, int(b)] += 1
            return mutual_information(table(counts)).mi_nats

        dependent = tab(x, y)
        shuffled = [tab(x, rng.permutation(y)) for _ in range(100)]
        assert float(np.mean(shuffled)) < dependent

    def test_empty_table_rejected(self):
        with pytest.raises(FeatureError):
            table([[0, 0]])


class TestDiscretize:
    def _numeric_ds(self, values, extra_feature=False):
        feats = [FeatureSpec("v", NUMERIC)]
        if extra_feature:
            feats.append(FeatureSpec("c", CATEGORICAL, levels=("a", "b")))
        schema = Schema(tuple(feats))
        rows = []
        for i, v in enumerate(values):
            vals = {"v": float(v)}
            if extra_feature:
                vals["c"] = "a" if i % 2 else "b"
            rows.append(EmployeeRecord(f"e{i}", vals, Label.ACTIVE, 1))
        return Dataset(schema, tuple(rows))

    def test_median_split(self):
        ds = self._numeric_ds(range(1, 11))
        out = discretize(ds, [BinningRule("v", EQUAL_FREQUENCY, bins=2)])
        bands = [r.values["v"] for r in out.rows]
        assert bands[:5] == [bands[0]] * 5
        assert bands[5:] == [bands[5]] * 5
        assert bands[0] != bands[5]
        assert out.schema.feature("v").kind == "ordinal_band"

    def test_categorical_passthrough(self):
        ds = self._numeric_ds(range(1, 11), extra_feature=True)
        out = discretize(ds, [BinningRule("v", EQUAL_FREQUENCY, bins=2)])
        assert [r.values["c"] for r in out.rows] == [r.values["c"] for r in ds.rows]
        assert out.schema.feature("c") == ds.schema.feature("c")

    def test_constant_column_rejected(self):
        ds = self._numeric_ds([3.0] * 8)
        with pytest.raises(FeatureError):
            discretize(ds, [BinningRule("v", EQUAL_FREQUENCY, bins=2)])

    def test_missing_rule_rejected(self):
        ds = self._numeric_ds(range(5))
        with pytest.raises(FeatureError):
            discretize(ds, [])

    def test_declared_bands(self):
        ds = self._numeric_ds([1, 2, 3, 10, 20])
        out = discretize(ds, [BinningRule("v", DECLARED_BANDS, cut_points=(5.0,))])
        bands = [r.values["v"] for r in out.rows]
        assert bands == ["<=5", "<=5", "<=5", ">5", ">5"]

    def test_edges_reused_on_other_datasets(self):
        train = self._numeric_ds(range(1, 11))
        disc = Discretizer.fit(train, [BinningRule("v", EQUAL_FREQUENCY, bins=2)])
        other = self._numeric_ds([0.0, 100.0])
        out = disc.apply(other)
        assert out.rows[0].values["v"] == disc.labels["v"][0]
        assert out.rows[1].values["v"] == disc.labels["v"][-1]


class TestRankAndFilter:
    def _label_copies(self, n_features, n_rows=40):
        feats = tuple(
            FeatureSpec(f"f{i:02d}", CATEGORICAL, levels=("yes", "no"))
            for i in range(n_features)
        )
        schema = Schema(feats)
        rows = []
        for i in range(n_rows):
            label = Label.TERMINATED if i % 2 else Label.ACTIVE
            v = "yes" if label is Label.TERMINATED else "no"
            rows.append(
                EmployeeRecord(f"e{i}", {f.name: v for f in feats}, label, 1)
            )
        return Dataset(schema, tuple(rows))

    def test_keep_fraction_count(self):
        ds = self._label_copies(20)
        scores, selected = rank_and_filter(ds, 0.6)
        assert len(selected) == 12
        assert len(scores) == 20

    def test_tie_break_lexicographic(self):
        ds = self._label_copies(5)
        _, selected = rank_and_filter(ds, 0.6)
        assert selected == ["f00", "f01", "f02"]

    def test_unknown_label_rejected(self, small_schema):
        from conftest import make_rows

        rows = make_rows(small_schema, 10, seed=2)
        rows[3] = EmployeeRecord(rows[3].id, rows[3].values, Label.UNKNOWN, 1)
        ds = Dataset(small_schema, tuple(rows))
        disc = Discretizer.fit(
            ds,
            [BinningRule("age", EQUAL_FREQUENCY, bins=2),
             BinningRule("team_size", EQUAL_FREQUENCY, bins=2)],
        )
        with pytest.raises(FeatureError):
            rank_and_filter(disc.apply(ds), 0.6)

    def test_planted_low_performance_selected_across_seeds(self):
        hits = 0
        for seed in range(1, 11):
            cfg = default_turnover_scenario(n=600, seed=seed)
            ds = generate_population(cfg)
            rules = [
                BinningRule(f.name, EQUAL_FREQUENCY, bins=4)
                for f in ds.schema.features
                if f.kind == NUMERIC
            ]
            banded = discretize(ds, rules)
            _, selected = rank_and_filter(banded, 0.6)
            hits += "performance_rating" in selected
        assert hits >= 9
