import numpy as np
import pytest

from turnover.data import (
    CATEGORICAL,
    NUMERIC,
    ORDINAL_BAND,
    Dataset,
    EmployeeRecord,
    FeatureSpec,
    Label,
    Schema,
)


@pytest.fixture
def small_schema():
    return Schema(
        features=(
            FeatureSpec("location", CATEGORICAL,
                        levels=("Location1", "Location2", "Location3", "Remote"),
                        actionable=True),
            FeatureSpec("performance", CATEGORICAL, levels=("Low", "Middle", "High")),
            FeatureSpec("tenure_band", ORDINAL_BAND, bands=("0-2", "2-4", "4+"),
                        cut_points=(2.0, 4.0), actionable=True),
            FeatureSpec("age", NUMERIC, unit="years"),
            FeatureSpec("team_size", NUMERIC, unit="people"),
        ),
        label_name="status",
    )


def make_rows(schema, n, seed=0, positive_rate=0.3):
    """Random valid rows for a schema; labels independent of features."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        values = {}
        for spec in schema.features:
            if spec.kind == NUMERIC:
                values[spec.name] = float(np.round(rng.uniform(0, 50), 3))
            else:
                values[spec.name] = spec.domain[int(rng.integers(len(spec.domain)))]
        label = Label.TERMINATED if rng.uniform() < positive_rate else Label.ACTIVE
        rows.append(EmployeeRecord(f"e{i:04d}", values, label, int(rng.integers(1, 3))))
    return rows


@pytest.fixture
def small_dataset(small_schema):
    return Dataset(small_schema, tuple(make_rows(small_schema, 60, seed=1)))
