import json

import numpy as np
import pytest

from treecfx import Dataset, MinMaxScaler, SplitSpec, fit_scaler, load_csv, load_dataset, split


def write_csv(path, header, rows):
    lines = [",".join(header)] + [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_load_small_numeric_csv(tmp_path):
    path = write_csv(tmp_path / "d.csv", ["a", "b", "y"], [[0.1, 1.0, 0], [0.2, 2.0, 1], [0.3, 3.0, 0]])
    ds, summary = load_csv(path, label_column="y")
    assert ds.n_rows == 3
    assert ds.feature_names == ("a", "b")
    assert np.array_equal(ds.labels, [0, 1, 0])
    assert summary.n_rows_kept == 3
    assert summary.rejected_rows == []


def test_categorical_columns_dropped(tmp_path):
    path = write_csv(tmp_path / "d.csv", ["a", "color", "y"], [[0.1, "red", 0], [0.2, "blue", 1]])
    ds, _ = load_csv(path, label_column="y", categorical_columns=["color"])
    assert ds.feature_names == ("a",)


def test_constant_column_rejected(tmp_path):
    path = write_csv(tmp_path / "d.csv", ["a", "b", "y"], [[1.0, 5.0, 0], [2.0, 5.0, 1]])
    with pytest.raises(ValueError, match="degenerate feature 'b'"):
        load_csv(path, label_column="y")


def test_missing_label_column(tmp_path):
    path = write_csv(tmp_path / "d.csv", ["a", "b"], [[1.0, 2.0]])
    with pytest.raises(ValueError, match="label column"):
        load_csv(path, label_column="y")


def test_empty_file(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("", encoding="utf-8")
    with pytest.raises(ValueError, match="empty"):
        load_csv(path, label_column="y")


def test_unparseable_rows_rejected_with_numbers(tmp_path):
    path = write_csv(
        tmp_path / "d.csv",
        ["a", "y"],
        [[0.1, 0], ["oops", 1], [0.3, 1], ["bad", 0]],
    )
    ds, summary = load_csv(path, label_column="y")
    assert ds.n_rows == 2
    assert [n for n, _ in summary.rejected_rows] == [3, 5]


def test_missing_values_dropped_and_counted(tmp_path):
    path = write_csv(tmp_path / "d.csv", ["a", "y"], [[0.1, 0], ["", 1], [0.3, 1]])
    ds, summary = load_csv(path, label_column="y")
    assert ds.n_rows == 2
    assert summary.n_dropped_missing == 1


def test_label_transform_binarize(tmp_path):
    path = write_csv(tmp_path / "d.csv", ["a", "quality"], [[0.1, 5], [0.2, 7], [0.3, 9]])
    ds, _ = load_csv(path, label_column="quality",
                     label_transform={"kind": "binarize_ge", "threshold": 7})
    assert np.array_equal(ds.labels, [0, 1, 1])


def test_non_integer_label_without_transform_rejected(tmp_path):
    path = write_csv(tmp_path / "d.csv", ["a", "y"], [[0.1, 0.5], [0.2, 1.0], [0.4, 0.0]])
    ds, summary = load_csv(path, label_column="y")
    # the fractional label row is rejected, not silently truncated
    assert ds.n_rows == 2
    assert len(summary.rejected_rows) == 1


def test_schema_load_and_dataset(tmp_path):
    csv_path = write_csv(tmp_path / "wine.csv", ["acid", "sugar", "quality"],
                         [[1.0, 2.0, 5], [2.0, 4.0, 7], [3.0, 6.0, 8], [1.5, 2.5, 4]])
    schema = {
        "name": "wine",
        "label_column": "quality",
        "label_transform": {"kind": "binarize_ge", "threshold": 7},
        "categorical_columns": [],
        "csv_path": "wine.csv",
    }
    schema_path = tmp_path / "wine.schema.json"
    schema_path.write_text(json.dumps(schema), encoding="utf-8")
    ds, _ = load_dataset(schema_path)
    assert ds.name == "wine"
    assert np.array_equal(ds.labels, [0, 1, 1, 0])


def test_schema_missing_key(tmp_path):
    schema_path = tmp_path / "s.json"
    schema_path.write_text(json.dumps({"name": "x"}), encoding="utf-8")
    with pytest.raises(ValueError, match="label_column"):
        load_dataset(schema_path)


def test_scaler_basic_arithmetic():
    scaler = fit_scaler(np.array([[2.0], [4.0], [6.0]]))
    assert np.allclose(scaler.transform([[2.0], [4.0], [6.0]]).ravel(), [0.0, 0.5, 1.0])
    # test-split values outside the train range are not clipped
    assert scaler.transform([[8.0]])[0, 0] == pytest.approx(1.5)


def test_scaler_inverse_round_trip():
    rng = np.random.default_rng(3)
    train = rng.uniform(-5, 10, (40, 3))
    scaler = fit_scaler(train)
    rows = rng.uniform(-5, 10, (20, 3))
    back = scaler.inverse_transform(scaler.transform(rows))
    assert np.max(np.abs(back - rows)) < 1e-12


def test_scaler_before_fit_raises():
    scaler = MinMaxScaler()
    with pytest.raises(RuntimeError, match="before fit"):
        scaler.transform([[1.0]])


def test_scaler_degenerate_feature():
    with pytest.raises(ValueError, match="degenerate"):
        fit_scaler(np.array([[1.0, 2.0], [1.0, 3.0]]))


def test_scaler_persistence(tmp_path):
    scaler = fit_scaler(np.array([[2.0, 1.0], [4.0, 5.0]]))
    path = tmp_path / "scaler.json"
    scaler.save(path)
    loaded = MinMaxScaler.load(path)
    assert np.array_equal(loaded.mins, scaler.mins)
    assert np.array_equal(loaded.maxs, scaler.maxs)


def _dataset(n):
    rng = np.random.default_rng(7)
    return Dataset(
        name="d",
        features=rng.uniform(0, 1, (n, 2)),
        labels=rng.integers(0, 2, n),
        feature_names=("a", "b"),
    )


def test_split_sizes():
    train, test = split(_dataset(10), SplitSpec(seed=1))
    assert train.n_rows == 7
    assert test.n_rows == 3


def test_split_deterministic_and_partitioning():
    ds = _dataset(23)
    spec = SplitSpec(seed=42)
    t1, e1 = split(ds, spec)
    t2, e2 = split(ds, spec)
    assert np.array_equal(t1.features, t2.features)
    assert np.array_equal(e1.features, e2.features)
    combined = np.vstack([t1.features, e1.features])
    assert combined.shape[0] == ds.n_rows
    key = lambda m: sorted(map(tuple, m))
    assert key(combined) == key(ds.features)


def test_split_no_shuffle_keeps_order():
    ds = _dataset(10)
    train, test = split(ds, SplitSpec(seed=0, shuffle=False))
    assert np.array_equal(train.features, ds.features[:7])
    assert np.array_equal(test.features, ds.features[7:])


def test_split_spec_validation():
    with pytest.raises(ValueError):
        SplitSpec(train_fraction=1.0)
    with pytest.raises(ValueError):
        split(_dataset(1), SplitSpec())
