import numpy as np
import pytest
from hypothesis import given, strategies as st

from complier_dml.dataset import IVDataset, load_csv, partition_folds, save_csv
from complier_dml.errors import ConfigError, DataValidationError, ParseError, SchemaError


def make(n=6):
    return IVDataset(np.arange(n, dtype=float), np.array([0, 1] * (n // 2), float),
                     np.array([1, 0] * (n // 2), float), np.ones((n, 1)))


def test_valid_dataset_is_readonly():
    data = make()
    assert data.n == 6 and data.k == 1
    with pytest.raises(ValueError):
        data.y[0] = 3.0


def test_nonbinary_treatment_names_row():
    with pytest.raises(DataValidationError, match="row 2"):
        IVDataset(np.zeros(3), np.array([0, 2, 1.0]), np.zeros(3), np.ones((3, 1)))


def test_nonfinite_rejected():
    with pytest.raises(DataValidationError):
        IVDataset(np.array([0, np.nan, 1.0]), np.zeros(3), np.zeros(3), np.ones((3, 1)))


def test_with_instrument_swaps_z():
    data = make()
    other = data.with_instrument(1 - data.z)
    assert np.array_equal(other.z, 1 - data.z)
    assert np.array_equal(other.y, data.y)


@given(st.integers(4, 300), st.integers(2, 10), st.integers(0, 2**32 - 1))
def test_partition_is_a_partition(n, L, seed):
    if n < 2 * L:
        with pytest.raises(ConfigError):
            partition_folds(n, L, seed)
        return
    folds = partition_folds(n, L, seed)
    idx = np.concatenate([folds.indices(l) for l in range(L)])
    assert np.array_equal(np.sort(idx), np.arange(n))
    sizes = folds.sizes()
    assert sizes.max() - sizes.min() <= 1
    for l in range(L):
        assert np.intersect1d(folds.indices(l), folds.complement(l)).size == 0
    assert np.array_equal(folds.assignments, partition_folds(n, L, seed).assignments)


def test_one_fold_rejected():
    with pytest.raises(ConfigError):
        partition_folds(100, 1, 0)


def test_csv_roundtrip(tmp_path, rng):
    n = 25
    data = IVDataset(rng.normal(size=n), rng.integers(0, 2, n).astype(float),
                     rng.integers(0, 2, n).astype(float), rng.normal(size=(n, 2)), ("a", "b"))
    path = tmp_path / "d.csv"
    save_csv(data, path)
    back = load_csv(path)
    assert back.covariate_names == ("a", "b")
    for f in ("y", "d", "z", "x"):
        assert np.array_equal(getattr(back, f), getattr(data, f))


def test_schema_mapping(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("out,treat,inst,age,noise\n1.5,1,1,30,0\n2.5,0,0,40,1\n")
    data = load_csv(path, {"y": "out", "d": "treat", "z": "inst", "x": ["age"]})
    assert data.covariate_names == ("age",)
    assert data.y.tolist() == [1.5, 2.5]


def test_missing_file(tmp_path):
    with pytest.raises(DataValidationError):
        load_csv(tmp_path / "nope.csv")


def test_missing_column(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("y,d,x\n1,1,0\n")
    with pytest.raises(SchemaError):
        load_csv(path)


def test_bad_cell_reports_row_and_column(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("y,d,z,x\n1,1,0,3\n2,0,1,abc\n")
    with pytest.raises(ParseError, match=r"row 2.*'x'"):
        load_csv(path)


def test_nonbinary_instrument_in_file(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("y,d,z,x\n1,1,0.5,3\n")
    with pytest.raises(DataValidationError, match="row 1"):
        load_csv(path)
