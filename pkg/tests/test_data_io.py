import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from npsvcpp.data import (
    Standardizer,
    fit_standardizer,
    format_csv_dataset,
    format_libsvm,
    load_dataset,
    make_dataset,
    parse_csv_dataset,
    parse_libsvm,
    split_dataset,
    standardize,
)
from npsvcpp.deep import DeepNPSVC
from npsvcpp.errors import (
    DatasetError,
    ModelFormatError,
    ModelVersionError,
    ParseError,
)
from npsvcpp.knpsvc import KernelNPSVC, TWSVM
from npsvcpp.model_io import load_model, save_model


# ----------------------------------------------------------------- libsvm

def test_libsvm_basic_line():
    ds = parse_libsvm("3 1:0.5 4:-2\n")
    assert ds.n_samples == 1 and ds.n_features == 4
    np.testing.assert_array_equal(ds.X[0], [0.5, 0.0, 0.0, -2.0])
    np.testing.assert_array_equal(ds.original_labels(), [3.0])
    np.testing.assert_array_equal(ds.y, [1])


def test_libsvm_bare_label_is_zero_row():
    ds = parse_libsvm("1 2:3.0\n2\n")
    np.testing.assert_array_equal(ds.X, [[0.0, 3.0], [0.0, 0.0]])
    np.testing.assert_array_equal(ds.original_labels(), [1.0, 2.0])


def test_libsvm_blank_lines_skipped():
    ds = parse_libsvm("\n1 1:1\n\n  \n2 1:2\n\n")
    assert ds.n_samples == 2
    np.testing.assert_array_equal(ds.X[:, 0], [1.0, 2.0])


def test_libsvm_label_remap_preserves_originals():
    ds = parse_libsvm("9 1:1\n5 1:2\n9 1:3\n")
    np.testing.assert_array_equal(ds.classes, [5.0, 9.0])
    np.testing.assert_array_equal(ds.y, [2, 1, 2])
    np.testing.assert_array_equal(ds.original_labels(), [9.0, 5.0, 9.0])


@pytest.mark.parametrize("text,line", [
    ("1 2:1 2:2\n", 1),            # repeated index
    ("1 1:1\n1 3:1 2:1\n", 2),     # descending index
    ("1 0:2\n", 1),                # index below 1
    ("abc 1:2\n", 1),              # non-numeric label
    ("1 1:zap\n", 1),              # non-numeric value
    ("1 x:2\n", 1),                # non-numeric index
    ("1 12\n", 1),                 # missing colon
    ("nan 1:2\n", 1),              # non-finite label
    ("1 1:inf\n", 1),              # non-finite value
])
def test_libsvm_parse_errors_carry_line_number(text, line):
    with pytest.raises(ParseError) as info:
        parse_libsvm(text)
    assert info.value.line_number == line
    assert f"line {line}:" in str(info.value)


def test_libsvm_round_trip_is_canonical():
    text = "2 1:0.25 3:-1.5\n1 2:7\n2 1:1e-3\n"
    ds = parse_libsvm(text)
    once = format_libsvm(ds)
    again = format_libsvm(parse_libsvm(once))
    assert once == again
    back = parse_libsvm(once)
    np.testing.assert_array_equal(back.X, ds.X)
    np.testing.assert_array_equal(back.y, ds.y)
    np.testing.assert_array_equal(back.classes, ds.classes)


@settings(max_examples=30, deadline=None)
@given(
    n=st.integers(1, 6),
    m=st.integers(1, 5),
    seed=st.integers(0, 2 ** 31 - 1),
)
def test_libsvm_round_trip_random(n, m, seed):
    rng = np.random.default_rng(seed)
    X = np.round(rng.standard_normal((n, m)) * 10, 6)
    y = rng.integers(1, 4, size=n)
    ds = make_dataset(X, y)
    back = parse_libsvm(format_libsvm(ds))
    np.testing.assert_array_equal(back.X, ds.X)
    np.testing.assert_array_equal(back.original_labels(), ds.original_labels())


# -------------------------------------------------------------------- csv

def test_csv_parse_and_feature_names():
    ds = parse_csv_dataset("label,height,width\n1,0.5,2\n2,-1,0\n")
    assert ds.feature_names == ["height", "width"]
    np.testing.assert_array_equal(ds.X, [[0.5, 2.0], [-1.0, 0.0]])
    np.testing.assert_array_equal(ds.original_labels(), [1.0, 2.0])


def test_csv_header_must_start_with_label():
    with pytest.raises(ParseError) as info:
        parse_csv_dataset("height,width\n1,2\n")
    assert info.value.line_number == 1


def test_csv_field_count_mismatch():
    with pytest.raises(ParseError) as info:
        parse_csv_dataset("label,a,b\n1,2,3\n1,2\n")
    assert info.value.line_number == 3


def test_csv_round_trip():
    ds = parse_csv_dataset("label,a,b\n7,0.125,-3\n9,1e-4,0\n7,2,2\n")
    back = parse_csv_dataset(format_csv_dataset(ds))
    np.testing.assert_array_equal(back.X, ds.X)
    np.testing.assert_array_equal(back.y, ds.y)
    assert back.feature_names == ds.feature_names


def test_load_dataset_dispatches_on_extension(tmp_path):
    csv_path = tmp_path / "d.csv"
    csv_path.write_text("label,a\n1,1\n2,2\n")
    svm_path = tmp_path / "d.libsvm"
    svm_path.write_text("1 1:1\n2 1:2\n")
    a = load_dataset(str(csv_path))
    b = load_dataset(str(svm_path))
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.y, b.y)
    assert a.feature_names == ["a"] and b.feature_names is None


def test_make_dataset_rejects_bad_inputs():
    with pytest.raises(DatasetError):
        make_dataset(np.zeros(3), np.zeros(3))
    with pytest.raises(DatasetError):
        make_dataset(np.zeros((3, 2)), np.zeros(2))
    with pytest.raises(DatasetError):
        make_dataset(np.array([[np.nan, 0.0]]), np.array([1.0]))


# ------------------------------------------------------------------ split

def _numbered_dataset(sizes):
    # feature 0 holds a unique id so split membership can be traced
    X, y = [], []
    count = 0
    for label, size in enumerate(sizes, start=1):
        for _ in range(size):
            X.append([float(count), float(label)])
            y.append(label)
            count += 1
    return make_dataset(np.asarray(X), np.asarray(y))


def test_split_counts_per_class():
    ds = _numbered_dataset([10, 10])
    train, test = split_dataset(ds, 0.6, seed=0)
    assert train.n_samples == 12 and test.n_samples == 8
    for code in (1, 2):
        assert int((train.y == code).sum()) == 6
        assert int((test.y == code).sum()) == 4


def test_split_is_disjoint_and_exhaustive():
    ds = _numbered_dataset([7, 5, 9])
    train, test = split_dataset(ds, 0.5, seed=3)
    ids_train = set(train.X[:, 0].astype(int))
    ids_test = set(test.X[:, 0].astype(int))
    assert ids_train.isdisjoint(ids_test)
    assert ids_train | ids_test == set(range(21))
    for row in range(train.n_samples):
        assert train.y[row] == int(train.X[row, 1])


def test_split_seed_determinism():
    ds = _numbered_dataset([8, 8])
    a_train, a_test = split_dataset(ds, 0.6, seed=11)
    b_train, b_test = split_dataset(ds, 0.6, seed=11)
    np.testing.assert_array_equal(a_train.X, b_train.X)
    np.testing.assert_array_equal(a_test.X, b_test.X)
    c_train, _ = split_dataset(ds, 0.6, seed=12)
    assert not np.array_equal(a_train.X, c_train.X)


def test_split_imbalanced_sizes():
    ds = _numbered_dataset([1000, 600, 400])
    train, test = split_dataset(ds, 0.6, seed=0)
    assert train.n_samples == 1200 and test.n_samples == 800
    np.testing.assert_array_equal(
        np.bincount(train.y)[1:], [600, 360, 240])


def test_split_keeps_one_sample_each_side():
    ds = _numbered_dataset([2, 10])
    train, test = split_dataset(ds, 0.9, seed=0)
    assert int((train.y == 1).sum()) == 1
    assert int((test.y == 1).sum()) == 1


def test_split_rejects_singleton_class():
    ds = _numbered_dataset([1, 5])
    with pytest.raises(DatasetError):
        split_dataset(ds, 0.5, seed=0)


@pytest.mark.parametrize("fraction", [0.0, 1.0, -0.3, 1.5])
def test_split_fraction_bounds(fraction):
    ds = _numbered_dataset([4, 4])
    with pytest.raises(ValueError):
        split_dataset(ds, fraction, seed=0)


# ---------------------------------------------------------- standardizing

def test_standardize_train_statistics():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((50, 3)) * np.array([2.0, 0.5, 9.0]) + 1.0
    ds = make_dataset(X, np.array([1, 2] * 25))
    train, test = split_dataset(ds, 0.6, seed=0)
    train_t, test_t, scaler = standardize(train, test)
    np.testing.assert_allclose(train_t.X.mean(axis=0), 0.0, atol=1e-10)
    np.testing.assert_allclose(train_t.X.std(axis=0), 1.0, atol=1e-10)
    np.testing.assert_allclose(
        test_t.X, (test.X - scaler.mean_) / scaler.scale_, atol=0)


def test_standardize_constant_feature_centered_only():
    X = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0], [4.0, 5.0]])
    scaler = fit_standardizer(X)
    assert scaler.scale_[1] == 1.0
    out = scaler.transform(X)
    np.testing.assert_allclose(out[:, 1], 0.0, atol=0)
    np.testing.assert_allclose(out[:, 0].std(), 1.0, atol=1e-12)


def test_standardize_without_test_split():
    ds = _numbered_dataset([3, 3])
    train_t, test_t, scaler = standardize(ds, None)
    assert test_t is None
    assert isinstance(scaler, Standardizer)


def test_standardize_empty_train_rejected():
    with pytest.raises(DatasetError):
        fit_standardizer(np.zeros((0, 2)))


# ------------------------------------------------------------ persistence

def _fitted_models(blobs_dataset):
    X, y = blobs_dataset
    X, y = X[:90], y[:90]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        knp = KernelNPSVC(max_outer=3, random_state=0).fit(X, y)
    tw = TWSVM().fit(X, y)
    deep = DeepNPSVC(epochs=5, random_state=0).fit(X, y)
    return {"knpsvc": knp, "twsvm": tw, "dnpsvc": deep}


@pytest.fixture(scope="module")
def fitted_models(blobs_dataset):
    return _fitted_models(blobs_dataset)


@pytest.mark.parametrize("kind", ["knpsvc", "twsvm", "dnpsvc"])
def test_model_round_trip_bit_identical(fitted_models, kind, blobs_dataset):
    X, _ = blobs_dataset
    est = fitted_models[kind]
    probes = X[np.random.default_rng(1).permutation(X.shape[0])[:100]]
    loaded, scaler = load_model(save_model(est))
    assert scaler is None
    np.testing.assert_array_equal(loaded.predict(probes), est.predict(probes))
    np.testing.assert_array_equal(loaded.decision_values(probes),
                                  est.decision_values(probes))
    np.testing.assert_array_equal(loaded.classes_, est.classes_)
    assert loaded.get_params() == est.get_params()


def test_model_round_trip_with_scaler(fitted_models):
    est = fitted_models["twsvm"]
    scaler = Standardizer(mean_=np.array([1.0, -2.0]),
                          scale_=np.array([3.0, 0.5]))
    loaded, back = load_model(save_model(est, scaler=scaler))
    np.testing.assert_array_equal(back.mean_, scaler.mean_)
    np.testing.assert_array_equal(back.scale_, scaler.scale_)


def test_model_truncated_payload(fitted_models):
    blob = save_model(fitted_models["twsvm"])
    with pytest.raises(ModelFormatError):
        load_model(blob[: len(blob) // 2])


def test_model_version_gate(fitted_models):
    import json

    doc = json.loads(save_model(fitted_models["twsvm"]))
    doc["format_version"] = 99
    with pytest.raises(ModelVersionError):
        load_model(json.dumps(doc).encode())


def test_model_unknown_kind(fitted_models):
    import json

    doc = json.loads(save_model(fitted_models["twsvm"]))
    doc["kind"] = "forest"
    with pytest.raises(ModelFormatError):
        load_model(json.dumps(doc).encode())


def test_model_corrupt_matrix_payload(fitted_models):
    import json

    doc = json.loads(save_model(fitted_models["twsvm"]))
    doc["predictor"]["coef"]["data"] = doc["predictor"]["coef"]["data"][:8]
    with pytest.raises(ModelFormatError):
        load_model(json.dumps(doc).encode())


def test_model_rejects_unfitted_estimator():
    with pytest.raises((ModelFormatError, AttributeError)):
        save_model(TWSVM())
