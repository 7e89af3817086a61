"""Loaders and the fixed preprocessing pipeline."""
import numpy as np
import pytest

from claire.data import (PreprocessReport, TabularDataset, apply_saved_preprocessing,
                         apply_scaler, fit_scaler, handle_missing, load_labeled_csv,
                         load_secom, load_tep, oversample_minority, run_pipeline,
                         stratified_split)
from claire.errors import DegenerateDataError, InputError, ShapeError, StateError
from claire.numerics import substream_seed

from conftest import make_dataset


def test_dataset_validation():
    with pytest.raises(InputError, match="labels must be 0 or 1"):
        make_dataset([[1.0, 2.0]], [2])
    with pytest.raises(ShapeError):
        make_dataset([[1.0, 2.0]], [0, 1])
    with pytest.raises(ShapeError):
        TabularDataset(np.zeros((2, 2)), np.zeros(2, dtype=int), ["only_one"])
    ds = make_dataset([[1.0], [2.0], [3.0]], [0, 1, 1])
    assert ds.class_counts() == {"failure": 1, "success": 2}


def test_load_secom_polarity_and_nan(tmp_path):
    feat = tmp_path / "f.txt"
    lab = tmp_path / "l.txt"
    feat.write_text("1.5 NaN 3.0\n4.0 5.0 nan\n7.0 8.0 9.0\n")
    lab.write_text('-1 "2008-01-01 10:00:00"\n1 "2008-01-02 11:00:00"\n-1 "2008-01-03 12:00:00"\n')
    ds = load_secom(str(feat), str(lab))
    assert ds.features.shape == (3, 3)
    assert np.isnan(ds.features[0, 1]) and np.isnan(ds.features[1, 2])
    # -1 in the file means pass -> success label 1; +1 means fail -> 0
    assert ds.labels.tolist() == [1, 0, 1]


def test_load_secom_errors(tmp_path):
    feat = tmp_path / "f.txt"
    lab = tmp_path / "l.txt"
    feat.write_text("1 2 3\n4 5\n")
    lab.write_text("-1 x\n-1 x\n")
    with pytest.raises(InputError, match="f.txt:2"):
        load_secom(str(feat), str(lab))
    feat.write_text("1 2 3\n4 5 6\n")
    lab.write_text("-1 x\n")
    with pytest.raises(InputError, match="label file has 1 rows"):
        load_secom(str(feat), str(lab))
    lab.write_text("-1 x\n3 x\n")
    with pytest.raises(InputError, match="must be -1 or 1"):
        load_secom(str(feat), str(lab))
    with pytest.raises(InputError):
        load_secom(str(tmp_path / "missing.txt"), str(lab))


def test_load_tep_header_and_selection(tmp_path):
    p = tmp_path / "tep.csv"
    p.write_text("v1,v2,fault\n"
                 "0.1,0.2,0\n"
                 "0.3,0.4,1\n"
                 "0.5,0.6,2\n"
                 "0.7,0.8,0\n")
    ds = load_tep(str(p))                      # all non-zero classes are failures
    assert ds.labels.tolist() == [1, 0, 0, 1]
    assert ds.feature_names == ["v1", "v2"]
    ds1 = load_tep(str(p), fault_classes=[1])  # class 2 rows drop out entirely
    assert ds1.features.shape == (3, 2)
    assert ds1.labels.tolist() == [1, 0, 1]
    with pytest.raises(InputError, match=r"fault classes \[9\] not present"):
        load_tep(str(p), fault_classes=[9])
    with pytest.raises(InputError, match="cannot be selected"):
        load_tep(str(p), fault_classes=[0, 1])


def test_load_tep_headerless_whitespace(tmp_path):
    p = tmp_path / "tep.dat"
    p.write_text("0.1 0.2 0\n0.3 0.4 1\n")
    ds = load_tep(str(p))
    assert ds.feature_names == ["var_0", "var_1"]
    assert ds.labels.tolist() == [1, 0]
    p.write_text("0.1 0.2 1.5\n")
    with pytest.raises(InputError, match="fault class must be an integer"):
        load_tep(str(p))


def test_load_labeled_csv(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,label,b\n1.0,1,2.0\n3.0,0,4.0\n")
    ds = load_labeled_csv(str(p))
    assert ds.feature_names == ["a", "b"]
    assert np.allclose(ds.features, [[1.0, 2.0], [3.0, 4.0]])
    assert ds.labels.tolist() == [1, 0]
    with pytest.raises(InputError, match="no column named 'y'"):
        load_labeled_csv(str(p), label_column="y")
    p.write_text("a,label\n1.0,5\n")
    with pytest.raises(InputError, match="label must be 0 or 1"):
        load_labeled_csv(str(p))


def test_handle_missing_drop_and_impute():
    x = np.array([
        [1.0, np.nan, 10.0],
        [2.0, np.nan, np.nan],
        [3.0, np.nan, 30.0],
        [4.0, 7.0, 40.0],
    ])
    ds = make_dataset(x, [0, 1, 0, 1], ["keep", "mostly_gone", "holey"])
    out, report = handle_missing(ds, drop_threshold=0.30)
    assert out.feature_names == ["keep", "holey"]
    assert [n for n, _ in report.dropped_columns] == ["mostly_gone"]
    assert report.dropped_columns[0][1] == pytest.approx(0.75)
    # median of observed {10, 30, 40} is 30
    assert out.features[1, 1] == pytest.approx(30.0)
    assert [n for n, _ in report.imputed_columns] == ["holey"]
    assert not np.isnan(out.features).any()


def test_handle_missing_threshold_is_strict():
    # exactly at the threshold stays; just above goes
    x = np.array([[np.nan], [1.0], [2.0], [3.0]])        # 25% missing
    ds = make_dataset(x, [0, 1, 0, 1])
    out, _ = handle_missing(ds, drop_threshold=0.25)
    assert out.n_features == 1

    x2 = np.hstack([x, np.ones((4, 1))])
    ds2 = make_dataset(x2, [0, 1, 0, 1])
    out2, report = handle_missing(ds2, drop_threshold=0.24)
    assert out2.feature_names == ["c1"]
    assert [n for n, _ in report.dropped_columns] == ["c0"]


def test_handle_missing_degenerate_cases():
    ds = make_dataset([[np.nan], [np.nan]], [0, 1])
    with pytest.raises(DegenerateDataError, match="every column"):
        handle_missing(ds, drop_threshold=0.5)
    # at threshold 1.0 nothing can be dropped, so the all-NaN column
    # survives and fails at the imputation stage instead
    with pytest.raises(DegenerateDataError, match="no\nobserved values".replace("\n", " ")):
        handle_missing(ds, drop_threshold=1.0)
    with pytest.raises(InputError):
        handle_missing(ds, drop_threshold=1.5)


def test_scaler_round_trip_and_clipping():
    train = make_dataset([[0.0, 5.0], [10.0, 5.0]], [0, 1])
    state = fit_scaler(train)
    scaled = apply_scaler(state, train)
    assert np.allclose(scaled.features[:, 0], [0.0, 1.0])
    assert np.allclose(scaled.features[:, 1], [0.5, 0.5])   # constant column
    # out-of-range test values clip into [0, 1]
    test = make_dataset([[-5.0, 7.0], [20.0, 3.0]], [0, 1], ["c0", "c1"])
    out = apply_scaler(state, test)
    assert out.features.min() >= 0.0 and out.features.max() <= 1.0
    assert np.allclose(out.features[:, 0], [0.0, 1.0])


def test_scaler_guards():
    train = make_dataset([[0.0], [1.0]], [0, 1])
    with pytest.raises(StateError):
        apply_scaler(type(fit_scaler(train))(), train)     # unfitted state
    test_tagged = TabularDataset(np.zeros((2, 1)), np.zeros(2, dtype=int), ["c0"],
                                 provenance="test")
    with pytest.raises(InputError, match="test-tagged"):
        fit_scaler(test_tagged)
    holey = make_dataset([[np.nan], [1.0]], [0, 1])
    with pytest.raises(InputError, match="NaN"):
        fit_scaler(holey)


def test_stratified_split_counts_and_determinism():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(100, 3))
    labels = np.array([0] * 20 + [1] * 80)
    ds = make_dataset(x, labels)
    train, test = stratified_split(ds, 0.2, seed=5)
    assert test.class_counts() == {"failure": 4, "success": 16}
    assert train.class_counts() == {"failure": 16, "success": 64}
    assert train.provenance == "train" and test.provenance == "test"
    train2, test2 = stratified_split(ds, 0.2, seed=5)
    assert np.array_equal(test.features, test2.features)
    t3 = stratified_split(ds, 0.2, seed=6)[1]
    assert not np.array_equal(test.features, t3.features)


def test_stratified_split_within_one_sample():
    x = np.arange(10)[:, None].astype(float)
    ds = make_dataset(x, [0] * 7 + [1] * 3)
    train, test = stratified_split(ds, 0.25, seed=1)
    # 7 * 0.25 rounds to 2, 3 * 0.25 rounds to 1
    assert abs(test.class_counts()["failure"] - 7 * 0.25) <= 1
    assert abs(test.class_counts()["success"] - 3 * 0.25) <= 1
    assert test.n_rows + train.n_rows == 10


def test_stratified_split_errors():
    ds = make_dataset([[1.0], [2.0], [3.0]], [0, 1, 1])
    with pytest.raises(DegenerateDataError):
        stratified_split(ds, 0.5)
    ds2 = make_dataset([[1.0], [2.0], [3.0], [4.0]], [0, 0, 1, 1])
    with pytest.raises(InputError):
        stratified_split(ds2, 1.5)


def test_oversample_balances_exactly():
    x = np.arange(14)[:, None].astype(float)
    ds = TabularDataset(x, np.array([1] * 10 + [0] * 4), ["c0"], provenance="train")
    out = oversample_minority(ds, seed=3)
    assert out.class_counts() == {"failure": 10, "success": 10}
    # originals preserved in order, duplicates appended at the end
    assert np.array_equal(out.features[:14], x)
    dup_rows = out.features[14:]
    assert all(row in x[10:] for row in dup_rows)
    again = oversample_minority(ds, seed=3)
    assert np.array_equal(out.features, again.features)


def test_oversample_guards_and_balanced_copy():
    balanced = TabularDataset(np.zeros((4, 1)), np.array([0, 0, 1, 1]), ["c0"],
                              provenance="train")
    out = oversample_minority(balanced)
    assert out.n_rows == 4
    assert out.features is not balanced.features
    test_tagged = TabularDataset(np.zeros((4, 1)), np.array([0, 0, 1, 1]), ["c0"],
                                 provenance="test")
    with pytest.raises(InputError):
        oversample_minority(test_tagged)
    single = TabularDataset(np.zeros((3, 1)), np.ones(3, dtype=int), ["c0"],
                            provenance="train")
    with pytest.raises(DegenerateDataError):
        oversample_minority(single)


def _messy_dataset():
    rng = np.random.default_rng(7)
    n = 120
    x = rng.normal(size=(n, 5)) * [1.0, 2.0, 0.5, 1.0, 3.0]
    x[:, 3] = 2.5                                      # constant column
    x[rng.random(n) < 0.5, 4] = np.nan                 # mostly-missing column
    x[rng.random(n) < 0.1, 1] = np.nan                 # lightly-missing column
    labels = (rng.random(n) < 0.75).astype(int)
    return make_dataset(x, labels)


def test_run_pipeline_invariants():
    ds = _messy_dataset()
    prep = run_pipeline(ds, drop_threshold=0.30, test_fraction=0.2, seed=9)
    for split in (prep.train, prep.test):
        assert not np.isnan(split.features).any()
        assert split.features.min() >= 0.0 and split.features.max() <= 1.0
    counts = prep.train.class_counts()
    assert counts["failure"] == counts["success"]      # exact balance
    assert prep.report.class_counts_after == counts
    assert "c4" in [n for n, _ in prep.report.dropped_columns]
    assert set(prep.medians) == set(prep.kept_names)
    assert prep.original_names == ds.feature_names
    # split replays from the same substream seed
    handled, _ = handle_missing(ds, 0.30)
    train, test = stratified_split(handled, 0.2, substream_seed(9, "split"))
    assert np.array_equal(test.labels, prep.test.labels)


def test_apply_saved_preprocessing_replays_pipeline():
    # saved-state replay on the full raw matrix must equal imputing then
    # scaling directly: imputing at the median leaves the median unchanged,
    # so the stored medians reproduce handle_missing exactly
    ds = _messy_dataset()
    prep = run_pipeline(ds, seed=9)
    replay = apply_saved_preprocessing(ds.features, prep.original_names,
                                       prep.kept_names, prep.medians, prep.scaler)
    handled, _ = handle_missing(ds, 0.30)
    expected = apply_scaler(prep.scaler, handled).features
    assert np.array_equal(replay, expected)
    # and the pipeline's own test rows are a subset of that replay
    train, test = stratified_split(handled, 0.2, substream_seed(9, "split"))
    scaled_test = apply_scaler(prep.scaler, test).features
    assert np.array_equal(scaled_test, prep.test.features)


def test_apply_saved_preprocessing_width_check():
    ds = _messy_dataset()
    prep = run_pipeline(ds, seed=9)
    with pytest.raises(ShapeError, match="expects 5 raw columns"):
        apply_saved_preprocessing(np.zeros((2, 4)), prep.original_names,
                                  prep.kept_names, prep.medians, prep.scaler)
    one_row = apply_saved_preprocessing(ds.features[0], prep.original_names,
                                        prep.kept_names, prep.medians, prep.scaler)
    assert one_row.shape == (1, len(prep.kept_names))


def test_preprocess_report_json_round_trip():
    report = PreprocessReport(
        dropped_columns=[("a", 0.5)], imputed_columns=[("b", 1.25)],
        class_counts_before={"failure": 3, "success": 9},
        class_counts_after={"failure": 9, "success": 9})
    doc = report.to_json_dict()
    assert doc["outlier_detection"] == "not applied"
    back = PreprocessReport.from_json_dict(doc)
    assert back == report
