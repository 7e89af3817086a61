"""Bundle round trips: save -> load must preserve behavior bit for bit."""
import numpy as np
import pytest

from claire.data import run_pipeline, TabularDataset
from claire.errors import InputError
from claire.model_io import MODEL_FORMAT, bundle_dict, load_bundle, save_bundle
from claire.network import named_parameters
from claire.svm import KernelSpec
from claire.training import SvmConfig, TrainConfig, predict, train_pipeline


def _small_model(mode="CLAIRE", seed=17):
    rng = np.random.default_rng(seed)
    x = np.vstack([rng.normal(0.3, 0.06, (40, 4)), rng.normal(0.7, 0.06, (40, 4))])
    x[rng.uniform(size=80) < 0.1, 1] = np.nan
    labels = np.array([0] * 40 + [1] * 40, dtype=np.int64)
    ds = TabularDataset(x, labels, [f"m{j}" for j in range(4)])
    prepared = run_pipeline(ds, drop_threshold=0.3, test_fraction=0.25, seed=seed)
    cfg = TrainConfig(mode=mode, epochs=4, batch_size=16, latent_dim=3,
                      hidden_widths=[6], seed=seed)
    return train_pipeline(prepared, cfg, SvmConfig(kernel=KernelSpec.rbf()))


def test_round_trip_preserves_predictions_exactly(tmp_path):
    model = _small_model()
    path = str(tmp_path / "model.json")
    save_bundle(path, model)
    loaded = load_bundle(path)

    probe = np.random.default_rng(1).uniform(0.0, 1.0, (25, 4))
    assert np.array_equal(predict(model, probe), predict(loaded, probe))
    for (n1, p1), (n2, p2) in zip(named_parameters(model.network),
                                  named_parameters(loaded.network)):
        assert n1 == n2
        assert np.array_equal(p1, p2)                # bit identical, not just close
    assert np.array_equal(model.svm.dual_coef, loaded.svm.dual_coef)
    assert model.svm.bias == loaded.svm.bias
    assert model.svm.kernel == loaded.svm.kernel
    assert loaded.kept_names == model.kept_names
    assert loaded.medians == model.medians
    assert loaded.epoch_logs == model.epoch_logs
    assert loaded.train_config.weights == model.train_config.weights


def test_resave_is_byte_identical(tmp_path):
    model = _small_model()
    first = str(tmp_path / "a.json")
    second = str(tmp_path / "b.json")
    save_bundle(first, model)
    save_bundle(second, load_bundle(first))
    assert open(first, "rb").read() == open(second, "rb").read()


def test_rawsvm_bundle_has_no_network(tmp_path):
    model = _small_model(mode="RawSVM")
    path = str(tmp_path / "raw.json")
    save_bundle(path, model)
    doc = bundle_dict(model)
    assert doc["network"] is None
    assert doc["train_config"]["mode"] == "RawSVM"
    loaded = load_bundle(path)
    assert loaded.network is None
    assert loaded.epoch_logs == []
    probe = np.random.default_rng(2).uniform(0.0, 1.0, (10, 4))
    assert np.array_equal(predict(model, probe), predict(loaded, probe))


def test_format_and_parse_errors(tmp_path):
    bad_format = tmp_path / "wrong.json"
    bad_format.write_text('{"format": "claire-model/999"}')
    with pytest.raises(InputError, match="format"):
        load_bundle(str(bad_format))

    garbage = tmp_path / "garbage.json"
    garbage.write_text("{not json")
    with pytest.raises(InputError, match="not valid JSON"):
        load_bundle(str(garbage))

    with pytest.raises(InputError, match="cannot read"):
        load_bundle(str(tmp_path / "absent.json"))


def test_bundle_format_tag():
    assert bundle_dict(_small_model())["format"] == MODEL_FORMAT == "claire-model/1"
