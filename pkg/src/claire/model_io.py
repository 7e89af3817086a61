"""Model bundle serialization: one self-contained JSON document.

Format version "claire-model/1". Floats are serialized with Python's
shortest round-trip repr, so save -> load reproduces parameters bit for
bit and loaded models give identical outputs.
"""
from __future__ import annotations

import json

import numpy as np

from .data import PreprocessReport, ScalerState
from .errors import InputError
from .network import (Activation, BatchNormState, DenseLayer, DropoutState,
                      LossWeights, NetworkParams)
from .svm import KernelSpec, SvmModel
from .training import EpochLog, TrainConfig, TrainedModel

MODEL_FORMAT = "claire-model/1"


def _array(a: np.ndarray) -> list:
    return np.asarray(a, dtype=np.float64).tolist()


def _layer_dict(layer: DenseLayer) -> dict:
    doc = {
        "weights": _array(layer.weights),
        "bias": _array(layer.bias),
        "activation": {"kind": layer.activation.kind, "slope": layer.activation.slope},
        "batch_norm": None,
        "dropout_keep": layer.dropout.keep if layer.dropout is not None else None,
    }
    if layer.batch_norm is not None:
        bn = layer.batch_norm
        doc["batch_norm"] = {
            "gamma": _array(bn.gamma), "beta": _array(bn.beta),
            "running_mean": _array(bn.running_mean), "running_var": _array(bn.running_var),
            "momentum": bn.momentum, "epsilon": bn.epsilon,
        }
    return doc


def _layer_from(doc: dict) -> DenseLayer:
    bn = None
    if doc["batch_norm"] is not None:
        b = doc["batch_norm"]
        bn = BatchNormState(gamma=np.array(b["gamma"]), beta=np.array(b["beta"]),
                            running_mean=np.array(b["running_mean"]),
                            running_var=np.array(b["running_var"]),
                            momentum=b["momentum"], epsilon=b["epsilon"])
    drop = DropoutState(doc["dropout_keep"]) if doc["dropout_keep"] is not None else None
    act = Activation(doc["activation"]["kind"], doc["activation"]["slope"])
    return DenseLayer(weights=np.array(doc["weights"]), bias=np.array(doc["bias"]),
                      activation=act, batch_norm=bn, dropout=drop)


def _network_dict(params: NetworkParams) -> dict:
    return {
        "input_dim": params.input_dim,
        "latent_dim": params.latent_dim,
        "encoder": [_layer_dict(l) for l in params.encoder],
        "decoder": [_layer_dict(l) for l in params.decoder],
        "classifier": _layer_dict(params.classifier),
    }


def _network_from(doc: dict) -> NetworkParams:
    return NetworkParams(encoder=[_layer_from(l) for l in doc["encoder"]],
                         decoder=[_layer_from(l) for l in doc["decoder"]],
                         classifier=_layer_from(doc["classifier"]),
                         input_dim=doc["input_dim"], latent_dim=doc["latent_dim"])


def _svm_dict(model: SvmModel) -> dict:
    return {
        "kernel": {"kind": model.kernel.kind, "gamma": model.kernel.gamma,
                   "degree": model.kernel.degree, "coef0": model.kernel.coef0},
        "c": model.c,
        "support_vectors": _array(model.support_vectors),
        "dual_coef": _array(model.dual_coef),
        "support_indices": [int(i) for i in model.support_indices],
        "bias": model.bias,
        "converged": model.converged,
        "n_sweeps": model.n_sweeps,
    }


def _svm_from(doc: dict) -> SvmModel:
    k = doc["kernel"]
    return SvmModel(kernel=KernelSpec(k["kind"], gamma=k["gamma"], degree=k["degree"],
                                      coef0=k["coef0"]),
                    c=doc["c"],
                    support_vectors=np.array(doc["support_vectors"], dtype=np.float64),
                    dual_coef=np.array(doc["dual_coef"], dtype=np.float64),
                    support_indices=np.array(doc["support_indices"], dtype=np.int64),
                    bias=doc["bias"], converged=doc["converged"],
                    n_sweeps=doc["n_sweeps"])


def _train_config_dict(cfg: TrainConfig | None) -> dict | None:
    if cfg is None:
        return None
    return {
        "mode": cfg.mode, "epochs": cfg.epochs, "batch_size": cfg.batch_size,
        "learning_rate": cfg.learning_rate, "latent_dim": cfg.latent_dim,
        "hidden_widths": list(cfg.hidden_widths),
        "loss_weights": {"latent_weight": cfg.weights.latent_weight,
                         "classifier_weight": cfg.weights.classifier_weight,
                         "entropy_weight": cfg.weights.entropy_weight},
        "corruption_std": cfg.corruption_std, "dropout_keep": cfg.dropout_keep,
        "bn_momentum": cfg.bn_momentum, "bn_epsilon": cfg.bn_epsilon,
        "seed": cfg.seed,
    }


def _train_config_from(doc: dict | None) -> TrainConfig | None:
    if doc is None:
        return None
    lw = doc["loss_weights"]
    return TrainConfig(mode=doc["mode"], epochs=doc["epochs"], batch_size=doc["batch_size"],
                       learning_rate=doc["learning_rate"], latent_dim=doc["latent_dim"],
                       hidden_widths=list(doc["hidden_widths"]),
                       weights=LossWeights(latent_weight=lw["latent_weight"],
                                           classifier_weight=lw["classifier_weight"],
                                           entropy_weight=lw["entropy_weight"]),
                       corruption_std=doc["corruption_std"],
                       dropout_keep=doc["dropout_keep"], bn_momentum=doc["bn_momentum"],
                       bn_epsilon=doc["bn_epsilon"], seed=doc["seed"])


def bundle_dict(model: TrainedModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "mode": model.mode,
        "seed": model.seed,
        "train_config": _train_config_dict(model.train_config),
        "preprocessing": {
            "original_feature_names": list(model.original_names),
            "kept_feature_names": list(model.kept_names),
            "medians": {name: float(model.medians[name]) for name in model.kept_names},
            "scaler": {"col_min": _array(model.scaler.col_min),
                       "col_max": _array(model.scaler.col_max)},
            "report": model.report.to_json_dict(),
        },
        "network": _network_dict(model.network) if model.network is not None else None,
        "svm": _svm_dict(model.svm),
        "epoch_logs": [{"epoch": e.epoch, "recon": e.recon, "latent": e.latent,
                        "clf": e.clf, "ent": e.ent, "total": e.total}
                       for e in model.epoch_logs],
    }


def save_bundle(path: str, model: TrainedModel) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(bundle_dict(model), fh, indent=1)
        fh.write("\n")


def load_bundle(path: str) -> TrainedModel:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read model bundle {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"model bundle {path} is not valid JSON: {exc}") from exc
    if doc.get("format") != MODEL_FORMAT:
        raise InputError(
            f"model bundle {path} has format {doc.get('format')!r}, expected {MODEL_FORMAT!r}")
    pre = doc["preprocessing"]
    scaler = ScalerState(col_min=np.array(pre["scaler"]["col_min"], dtype=np.float64),
                         col_max=np.array(pre["scaler"]["col_max"], dtype=np.float64),
                         fitted=True)
    return TrainedModel(
        mode=doc["mode"], seed=doc["seed"],
        network=_network_from(doc["network"]) if doc["network"] is not None else None,
        svm=_svm_from(doc["svm"]),
        train_config=_train_config_from(doc["train_config"]),
        original_names=list(pre["original_feature_names"]),
        kept_names=list(pre["kept_feature_names"]),
        medians={k: float(v) for k, v in pre["medians"].items()},
        scaler=scaler,
        report=PreprocessReport.from_json_dict(pre["report"]),
        epoch_logs=[EpochLog(epoch=e["epoch"], recon=e["recon"], latent=e["latent"],
                             clf=e["clf"], ent=e["ent"], total=e["total"])
                    for e in doc.get("epoch_logs", [])],
    )
