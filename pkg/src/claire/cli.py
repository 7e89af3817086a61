"""Command-line interface.

Subcommands: preprocess, train, eval, explain, project. Every command
reads an optional JSON config (format "claire-config/1"), lets flags
override config values, and writes UTF-8 CSV/JSON files into the output
directory. No timestamps are written, so a command re-run with the same
config and seed reproduces its outputs byte for byte.

Exit codes: 0 success, 2 input or validation problem, 3 numeric
divergence during training, 4 internal invariant breach.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import traceback

import numpy as np

from . import data as data_mod
from .data import TabularDataset, stratified_split
from .errors import (ClaireError, ConditioningError, DegenerateDataError,
                     DivergenceError, InputError, NumericError, ShapeError, StateError)
from .evaluate import compute_metrics, lda_fit, project_export
from .explain import (class_conditional_importance, dependence_export, explain_encoder,
                      global_importance)
from .model_io import bundle_dict, load_bundle
from .network import LossWeights
from .numerics import substream_seed
from .svm import KernelSpec
from .training import SvmConfig, TrainConfig, TrainedModel, model_codes, train_pipeline

CONFIG_FORMAT = "claire-config/1"

INPUT_ERRORS = (InputError, ShapeError, StateError, DegenerateDataError, ConditioningError)


def _default_config() -> dict:
    return {
        "format": CONFIG_FORMAT,
        "seed": 42,
        "output_dir": "claire_out",
        "dataset": None,
        "preprocess": {"drop_threshold": 0.30, "test_fraction": 0.20},
        "train": {
            "mode": "CLAIRE", "epochs": None, "batch_size": 64, "learning_rate": 1e-3,
            "latent_dim": None, "hidden_widths": [128, 64],
            "latent_weight": 0.1, "classifier_weight": 1.0, "entropy_weight": 0.01,
            "corruption_std": 0.1, "dropout_rate": 0.3,
            "bn_momentum": 0.9, "bn_epsilon": 1e-5,
        },
        "svm": {"kernel": "rbf", "gamma": None, "degree": 3, "coef0": None,
                "c": 1.0, "tol": 1e-3, "max_passes": 100},
        "explain": {"n_background": 100, "n_eval": 100, "n_coalitions": None,
                    "beeswarm_dims": [0, 5, 10, 15],
                    "dependence_feature": None, "dependence_color": None,
                    "output": "mean"},
    }


def _deep_update(base: dict, extra: dict) -> dict:
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_update(base[key], value)
        else:
            base[key] = value
    return base


def load_config(path: str | None) -> dict:
    cfg = _default_config()
    if path is None:
        return cfg
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InputError(f"config file {path} must hold a JSON object")
    if doc.get("format") != CONFIG_FORMAT:
        raise InputError(
            f"config file {path} has format {doc.get('format')!r}, expected {CONFIG_FORMAT!r}")
    return _deep_update(cfg, doc)


def parse_dataset_spec(spec: str) -> dict:
    """secom:FEATURES:LABELS | tep:PATH[:faults=1,2] | csv:PATH[:label=NAME]"""
    parts = spec.split(":")
    kind = parts[0]
    if kind == "secom":
        if len(parts) != 3:
            raise InputError("secom dataset spec must be secom:FEATURES_PATH:LABELS_PATH")
        return {"kind": "secom", "features": parts[1], "labels": parts[2]}
    if kind == "tep":
        if len(parts) < 2:
            raise InputError("tep dataset spec must be tep:PATH[:faults=1,2]")
        out = {"kind": "tep", "path": parts[1], "fault_classes": None}
        for extra in parts[2:]:
            if extra.startswith("faults="):
                out["fault_classes"] = [int(t) for t in extra[len("faults="):].split(",") if t]
            else:
                raise InputError(f"unknown tep dataset option {extra!r}")
        return out
    if kind == "csv":
        if len(parts) < 2:
            raise InputError("csv dataset spec must be csv:PATH[:label=NAME]")
        out = {"kind": "csv", "path": parts[1], "label_column": "label"}
        for extra in parts[2:]:
            if extra.startswith("label="):
                out["label_column"] = extra[len("label="):]
            else:
                raise InputError(f"unknown csv dataset option {extra!r}")
        return out
    raise InputError(f"unknown dataset kind {kind!r}; expected secom, tep or csv")


def load_dataset(cfg: dict) -> TabularDataset:
    ds_cfg = cfg.get("dataset")
    if not ds_cfg:
        raise InputError("no dataset configured; pass --dataset or set it in the config")
    kind = ds_cfg.get("kind")
    if kind == "secom":
        return data_mod.load_secom(ds_cfg["features"], ds_cfg["labels"])
    if kind == "tep":
        return data_mod.load_tep(ds_cfg["path"], ds_cfg.get("fault_classes"))
    if kind == "csv":
        return data_mod.load_labeled_csv(ds_cfg["path"], ds_cfg.get("label_column", "label"))
    raise InputError(f"unknown dataset kind {kind!r}")


def build_train_config(cfg: dict) -> TrainConfig:
    t = cfg["train"]
    kind = (cfg.get("dataset") or {}).get("kind")
    epochs = t["epochs"] if t["epochs"] is not None else (30 if kind == "tep" else 40)
    latent_dim = t["latent_dim"] if t["latent_dim"] is not None else (32 if kind == "tep" else 64)
    rate = t["dropout_rate"]
    if not 0.0 <= rate < 1.0:
        raise InputError(f"dropout_rate must be in [0, 1), got {rate}")
    return TrainConfig(
        mode=t["mode"], epochs=int(epochs), batch_size=int(t["batch_size"]),
        learning_rate=float(t["learning_rate"]), latent_dim=int(latent_dim),
        hidden_widths=[int(w) for w in t["hidden_widths"]],
        weights=LossWeights(latent_weight=float(t["latent_weight"]),
                            classifier_weight=float(t["classifier_weight"]),
                            entropy_weight=float(t["entropy_weight"])),
        corruption_std=float(t["corruption_std"]), dropout_keep=1.0 - rate,
        bn_momentum=float(t["bn_momentum"]), bn_epsilon=float(t["bn_epsilon"]),
        seed=int(cfg["seed"]),
    )


def build_svm_config(cfg: dict) -> SvmConfig:
    s = cfg["svm"]
    kind = s["kernel"]
    gamma = s.get("gamma")
    degree = int(s.get("degree") or 3)
    coef0 = s.get("coef0")
    if kind == "linear":
        kernel = KernelSpec.linear()
    elif kind == "polynomial":
        kernel = KernelSpec.polynomial(coef0=1.0 if coef0 is None else float(coef0),
                                       degree=degree)
    elif kind == "rbf":
        kernel = KernelSpec.rbf(gamma=None if gamma is None else float(gamma))
    elif kind == "sigmoid":
        kernel = KernelSpec.sigmoid(gamma=None if gamma is None else float(gamma),
                                    coef0=0.0 if coef0 is None else float(coef0))
    else:
        raise InputError(f"unknown kernel kind {kind!r}")
    return SvmConfig(kernel=kernel, c=float(s["c"]), tol=float(s["tol"]),
                     max_passes=int(s["max_passes"]))


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_json(path: str, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def _prepare(cfg: dict):
    raw = load_dataset(cfg)
    p = cfg["preprocess"]
    return data_mod.run_pipeline(raw, drop_threshold=float(p["drop_threshold"]),
                                 test_fraction=float(p["test_fraction"]),
                                 seed=int(cfg["seed"]))


def _out_dir(cfg: dict) -> str:
    out = cfg["output_dir"]
    os.makedirs(out, exist_ok=True)
    return out


def cmd_preprocess(cfg: dict) -> int:
    prepared = _prepare(cfg)
    out = _out_dir(cfg)
    for name, split in (("train", prepared.train), ("test", prepared.test)):
        write_csv(os.path.join(out, f"{name}.csv"),
                  prepared.kept_names + ["label"],
                  (list(row) + [int(lab)] for row, lab in zip(split.features, split.labels)))
    write_json(os.path.join(out, "preprocess_report.json"), prepared.report.to_json_dict())
    print(f"wrote train.csv, test.csv, preprocess_report.json to {out}")
    return 0


def cmd_train(cfg: dict) -> int:
    prepared = _prepare(cfg)
    train_cfg = build_train_config(cfg)
    svm_cfg = build_svm_config(cfg)
    model = train_pipeline(prepared, train_cfg, svm_cfg)
    out = _out_dir(cfg)
    bundle_path = os.path.join(out, "model.json")
    doc = bundle_dict(model)
    # preprocessing knobs ride along so later commands can replay the split
    doc["preprocess"] = {"drop_threshold": float(cfg["preprocess"]["drop_threshold"]),
                         "test_fraction": float(cfg["preprocess"]["test_fraction"])}
    doc["dataset"] = cfg.get("dataset")
    with open(bundle_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    if model.epoch_logs:
        write_csv(os.path.join(out, "loss_history.csv"),
                  ["epoch", "l_recon", "l_latent", "l_clf", "l_ent", "l_total"],
                  ((e.epoch, e.recon, e.latent, e.clf, e.ent, e.total)
                   for e in model.epoch_logs))
    write_json(os.path.join(out, "preprocess_report.json"), model.report.to_json_dict())
    if not model.svm.converged:
        print("warning: svm pass budget exhausted before meeting the stopping rule",
              file=sys.stderr)
    print(f"wrote model.json to {out} (mode {model.mode})")
    return 0


def _load_model(cfg: dict, args) -> tuple[TrainedModel, dict]:
    path = args.model or os.path.join(cfg["output_dir"], "model.json")
    model = load_bundle(path)
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return model, doc


def _replay_view(model: TrainedModel, doc: dict, cfg: dict, split: str):
    """Scaled features and labels for the requested split of the dataset,
    using the preprocessing state stored in the bundle.
    """
    ds_cfg = cfg.get("dataset") or doc.get("dataset")
    if not ds_cfg:
        raise InputError("no dataset configured and none recorded in the model bundle")
    raw = load_dataset({"dataset": ds_cfg})
    pre = doc.get("preprocess") or {}
    if raw.features.shape[1] == len(model.original_names):
        # replay guard: the same missing-data census must drop the same columns
        handled, _ = data_mod.handle_missing(raw, float(pre.get("drop_threshold", 0.30)))
        if handled.feature_names != model.kept_names:
            raise ClaireError(
                "replayed preprocessing kept a different column set than the model "
                "bundle records; the dataset does not match the one trained on")
    scaled = data_mod.apply_saved_preprocessing(raw.features, model.original_names,
                                                model.kept_names, model.medians,
                                                model.scaler)
    if split == "all":
        return scaled, raw.labels
    test_fraction = float(pre.get("test_fraction", 0.2))
    carrier = TabularDataset(scaled, raw.labels, list(model.kept_names))
    train, test = stratified_split(carrier, test_fraction,
                                   substream_seed(model.seed, "split"))
    chosen = train if split == "train" else test
    return chosen.features, chosen.labels


def cmd_eval(cfg: dict, args) -> int:
    model, doc = _load_model(cfg, args)
    features, labels = _replay_view(model, doc, cfg, args.split)
    codes = model_codes(model, features)
    from .svm import predict_labels
    preds = predict_labels(model.svm, codes)
    report = compute_metrics(labels, preds)
    out = _out_dir(cfg)
    write_json(os.path.join(out, "metrics.json"),
               {"mode": model.mode, "split": args.split, "n_rows": int(labels.shape[0]),
                **report.to_json_dict()})
    print(f"accuracy {report.accuracy:.4f}  macro-F1 {report.f1:.4f}  "
          f"({args.split} split, {labels.shape[0]} rows)")
    return 0


def cmd_explain(cfg: dict, args) -> int:
    model, doc = _load_model(cfg, args)
    if model.network is None:
        raise InputError("model bundle has no encoder (RawSVM mode); nothing to explain")
    train_x, _ = _replay_view(model, doc, cfg, "train")
    test_x, test_labels = _replay_view(model, doc, cfg, "test")
    e = cfg["explain"]
    n_bg = int(args.n_background or e["n_background"])
    n_eval = int(args.n_eval or e["n_eval"])
    n_coalitions = args.n_coalitions or e["n_coalitions"]
    if n_coalitions is not None:
        n_coalitions = int(n_coalitions)
    attr = explain_encoder(model.network, train_x, test_x,
                           feature_names=model.kept_names,
                           n_background=n_bg, n_eval=n_eval,
                           n_coalitions=n_coalitions,
                           seed=substream_seed(int(cfg["seed"]), "shap"))
    out = _out_dir(cfg)
    eval_x = test_x[:n_eval]
    eval_labels = test_labels[:n_eval]

    write_csv(os.path.join(out, "attributions.csv"),
              ["sample", "feature", "latent_dim", "value"],
              ((i, attr.feature_names[j], l, attr.values[i, j, l])
               for i in range(attr.n_samples)
               for j in range(attr.n_features)
               for l in range(attr.n_outputs)))
    write_json(os.path.join(out, "base_values.json"),
               {"base_values": [float(v) for v in attr.base_values]})

    ranking = global_importance(attr)
    write_csv(os.path.join(out, "importance_global.csv"),
              ["rank", "feature", "msv"] + [f"dim_{l}" for l in range(attr.n_outputs)],
              ((r + 1, ranking.features[r], ranking.msv[r], *ranking.per_output[r])
               for r in range(len(ranking.features))))

    classes = class_conditional_importance(attr, eval_labels)
    fail_msv = {f: v for f, v in zip(classes.failure.features, classes.failure.msv)}
    succ_msv = {f: v for f, v in zip(classes.success.features, classes.success.msv)}
    write_csv(os.path.join(out, "importance_class.csv"),
              ["rank", "feature", "contrast", "failure_msv", "success_msv"],
              ((r + 1, f, classes.contrast[r], fail_msv[f], succ_msv[f])
               for r, f in enumerate(classes.contrast_features)))

    dims = [d for d in e["beeswarm_dims"] if 0 <= d < attr.n_outputs]
    for dim in dims:
        write_csv(os.path.join(out, f"beeswarm_dim_{dim}.csv"),
                  ["sample", "feature", "feature_value", "shap_value"],
                  ((i, attr.feature_names[j], eval_x[i, j], attr.values[i, j, dim])
                   for i in range(attr.n_samples)
                   for j in range(attr.n_features)))

    feat = e["dependence_feature"]
    color = e["dependence_color"]
    feat_idx = (ranking.order[0] if feat is None
                else model.kept_names.index(feat) if isinstance(feat, str) else int(feat))
    color_idx = (ranking.order[1] if color is None and len(ranking.order) > 1
                 else feat_idx if color is None
                 else model.kept_names.index(color) if isinstance(color, str) else int(color))
    rows = dependence_export(attr, eval_x, int(feat_idx), int(color_idx), e["output"])
    write_csv(os.path.join(out, "dependence.csv"),
              ["feature", "feature_value", "attribution", "color_feature", "color_value"],
              ((model.kept_names[int(feat_idx)], fv, sv,
                model.kept_names[int(color_idx)], cv) for fv, sv, cv in rows))
    print(f"wrote attribution exports for {n_eval} samples to {out}")
    return 0


def cmd_project(cfg: dict, args) -> int:
    model, doc = _load_model(cfg, args)
    features, labels = _replay_view(model, doc, cfg, args.split)
    codes = model_codes(model, features)
    projection = lda_fit(codes, labels)
    export = project_export(projection, codes, labels)
    out = _out_dir(cfg)
    write_csv(os.path.join(out, "lda_projection.csv"), ["projection", "label"],
              export["rows"])
    write_json(os.path.join(out, "lda_summary.json"),
               {"split": args.split, **export["summary"]})
    print(f"dprime {export['summary']['dprime']:.4f} on {args.split} split")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="claire",
        description="Fault detection: denoising autoencoder + kernel SVM with "
                    "Shapley attributions and separability analysis.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file (claire-config/1)")
        p.add_argument("--seed", type=int, help="root random seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--dataset",
                       help="secom:FEATURES:LABELS | tep:PATH[:faults=1,2] "
                            "| csv:PATH[:label=NAME]")
        p.add_argument("--mode", choices=["CLAIRE", "PlainAE", "RawSVM"],
                       help="training mode")

    p = sub.add_parser("preprocess", help="run the preprocessing pipeline and export splits")
    common(p)

    p = sub.add_parser("train", help="train phase 1 and 2 and save a model bundle")
    common(p)
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", type=float)

    for name, extra in (("eval", "score a trained model"),
                        ("explain", "export attribution tables"),
                        ("project", "export the discriminant projection")):
        p = sub.add_parser(name, help=extra)
        common(p)
        p.add_argument("--model", help="model bundle path (default: OUT/model.json)")
        if name in ("eval", "project"):
            p.add_argument("--split", choices=["train", "test", "all"], default="test")
        if name == "explain":
            p.add_argument("--n-background", type=int, dest="n_background")
            p.add_argument("--n-eval", type=int, dest="n_eval")
            p.add_argument("--n-coalitions", type=int, dest="n_coalitions")
    return parser


def resolve_config(args) -> dict:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["output_dir"] = args.out
    if args.dataset is not None:
        cfg["dataset"] = parse_dataset_spec(args.dataset)
    if args.mode is not None:
        cfg["train"]["mode"] = args.mode
    if getattr(args, "epochs", None) is not None:
        cfg["train"]["epochs"] = args.epochs
    if getattr(args, "learning_rate", None) is not None:
        cfg["train"]["learning_rate"] = args.learning_rate
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "preprocess":
            return cmd_preprocess(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "eval":
            return cmd_eval(cfg, args)
        if args.command == "explain":
            return cmd_explain(cfg, args)
        if args.command == "project":
            return cmd_project(cfg, args)
        raise InputError(f"unknown command {args.command!r}")
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ClaireError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 4
    except Exception:
        traceback.print_exc()
        return 4


if __name__ == "__main__":
    sys.exit(main())
