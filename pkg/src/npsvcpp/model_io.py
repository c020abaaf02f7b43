"""Versioned model persistence.

The container is self-describing JSON text with an explicit format
version; matrices are embedded as base64-coded little-endian float64
rows, so a round-trip reproduces predictions bit for bit. Loading
rejects any other format version.
"""

from __future__ import annotations

import json

import numpy as np

from .data import Standardizer
from .deep import DeepNPSVC, DeepPredictor
from .errors import ModelFormatError, ModelVersionError
from .ioutil import decode_f64, encode_f64
from .kernels import KernelSpec
from .knpsvc import KernelNPSVC, KernelPredictor, TWSVM

FORMAT_VERSION = 1
MODEL_KINDS = ("knpsvc", "twsvm", "dnpsvc")


def _enc(a: np.ndarray | None):
    if a is None:
        return None
    a = np.asarray(a, dtype=np.float64)
    return {"shape": list(a.shape), "data": encode_f64(a)}


def _dec(obj, what: str) -> np.ndarray | None:
    if obj is None:
        return None
    try:
        return decode_f64(obj["data"], tuple(obj["shape"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"corrupt {what} payload: {exc}") from None


def _kind_of(estimator) -> str:
    if isinstance(estimator, KernelNPSVC):
        return "knpsvc"
    if isinstance(estimator, TWSVM):
        return "twsvm"
    if isinstance(estimator, DeepNPSVC):
        return "dnpsvc"
    raise ModelFormatError(f"cannot serialize {type(estimator).__name__}")


def save_model(estimator, scaler: Standardizer | None = None) -> bytes:
    """Serialize a fitted estimator (plus an optional input scaler)."""
    kind = _kind_of(estimator)
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "hyperparams": estimator.get_params(),
        "classes": _enc(np.asarray(estimator.classes_, dtype=np.float64)),
        "n_features": int(estimator.n_features_in_),
        "scaler": None if scaler is None else {
            "mean": _enc(scaler.mean_), "scale": _enc(scaler.scale_)},
    }
    if kind in ("knpsvc", "twsvm"):
        pred: KernelPredictor = estimator.predictor_
        doc["predictor"] = {
            "kernel": pred.spec.kind,
            "bandwidth": pred.spec.bandwidth,
            "jitter": pred.spec.jitter,
            "expansion": bool(pred.expansion),
            "coef": _enc(pred.coef),
            "deltas": _enc(pred.deltas),
            "X_train": _enc(pred.X_train),
        }
        if kind == "knpsvc":
            doc["tau"] = _enc(estimator.tau_)
    else:
        pred: DeepPredictor = estimator.predictor_
        doc["predictor"] = {
            "params": {name: _enc(v) for name, v in pred.params.items()},
            "prior": _enc(pred.prior),
            "deltas": _enc(pred.deltas),
            "scale_mean": _enc(estimator.scale_mean_),
            "scale_std": _enc(estimator.scale_std_),
        }
        doc["tau"] = _enc(estimator.tau_)
    return json.dumps(doc, indent=1, sort_keys=True).encode("utf-8")


def load_model(data: bytes):
    """Deserialize into a fitted estimator.

    Returns (estimator, scaler) where scaler is the optional stored
    input transform (None when the model was trained on raw features).
    """
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"corrupt model payload: {exc}") from None
    if not isinstance(doc, dict):
        raise ModelFormatError("corrupt model payload: not an object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelVersionError(
            f"model format version {version!r} not supported (expected {FORMAT_VERSION})")
    kind = doc.get("kind")
    if kind not in MODEL_KINDS:
        raise ModelFormatError(f"unknown model kind {kind!r}")
    try:
        hyper = doc["hyperparams"]
        classes = _dec(doc["classes"], "classes")
        n_features = int(doc["n_features"])
        pred_doc = doc["predictor"]
    except KeyError as exc:
        raise ModelFormatError(f"missing model field {exc}") from None

    scaler = None
    if doc.get("scaler") is not None:
        scaler = Standardizer(mean_=_dec(doc["scaler"]["mean"], "scaler"),
                              scale_=_dec(doc["scaler"]["scale"], "scaler"))

    if kind in ("knpsvc", "twsvm"):
        est = (KernelNPSVC if kind == "knpsvc" else TWSVM)(**hyper)
        try:
            spec = KernelSpec(pred_doc["kernel"], bandwidth=pred_doc["bandwidth"],
                              jitter=pred_doc["jitter"])
            predictor = KernelPredictor(
                spec=spec,
                expansion=bool(pred_doc["expansion"]),
                coef=_dec(pred_doc["coef"], "coef"),
                deltas=_dec(pred_doc["deltas"], "deltas"),
                X_train=_dec(pred_doc["X_train"], "X_train"),
                n_features=n_features,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"corrupt predictor payload: {exc}") from None
        if predictor.expansion and predictor.X_train is None:
            raise ModelFormatError("expansion predictor without stored samples")
        if kind == "knpsvc" and doc.get("tau") is not None:
            est.tau_ = _dec(doc["tau"], "tau")
    else:
        est = DeepNPSVC(**hyper)
        try:
            params = {name: _dec(v, f"params[{name}]")
                      for name, v in pred_doc["params"].items()}
            predictor = DeepPredictor(
                params=params,
                prior=_dec(pred_doc["prior"], "prior"),
                deltas=_dec(pred_doc["deltas"], "deltas"),
                n_features=n_features,
            )
            est.scale_mean_ = _dec(pred_doc["scale_mean"], "scale_mean")
            est.scale_std_ = _dec(pred_doc["scale_std"], "scale_std")
        except (KeyError, TypeError, AttributeError) as exc:
            raise ModelFormatError(f"corrupt predictor payload: {exc}") from None
        if doc.get("tau") is not None:
            est.tau_ = _dec(doc["tau"], "tau")

    est.classes_ = classes
    est.n_features_in_ = n_features
    est.predictor_ = predictor
    return est, scaler


def save_model_file(estimator, path: str, scaler: Standardizer | None = None) -> None:
    with open(path, "wb") as fh:
        fh.write(save_model(estimator, scaler=scaler))


def load_model_file(path: str):
    with open(path, "rb") as fh:
        return load_model(fh.read())
