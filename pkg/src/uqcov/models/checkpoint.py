"""Flat binary checkpoint container.

Layout (all integers little-endian)::

    b"UQCK"                 magic
    u8                      version (1)
    u32                     length of the JSON metadata block
    bytes                   UTF-8 JSON metadata
    u32                     number of arrays
    per array:
      u32                   ndim
      u32 * ndim            dimensions
      f64 * prod(dims)      values, C order
"""

import json
import struct

import numpy as np

from .base import MlpConfig
from .cnn import ClassifierConfig, ClassifierModel, Layout
from .mlp import MlpModel
from .svi import SviModel

MAGIC = b"UQCK"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_arrays(path, meta, arrays):
    body = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<B", VERSION))
        fh.write(struct.pack("<I", len(body)))
        fh.write(body)
        fh.write(struct.pack("<I", len(arrays)))
        for a in arrays:
            a = np.ascontiguousarray(a, dtype="<f8")
            fh.write(struct.pack("<I", a.ndim))
            fh.write(struct.pack(f"<{a.ndim}I", *a.shape))
            fh.write(a.tobytes())


def load_arrays(path):
    with open(path, "rb") as fh:
        data = fh.read()
    pos = 0

    def take(n, what):
        nonlocal pos
        if pos + n > len(data):
            raise CheckpointError(f"{path}: truncated while reading {what}")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    if take(4, "magic") != MAGIC:
        raise CheckpointError(f"{path}: not a UQCK checkpoint")
    (version,) = struct.unpack("<B", take(1, "version"))
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    (meta_len,) = struct.unpack("<I", take(4, "metadata length"))
    meta = json.loads(take(meta_len, "metadata").decode("utf-8"))
    (count,) = struct.unpack("<I", take(4, "array count"))
    arrays = []
    for i in range(count):
        (ndim,) = struct.unpack("<I", take(4, f"array {i} rank"))
        dims = struct.unpack(f"<{ndim}I", take(4 * ndim, f"array {i} shape"))
        size = int(np.prod(dims)) if ndim else 1
        arrays.append(np.frombuffer(take(8 * size, f"array {i} data"), dtype="<f8").reshape(dims).astype(float))
    if pos != len(data):
        raise CheckpointError(f"{path}: {len(data) - pos} trailing bytes")
    return meta, arrays


def _cfg(obj):
    return obj.as_dict() if hasattr(obj, "as_dict") else dict(obj.__dict__)


def save_model(path, model):
    """Write an :class:`MlpModel`, :class:`SviModel` or :class:`ClassifierModel`."""
    if isinstance(model, MlpModel):
        meta = {"kind": "mlp", "config": _cfg(model.config), "label_mean": model.label_mean,
                "label_sd": model.label_sd, "dropout_last_only": model.dropout_last_only, "val_rmse": model.val_rmse}
        arrays = [model.params, model.sizes.astype(float)]
    elif isinstance(model, SviModel):
        meta = {"kind": "svi", "config": _cfg(model.config), "label_mean": model.label_mean,
                "label_sd": model.label_sd, "prior_sd": model.prior_sd, "last_layer_only": model.last_layer_only,
                "log_noise_var": model.log_noise_var, "val_rmse": model.val_rmse, "scale_lr": model.scale_lr,
                "val_nll": model.val_nll}
        arrays = [model.mu, model.rho, model.bayes, model.sizes.astype(float)]
    elif isinstance(model, ClassifierModel):
        meta = {"kind": "classifier", "config": _cfg(model.config), "image_shape": list(model.layout.image_shape),
                "n_classes": model.layout.n_classes, "temperature": model.temperature,
                "val_accuracy": model.val_accuracy, "members": len(model.members),
                "has_posterior": model.rho is not None}
        arrays = list(model.members)
        if model.rho is not None:
            arrays += [model.rho, model.bayes]
    else:
        raise TypeError(f"cannot checkpoint {type(model).__name__}")
    save_arrays(path, meta, arrays)


def load_model(path):
    meta, arrays = load_arrays(path)
    kind = meta.get("kind")
    if kind == "mlp":
        cfg = meta["config"]
        cfg = MlpConfig(**{**cfg, "hidden": tuple(cfg["hidden"])})
        return MlpModel(arrays[0], arrays[1].astype(np.int64), cfg, meta["label_mean"], meta["label_sd"],
                        meta["dropout_last_only"], meta["val_rmse"])
    if kind == "svi":
        cfg = meta["config"]
        cfg = MlpConfig(**{**cfg, "hidden": tuple(cfg["hidden"])})
        return SviModel(arrays[0], arrays[1], arrays[2], meta["log_noise_var"], arrays[3].astype(np.int64), cfg,
                        meta["label_mean"], meta["label_sd"], meta["prior_sd"], meta["last_layer_only"], meta["val_rmse"],
                        meta.get("scale_lr", float("nan")), meta.get("val_nll", float("nan")))
    if kind == "classifier":
        cfg = ClassifierConfig(**meta["config"])
        layout = Layout(tuple(meta["image_shape"]), meta["n_classes"])
        k = meta["members"]
        rho = bayes = None
        if meta["has_posterior"]:
            rho, bayes = arrays[k], arrays[k + 1]
        return ClassifierModel(cfg, layout, tuple(arrays[:k]), rho, bayes, meta["temperature"], meta["val_accuracy"])
    raise CheckpointError(f"{path}: unknown model kind {kind!r}")
