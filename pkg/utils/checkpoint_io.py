"""
checkpoint_io.py - MlpEstimator checkpoints

<stem>.json header {format_version, layer_sizes, dropout_rate, norm_scale,
M, N, precision, hidden_width, blob} and <stem>.bin holding, layer by
layer, the (fan_in x fan_out) weight matrix row-major then the bias vector,
little-endian in the model precision.
"""
import json
import logging
from pathlib import Path

import numpy as np

from logic.errors import DatasetParseError
from logic.learning import MlpEstimator
from utils.dataset_io import FORMAT_VERSION, check_format_version, read_manifest

logger = logging.getLogger(__name__)

_BLOB_DTYPES = {"f32": "<f4", "f64": "<f8"}


def save_checkpoint(model, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = path.with_suffix(".bin")
    dtype = _BLOB_DTYPES[model.precision]
    chunks = []
    for w, b in zip(model.weights, model.biases):
        chunks.append(np.ascontiguousarray(w, dtype=dtype).tobytes())
        chunks.append(np.ascontiguousarray(b, dtype=dtype).tobytes())
    blob.write_bytes(b"".join(chunks))
    header = {
        "format_version": FORMAT_VERSION,
        "layer_sizes": model.layer_sizes,
        "dropout_rate": model.dropout_rate,
        "norm_scale": model.norm_scale,
        "M": model.num_antennas,
        "N": model.pilot_length,
        "precision": model.precision,
        "hidden_width": model.hidden_width,
        "blob": blob.name,
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(header, f, indent=4)
    logger.info("Saved checkpoint %s (layers %s)", path, model.layer_sizes)
    return header


def load_checkpoint(path):
    path = Path(path)
    header = read_manifest(path)
    for key in ("format_version", "layer_sizes", "dropout_rate", "norm_scale", "M", "N", "precision"):
        if key not in header:
            raise DatasetParseError(f"Checkpoint header is missing '{key}'", path, key)
    check_format_version(header["format_version"], path)
    precision = header["precision"]
    if precision not in _BLOB_DTYPES:
        raise DatasetParseError(f"Unsupported precision {precision!r}", path, "precision")
    m, n = int(header["M"]), int(header["N"])
    sizes = [int(s) for s in header["layer_sizes"]]
    if len(sizes) != 4 or sizes[0] != 2 * m * n or sizes[3] != 2 * m or sizes[1] != sizes[2]:
        raise DatasetParseError(f"layer_sizes {sizes} do not describe a (2MN, L, L, 2M) network", path,
                                "layer_sizes")

    blob_path = path.parent / header.get("blob", path.with_suffix(".bin").name)
    try:
        raw = blob_path.read_bytes()
    except OSError as e:
        raise DatasetParseError(f"Cannot read weights: {e}", path) from e
    itemsize = np.dtype(_BLOB_DTYPES[precision]).itemsize
    expected = sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))
    if len(raw) != expected * itemsize:
        raise DatasetParseError(f"Weight blob holds {len(raw)} bytes, expected {expected * itemsize}", path,
                                blob_path.name)
    values = np.frombuffer(raw, dtype=_BLOB_DTYPES[precision])

    weights, biases, offset = [], [], 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(values[offset:offset + fan_in * fan_out].reshape(fan_in, fan_out).copy())
        offset += fan_in * fan_out
        biases.append(values[offset:offset + fan_out].copy())
        offset += fan_out

    norm_scale = header["norm_scale"]
    return MlpEstimator(m, n, sizes[1], float(header["dropout_rate"]), precision,
                        weights=weights, biases=biases,
                        norm_scale=float(norm_scale) if norm_scale is not None else None)
