"""Binary array bundles: little-endian float64/complex128 payload plus a JSON sidecar."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def _paths(path) -> tuple[Path, Path]:
    path = Path(path)
    return path.with_suffix(".bin"), path.with_suffix(".json")


def save_array_bundle(path, arrays: dict[str, np.ndarray], meta: dict) -> None:
    """Write ``arrays`` back to back into ``<path>.bin`` and describe them in ``<path>.json``."""
    bin_path, json_path = _paths(path)
    bin_path.parent.mkdir(parents=True, exist_ok=True)
    layout = []
    offset = 0
    with open(bin_path, "wb") as fh:
        for name, arr in arrays.items():
            arr = np.asarray(arr)
            dtype = "<c16" if np.iscomplexobj(arr) else "<f8"
            data = np.ascontiguousarray(arr, dtype=dtype)
            fh.write(data.tobytes())
            layout.append({"name": name, "dtype": dtype, "shape": list(arr.shape),
                           "offset": offset})
            offset += data.nbytes
    with open(json_path, "w") as fh:
        json.dump({"arrays": layout, "meta": meta}, fh, indent=2, sort_keys=True)


def load_array_bundle(path) -> tuple[dict[str, np.ndarray], dict]:
    bin_path, json_path = _paths(path)
    with open(json_path) as fh:
        side = json.load(fh)
    raw = bin_path.read_bytes()
    arrays = {}
    for item in side["arrays"]:
        dtype = np.dtype(item["dtype"])
        count = int(np.prod(item["shape"], dtype=np.int64))
        arr = np.frombuffer(raw, dtype=dtype, count=count, offset=item["offset"])
        arrays[item["name"]] = arr.reshape(item["shape"]).astype(dtype.newbyteorder("="))
    return arrays, side["meta"]
