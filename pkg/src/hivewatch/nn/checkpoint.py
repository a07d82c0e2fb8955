"""Model checkpoints: a small self-describing binary container.

Layout: magic ``HIVEAE1\\n``, a little-endian uint32 header length, a
compact JSON header (version, hyperparameters, normalization, seed, and
the name/shape of every array), then the arrays themselves concatenated
as little-endian float64 in header order. Writing the same model twice
produces identical bytes — there are no timestamps or other ambient
state in the container.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..data import NormalizationParams
from ..errors import CheckpointError
from .lstm import LSTMLayerParams
from .model import AutoencoderModel, model_parameters

MAGIC = b"HIVEAE1\n"
VERSION = "v1"


def save_model(path, model: AutoencoderModel) -> None:
    params = model_parameters(model)
    header = {
        "version": VERSION,
        "hyper": {
            "window_size": model.window_size,
            "hidden_size": model.hidden_size,
            "n_layers": model.n_layers,
            "seed": model.seed,
        },
        "norm": (
            None
            if model.norm is None
            else {"mean": model.norm.mean, "std": model.norm.std}
        ),
        "arrays": [{"name": k, "shape": list(v.shape)} for k, v in params.items()],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for arr in params.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_model(path) -> AutoencoderModel:
    """Inverse of `save_model`; the round trip is bit-exact."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(raw) < len(MAGIC) + 4 or raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a model checkpoint (bad magic)")
    (header_len,) = struct.unpack_from("<I", raw, len(MAGIC))
    header_start = len(MAGIC) + 4
    data_start = header_start + header_len
    if len(raw) < data_start:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(raw[header_start:data_start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable header: {exc}") from exc
    if header.get("version") != VERSION:
        raise CheckpointError(f"{path}: unsupported version {header.get('version')!r}")

    hyper = header["hyper"]
    arrays: dict[str, np.ndarray] = {}
    offset = data_start
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if len(raw) < end:
            raise CheckpointError(f"{path}: truncated array data at {entry['name']!r}")
        arrays[entry["name"]] = (
            np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
            .astype(np.float64)
            .reshape(shape)
        )
        offset = end
    if offset != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - offset} trailing bytes")

    hs, n = hyper["hidden_size"], hyper["n_layers"]

    def layer(prefix: str, k: int, input_size: int) -> LSTMLayerParams:
        try:
            return LSTMLayerParams(
                input_size=input_size,
                hidden_size=hs,
                W=arrays[f"{prefix}.{k}.W"],
                U=arrays[f"{prefix}.{k}.U"],
                b=arrays[f"{prefix}.{k}.b"],
            )
        except KeyError as exc:
            raise CheckpointError(f"{path}: missing array {exc}") from exc

    norm = header.get("norm")
    try:
        return AutoencoderModel(
            window_size=hyper["window_size"],
            hidden_size=hs,
            n_layers=n,
            encoder_layers=[layer("encoder", k, 1 if k == 0 else hs) for k in range(n)],
            decoder_layers=[layer("decoder", k, hs) for k in range(n)],
            w_out=arrays["output.W"],
            b_out=arrays["output.b"],
            norm=None if norm is None else NormalizationParams(norm["mean"], norm["std"]),
            seed=hyper["seed"],
        )
    except KeyError as exc:
        raise CheckpointError(f"{path}: missing array {exc}") from exc
