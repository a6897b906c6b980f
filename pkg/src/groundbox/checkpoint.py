"""Deterministic binary checkpoint container.

Layout: one magic line, one JSON meta line (dims, vocabulary tokens,
array manifest in order, config fingerprint), then the raw little-endian
float64 bytes of every array back to back. Writing the same model twice
produces byte-identical files, and save/load round-trips bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np

from .head import GroundingModel, ModelDims
from .vocab import OOV_TOKEN, PAD_TOKEN, Vocabulary

MAGIC = b"groundbox-checkpoint-v1\n"


def model_fingerprint(model: GroundingModel) -> dict:
    fp = asdict(model.dims)
    fp["vocab_size"] = model.vocab.size
    return fp


def save_checkpoint(model: GroundingModel, path, extra_meta: dict | None = None) -> None:
    arrays = [(name, np.ascontiguousarray(t.data, dtype=np.float64))
              for name, t in model.named_params()]
    meta = {
        "fingerprint": model_fingerprint(model),
        "vocab": model.vocab.tokens,
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in arrays],
    }
    if extra_meta:
        meta["extra"] = extra_meta
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(meta, sort_keys=True).encode("utf-8") + b"\n")
        for _, a in arrays:
            fh.write(a.astype("<f8", copy=False).tobytes(order="C"))


def load_checkpoint(path) -> tuple[GroundingModel, dict]:
    with open(path, "rb") as fh:
        magic = fh.readline()
        if magic != MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        meta = json.loads(fh.readline().decode("utf-8"))
        blob = fh.read()

    tokens = meta["vocab"]
    if tokens[:2] != [PAD_TOKEN, OOV_TOKEN]:
        raise ValueError(f"{path}: vocabulary missing reserved header")
    vocab = Vocabulary(tokens[2:])
    fp = meta["fingerprint"]
    dims = ModelDims(d_v=fp["d_v"], d_e=fp["d_e"], d_q=fp["d_q"], d_o=fp["d_o"])
    if fp["vocab_size"] != vocab.size:
        raise ValueError(f"{path}: fingerprint vocab_size {fp['vocab_size']} "
                         f"!= stored vocabulary ({vocab.size})")

    model = GroundingModel(vocab, dims, np.random.default_rng(0))
    offset = 0
    named = dict(model.named_params())
    for entry in meta["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        values = np.frombuffer(blob, dtype="<f8", count=count,
                               offset=offset).reshape(shape)
        offset += nbytes
        target = named.pop(entry["name"], None)
        if target is None:
            raise ValueError(f"{path}: unknown array {entry['name']!r}")
        if target.data.shape != shape:
            raise ValueError(f"{path}: array {entry['name']!r} shape {shape} "
                             f"!= expected {target.data.shape}")
        target.data[...] = values
    if named:
        raise ValueError(f"{path}: missing arrays {sorted(named)}")
    if offset != len(blob):
        raise ValueError(f"{path}: {len(blob) - offset} trailing bytes")
    return model, meta
