"""Self-describing model checkpoints (``.npz``).

The archive holds every parameter array, the frozen embedding rows for the
vocabulary, and a JSON metadata entry with the model kind, configuration,
vocabulary tokens and their SHA-256 digest.
"""
from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np

from .corpus import Vocabulary
from .model import ModelConfig, ModelParams

FORMAT_VERSION = 1
_META = "__meta__"
_EMB = "__embeddings__"


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, params, vocab, kind="attention", extra=None):
    meta = {
        "format": FORMAT_VERSION,
        "kind": kind,
        "model_config": asdict(params.config),
        "vocab_digest": vocab.digest(),
        "vocab": vocab.tokens,
        "extra": extra or {},
    }
    arrays = {f"param/{k}": v for k, v in params.arrays.items()}
    arrays[_EMB] = np.asarray(params.embeddings)
    arrays[_META] = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path, vocab=None):
    """Return ``(params, vocab, meta)``.

    When ``vocab`` is given its digest must match the stored one.
    """
    with np.load(path, allow_pickle=False) as data:
        if _META not in data.files:
            raise CheckpointError(f"{path}: missing metadata")
        meta = json.loads(bytes(data[_META]).decode("utf-8"))
        if meta.get("format") != FORMAT_VERSION:
            raise CheckpointError(f"{path}: unsupported format {meta.get('format')}")
        arrays = {k[len("param/"):]: data[k].copy() for k in data.files if k.startswith("param/")}
        embeddings = data[_EMB].copy()
    stored = Vocabulary(list(meta["vocab"]))
    if stored.digest() != meta["vocab_digest"]:
        raise CheckpointError(f"{path}: vocabulary digest does not match stored tokens")
    if vocab is not None and vocab.digest() != meta["vocab_digest"]:
        raise CheckpointError(
            f"{path}: vocabulary mismatch (checkpoint {meta['vocab_digest'][:12]}, "
            f"given {vocab.digest()[:12]})")
    embeddings.flags.writeable = False
    params = ModelParams(embeddings, ModelConfig(**meta["model_config"]), arrays)
    return params, stored, meta
