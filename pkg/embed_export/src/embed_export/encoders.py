"""Encoder registry.

Two encoder families ship ready to run, both fully deterministic and
offline: a feature-hashed n-gram text encoder and a pixel-grid projection
image encoder.  The pretrained entries (CLIP, ResNet) are registered so the
names resolve, but constructing them raises: their weights are neither
bundled nor downloadable in an offline install.  Every encoder pins a
version string that export manifests record, so downstream results stay
attributable to the exact encoder that produced them.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Sequence, Tuple

import numpy as np
from PIL import Image

from .errors import EncoderUnavailableError, ExportError, InputError

_WORD_RE = re.compile(r"[a-z0-9']+")


def _hash64(data: str, salt: bytes) -> int:
    digest = hashlib.blake2b(data.encode("utf-8"), digest_size=8, person=salt)
    return int.from_bytes(digest.digest(), "big")


class HashedNgramTextEncoder:
    """Sign-hashed unigram+bigram counts, L2-normalized.

    The hashing trick keeps the encoder stateless: no vocabulary is fitted,
    so identical text maps to identical vectors in any process on any
    machine.  Paraphrases share most n-grams and therefore land close.
    """

    name = "hashed-ngram-v1"
    version = "1.0"
    kind = "text"
    dim = 256
    space_tag = "hashed-ngram-v1"

    def encode_batch(self, items: Sequence[Tuple[str, str]]) -> np.ndarray:
        out = np.zeros((len(items), self.dim), dtype=np.float64)
        for row, (item_id, text) in enumerate(items):
            tokens = _WORD_RE.findall(text.lower())
            if not tokens:
                raise InputError(f"utterance {item_id!r} has no tokens")
            grams = list(tokens)
            grams += [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]
            for g in grams:
                idx = _hash64(g, b"emx-index") % self.dim
                sign = 1.0 if _hash64(g, b"emx-sign") & 1 else -1.0
                out[row, idx] += sign
            norm = np.linalg.norm(out[row])
            if norm == 0.0:
                raise InputError(f"utterance {item_id!r} hashed to a zero vector")
            out[row] /= norm
        return out


class PixelGridImageEncoder:
    """Decode, resize to a 16x16 RGB grid, project with a fixed random matrix.

    The projection matrix is derived from the encoder name, not from any
    fitted state, so re-running the export reproduces the table byte for
    byte.  Identical files give identical vectors.
    """

    name = "pixel-grid-v1"
    version = "1.0"
    kind = "image"
    dim = 128
    space_tag = "pixel-grid-v1"
    _GRID = 16

    def __init__(self):
        seed = _hash64(f"{self.name}/{self.version}", b"emx-proj")
        rng = np.random.default_rng(seed)
        n_in = self._GRID * self._GRID * 3
        self._projection = rng.standard_normal((self.dim, n_in)) / np.sqrt(n_in)

    def encode_batch(self, items: Sequence[Tuple[str, Path]]) -> np.ndarray:
        out = np.zeros((len(items), self.dim), dtype=np.float64)
        for row, (item_id, path) in enumerate(items):
            path = Path(path)
            if not path.exists():
                raise InputError(f"image {item_id!r}: file not found: {path}")
            try:
                with Image.open(path) as img:
                    rgb = img.convert("RGB").resize(
                        (self._GRID, self._GRID), Image.BILINEAR
                    )
            except (OSError, ValueError) as exc:
                raise InputError(
                    f"image {item_id!r}: cannot decode {path}: {exc}"
                ) from None
            pixels = np.asarray(rgb, dtype=np.float64).reshape(-1) / 255.0 - 0.5
            vec = self._projection @ pixels
            norm = np.linalg.norm(vec)
            if norm == 0.0:
                raise InputError(f"image {item_id!r} projected to a zero vector")
            out[row] = vec / norm
        return out


@dataclass
class EncoderSpec:
    name: str
    version: str
    kind: str
    available: bool
    factory: Callable[[], object]
    note: str = ""


def _pretrained(name: str, version: str, kind: str, substitute: str) -> EncoderSpec:
    def factory():
        raise EncoderUnavailableError(
            f"encoder {name!r} ({version}) needs pretrained weights that are "
            f"not bundled and cannot be downloaded in an offline install; "
            f"the deterministic {substitute!r} encoder runs anywhere"
        )

    return EncoderSpec(name, version, kind, available=False, factory=factory,
                       note="weights not bundled")


REGISTRY = {
    spec.name: spec
    for spec in [
        EncoderSpec("hashed-ngram-v1", "1.0", "text", True, HashedNgramTextEncoder),
        EncoderSpec("pixel-grid-v1", "1.0", "image", True, PixelGridImageEncoder),
        _pretrained("clip-vit-b32", "ViT-B/32", "text+image", "hashed-ngram-v1"),
        _pretrained("resnet50-imagenet", "torchvision-v1", "image", "pixel-grid-v1"),
    ]
}


def list_encoders() -> List[EncoderSpec]:
    return [REGISTRY[k] for k in sorted(REGISTRY)]


def get_encoder(name: str):
    if name not in REGISTRY:
        known = ", ".join(sorted(REGISTRY))
        raise ExportError(f"unknown encoder {name!r}; known encoders: {known}")
    return REGISTRY[name].factory()
