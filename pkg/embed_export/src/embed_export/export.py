"""Top-level export operations: encode in batches, write one packed table."""

from __future__ import annotations

from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .encoders import get_encoder
from .errors import ExportError
from .inputs import read_image_list, read_utterances
from .packed import ExportManifest, write_packed_table


def _encode_batched(encoder, items: Sequence[Tuple[str, object]], batch_size: int):
    # output order is input order regardless of how batches are cut
    if batch_size < 1:
        raise ExportError(f"batch size must be >= 1, got {batch_size}")
    chunks: List[np.ndarray] = []
    for start in range(0, len(items), batch_size):
        chunks.append(encoder.encode_batch(items[start:start + batch_size]))
    return np.vstack(chunks)


def _export(encoder_id: str, expected_kind: str, items, out_path,
            batch_size: int, space_tag: Optional[str]) -> ExportManifest:
    encoder = get_encoder(encoder_id)
    if encoder.kind != expected_kind:
        raise ExportError(
            f"encoder {encoder_id!r} encodes {encoder.kind}, not {expected_kind}"
        )
    matrix = _encode_batched(encoder, items, batch_size)
    return write_packed_table(
        out_path,
        [item_id for item_id, _ in items],
        matrix,
        space_tag or encoder.space_tag,
        encoder.name,
        encoder.version,
    )


def export_text_embeddings(
    utterance_path: str | Path,
    encoder_id: str,
    out_path: str | Path,
    batch_size: int = 64,
    space_tag: Optional[str] = None,
) -> ExportManifest:
    return _export(encoder_id, "text", read_utterances(utterance_path),
                   out_path, batch_size, space_tag)


def export_image_embeddings(
    image_list_path: str | Path,
    encoder_id: str,
    out_path: str | Path,
    batch_size: int = 64,
    space_tag: Optional[str] = None,
) -> ExportManifest:
    return _export(encoder_id, "image", read_image_list(image_list_path),
                   out_path, batch_size, space_tag)
