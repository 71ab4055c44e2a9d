"""Writer for the packed embedding-table layout plus the export manifest.

The layout is three files addressed by the payload path ``P``: the payload
(count x dim little-endian float32, row order), ``P.json`` with
``{count, dim, space_tag, dtype: "f32le", sha256}``, and ``P.ids`` holding
one id per line.  A fourth file, ``P.manifest.json``, is this package's
own record of which encoder produced the table.

All writes go through a temp file in the target directory followed by an
atomic rename, so a crashed export never leaves a half-written table.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ExportError

PACKED_DTYPE = "f32le"


@dataclass
class ExportManifest:
    encoder_name: str
    encoder_version: str
    space_tag: str
    dim: int
    count: int
    sha256: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_text(path: Path, text: str) -> None:
    _atomic_write_bytes(path, text.encode("utf-8"))


def write_packed_table(
    out_path: str | Path,
    ids: Sequence[str],
    matrix: np.ndarray,
    space_tag: str,
    encoder_name: str,
    encoder_version: str,
) -> ExportManifest:
    out_path = Path(out_path)
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ExportError("embedding matrix must be 2-D")
    if len(ids) != matrix.shape[0]:
        raise ExportError(f"{len(ids)} ids for {matrix.shape[0]} rows")
    if len(set(ids)) != len(ids):
        raise ExportError("duplicate ids in export")
    if not np.all(np.isfinite(matrix)):
        raise ExportError("matrix contains non-finite values")

    payload = np.ascontiguousarray(matrix, dtype="<f4").tobytes()
    digest = hashlib.sha256(payload).hexdigest()
    count, dim = matrix.shape
    assert len(payload) == count * dim * 4

    out_path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "count": count,
        "dim": dim,
        "space_tag": space_tag,
        "dtype": PACKED_DTYPE,
        "sha256": digest,
    }
    _atomic_write_bytes(out_path, payload)
    _atomic_write_text(Path(str(out_path) + ".json"),
                       json.dumps(header, sort_keys=True, indent=2) + "\n")
    _atomic_write_text(Path(str(out_path) + ".ids"),
                       "".join(i + "\n" for i in ids))

    manifest = ExportManifest(
        encoder_name=encoder_name,
        encoder_version=encoder_version,
        space_tag=space_tag,
        dim=dim,
        count=count,
        sha256=digest,
    )
    _atomic_write_text(Path(str(out_path) + ".manifest.json"), manifest.to_json())
    return manifest
