"""Embedding tables: packed binary I/O, nearest-neighbor selection, dedup.

A packed table is three files addressed by the payload path ``P``:

* ``P``: ``count x dim`` little-endian float32 values in row order,
* ``P.json``: header ``{count, dim, space_tag, dtype: "f32le", sha256}``,
* ``P.ids``: one id per line, parallel to the rows.

A line-JSON fallback (``*.jsonl``, one ``{id, values, space_tag?}`` object per
line) is accepted by the same loader.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Sequence

import numpy as np

from .errors import DataFormatError, MissingDataError

PACKED_DTYPE = "f32le"


@dataclass
class EmbeddingVector:
    id: str
    values: np.ndarray
    space_tag: str

    def validate(self) -> None:
        if not np.all(np.isfinite(self.values)):
            raise DataFormatError(f"embedding {self.id!r} contains non-finite values")


class EmbeddingTable:
    """Fixed-dimension vectors keyed by id, all sharing one space tag."""

    def __init__(self, ids: Sequence[str], matrix: np.ndarray, space_tag: str):
        matrix = np.asarray(matrix, dtype=np.float32)
        if matrix.ndim != 2:
            raise DataFormatError("embedding matrix must be 2-D")
        if len(ids) != matrix.shape[0]:
            raise DataFormatError(
                f"{len(ids)} ids for {matrix.shape[0]} embedding rows"
            )
        if not np.all(np.isfinite(matrix)):
            raise DataFormatError("embedding table contains non-finite values")
        self.ids: List[str] = [str(i) for i in ids]
        self.index: Dict[str, int] = {}
        for i, eid in enumerate(self.ids):
            if eid in self.index:
                raise DataFormatError(f"duplicate embedding id {eid!r}")
            self.index[eid] = i
        self.matrix = matrix
        self.space_tag = space_tag

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __contains__(self, eid: str) -> bool:
        return eid in self.index

    def get(self, eid: str) -> np.ndarray:
        try:
            return self.matrix[self.index[eid]]
        except KeyError:
            raise MissingDataError(
                f"embedding id {eid!r} not in table (space {self.space_tag!r})"
            ) from None

    def vector(self, eid: str) -> EmbeddingVector:
        return EmbeddingVector(eid, self.get(eid), self.space_tag)

    def rows_for(self, eids: Sequence[str]) -> np.ndarray:
        return self.matrix[[self.index[e] if e in self.index else self._missing(e) for e in eids]]

    def _missing(self, eid: str):
        raise MissingDataError(
            f"embedding id {eid!r} not in table (space {self.space_tag!r})"
        )

    # ------------------------------------------------------------------ I/O

    def save(self, path: str | Path, header_extra: dict | None = None) -> None:
        """Write the packed three-file layout (payload, .json header, .ids)."""
        path = Path(path)
        payload = np.ascontiguousarray(self.matrix, dtype="<f4").tobytes()
        path.write_bytes(payload)
        header = {
            "count": len(self.ids),
            "dim": self.dim,
            "space_tag": self.space_tag,
            "dtype": PACKED_DTYPE,
            "sha256": hashlib.sha256(payload).hexdigest(),
        }
        if header_extra:
            header.update(header_extra)
        Path(str(path) + ".json").write_text(
            json.dumps(header, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        Path(str(path) + ".ids").write_text(
            "".join(i + "\n" for i in self.ids), encoding="utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingTable":
        path = Path(path)
        if not path.exists():
            raise DataFormatError(f"embedding table not found: {path}")
        header_path = Path(str(path) + ".json")
        if path.suffix == ".jsonl" or not header_path.exists():
            return cls._load_jsonl(path)
        return cls._load_packed(path, header_path)

    @classmethod
    def _load_packed(cls, path: Path, header_path: Path) -> "EmbeddingTable":
        try:
            header = json.loads(header_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"bad embedding header {header_path}: {exc}") from None
        for key in ("count", "dim", "space_tag", "dtype"):
            if key not in header:
                raise DataFormatError(f"embedding header {header_path} missing {key!r}")
        if header["dtype"] != PACKED_DTYPE:
            raise DataFormatError(f"unsupported embedding dtype {header['dtype']!r}")
        count, dim = int(header["count"]), int(header["dim"])
        payload = path.read_bytes()
        if len(payload) != count * dim * 4:
            raise DataFormatError(
                f"embedding payload {path} is {len(payload)} bytes; "
                f"expected {count * dim * 4} for {count}x{dim} f32le"
            )
        if "sha256" in header:
            digest = hashlib.sha256(payload).hexdigest()
            if digest != header["sha256"]:
                raise DataFormatError(f"embedding payload {path} fails checksum")
        ids_path = Path(str(path) + ".ids")
        if not ids_path.exists():
            raise DataFormatError(f"embedding id file not found: {ids_path}")
        ids = ids_path.read_text(encoding="utf-8").splitlines()
        if len(ids) != count:
            raise DataFormatError(f"{len(ids)} ids in {ids_path}, header says {count}")
        matrix = np.frombuffer(payload, dtype="<f4").reshape(count, dim)
        return cls(ids, matrix.copy(), str(header["space_tag"]))

    @classmethod
    def _load_jsonl(cls, path: Path) -> "EmbeddingTable":
        ids: List[str] = []
        rows: List[List[float]] = []
        space_tag: str | None = None
        with path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DataFormatError(f"{path.name}:{lineno}: {exc}") from None
                if lineno == 1 and isinstance(obj, dict) and set(obj) == {"__header__"}:
                    continue
                if not isinstance(obj, dict) or "id" not in obj or "values" not in obj:
                    raise DataFormatError(
                        f"{path.name}:{lineno}: expected an object with 'id' and 'values'"
                    )
                tag = obj.get("space_tag", "default")
                if space_tag is None:
                    space_tag = tag
                elif tag != space_tag:
                    raise DataFormatError(
                        f"{path.name}:{lineno}: mixed space tags {space_tag!r} and {tag!r}"
                    )
                ids.append(str(obj["id"]))
                rows.append(obj["values"])
        if not rows:
            raise DataFormatError(f"no embeddings found in {path}")
        widths = {len(r) for r in rows}
        if len(widths) != 1:
            raise DataFormatError(f"{path.name}: inconsistent vector dimensions {sorted(widths)}")
        return cls(ids, np.asarray(rows, dtype=np.float32), space_tag or "default")


def check_compatible(a: EmbeddingTable, b: EmbeddingTable) -> None:
    if a.dim != b.dim:
        raise DataFormatError(f"embedding dimension mismatch: {a.dim} vs {b.dim}")
    if a.space_tag != b.space_tag:
        raise DataFormatError(
            f"embedding space mismatch: {a.space_tag!r} vs {b.space_tag!r}"
        )


# ------------------------------------------------------------------ geometry


def unit_rows(matrix: np.ndarray) -> np.ndarray:
    """L2-normalize rows; zero-norm rows are an error."""
    matrix = np.asarray(matrix, dtype=np.float64)
    norms = np.linalg.norm(matrix, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("cannot normalize a zero-norm embedding")
    return matrix / norms


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine undefined for a zero-norm embedding")
    return float(np.dot(a, b) / (na * nb))


# ------------------------------------------------- neighbor selection, dedup


def select_seed_neighbors(
    queries: EmbeddingTable, pool: EmbeddingTable, k: int = 3
) -> set:
    """Union over queries of each query's k nearest pool ids (L2 distance).

    Distance ties are broken by ascending pool id so the output is
    deterministic.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if len(queries) == 0 or len(pool) == 0:
        raise DataFormatError("neighbor selection needs nonempty query and pool tables")
    check_compatible(queries, pool)
    q = queries.matrix.astype(np.float64)
    p = pool.matrix.astype(np.float64)
    # Rank of each pool row under ascending-id order, for tie-breaking.
    id_rank = np.empty(len(pool), dtype=np.int64)
    id_rank[np.argsort(np.asarray(pool.ids, dtype=object))] = np.arange(len(pool))
    k_eff = min(k, len(pool))
    selected: set = set()
    p_sq = np.einsum("ij,ij->i", p, p)
    for row in q:
        d2 = p_sq - 2.0 * (p @ row) + row @ row
        order = np.lexsort((id_rank, d2))
        for j in order[:k_eff]:
            selected.add(pool.ids[j])
    return selected


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def deduplicate(table: EmbeddingTable, epsilon: float = 0.0) -> List[List[str]]:
    """Group ids whose pairwise L2 distance is <= epsilon, transitively.

    Closeness is closed under chains (union-find), so a~b and b~c put a, b, c
    in one group even when a and c are farther than epsilon apart.  Singleton
    groups are omitted.  Groups and their members are sorted by id.
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    n = len(table)
    if n < 2:
        return []
    m = table.matrix.astype(np.float64)
    uf = _UnionFind(n)
    sq = np.einsum("ij,ij->i", m, m)
    eps2 = float(epsilon) ** 2
    for i in range(n - 1):
        d2 = sq[i + 1 :] - 2.0 * (m[i + 1 :] @ m[i]) + sq[i]
        for off in np.nonzero(d2 <= eps2)[0]:
            uf.union(i, int(off) + i + 1)
    clusters: Dict[int, List[str]] = {}
    for i in range(n):
        clusters.setdefault(uf.find(i), []).append(table.ids[i])
    groups = [sorted(members) for members in clusters.values() if len(members) > 1]
    groups.sort(key=lambda g: g[0])
    return groups


def exact_duplicate_groups(paths: Iterable[str | Path]) -> List[List[str]]:
    """File-level duplicate detection by content hash (exact-match mode)."""
    by_digest: Dict[str, List[str]] = {}
    for p in paths:
        digest = hashlib.sha256(Path(p).read_bytes()).hexdigest()
        by_digest.setdefault(digest, []).append(str(p))
    groups = [sorted(v) for v in by_digest.values() if len(v) > 1]
    groups.sort(key=lambda g: g[0])
    return groups
