"""Annotation corpus loading, validation, preprocessing, vocabulary, and splits.

The ingestion format is one JSON object per line with keys ``image_id``,
``source``, ``emotion``, ``explanation`` and optional ``tokens``, ``pos``,
``annotator_id``.  A leading header line written by the CLI (an object with a
single ``__header__`` key) is skipped transparently.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .emotions import EmotionLabel, parse_emotion
from .errors import DataFormatError

# The five image collections the annotations originate from.
SOURCE_DATASETS = (
    "coco",
    "emotional-machines",
    "flickr30k",
    "visual-genome",
    "yang-affective",
)

# Words (with optional internal apostrophes, so contractions like "don't"
# survive) or single non-space punctuation marks.
_TOKEN_RE = re.compile(r"[a-z0-9]+(?:'[a-z0-9]+)*|[^\sa-z0-9]")

DEFAULT_MIN_TOKENS = 5
DEFAULT_MAX_TOKENS = 51


def tokenize(text: str) -> List[str]:
    """Lowercase, split on whitespace, and detach punctuation as own tokens.

    This is the single tokenizer used everywhere: ingestion, vocabulary
    building, lexicon scoring, and the n-gram metrics.
    """
    return _TOKEN_RE.findall(text.lower())


@dataclass
class AnnotationRecord:
    """One annotator's (image, emotion, explanation) triple."""

    image_id: str
    source: str
    emotion: EmotionLabel
    explanation: str
    tokens: List[str]
    pos_tags: Optional[List[str]] = None
    annotator_id: Optional[str] = None

    def validate(self) -> None:
        if not self.image_id:
            raise DataFormatError("record has empty image_id")
        if self.source not in SOURCE_DATASETS:
            raise DataFormatError(
                f"unknown source dataset {self.source!r}; expected one of {SOURCE_DATASETS}"
            )
        if not self.tokens:
            raise DataFormatError(f"record for image {self.image_id!r} has no tokens")
        if self.pos_tags is not None and len(self.pos_tags) != len(self.tokens):
            raise DataFormatError(
                f"record for image {self.image_id!r}: {len(self.pos_tags)} pos tags "
                f"for {len(self.tokens)} tokens"
            )


@dataclass
class AnnotationCorpus:
    """An immutable-by-convention list of records plus an image index."""

    records: List[AnnotationRecord]
    images: Dict[str, List[int]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.images:
            self.images = _build_image_index(self.records)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def image_ids(self) -> List[str]:
        return list(self.images.keys())

    def records_for_image(self, image_id: str) -> List[AnnotationRecord]:
        return [self.records[i] for i in self.images.get(image_id, [])]

    def subset(self, image_ids: Iterable[str]) -> "AnnotationCorpus":
        """New corpus restricted to the given images, preserving record order."""
        wanted = set(image_ids)
        kept = [r for r in self.records if r.image_id in wanted]
        return AnnotationCorpus(kept)


def _build_image_index(records: Sequence[AnnotationRecord]) -> Dict[str, List[int]]:
    index: Dict[str, List[int]] = {}
    for i, rec in enumerate(records):
        index.setdefault(rec.image_id, []).append(i)
    return index


def record_from_json(obj: dict) -> AnnotationRecord:
    """Build and validate a record from one parsed ingestion-format object."""
    if not isinstance(obj, dict):
        raise DataFormatError(f"record is not a JSON object: {obj!r}")
    try:
        image_id = str(obj["image_id"])
        source = str(obj["source"]).strip().lower()
        emotion = parse_emotion(str(obj["emotion"]))
        explanation = str(obj["explanation"])
    except KeyError as exc:
        raise DataFormatError(f"record missing required key {exc}") from None
    raw_tokens = obj.get("tokens")
    if raw_tokens is not None:
        if not isinstance(raw_tokens, list) or not all(isinstance(t, str) for t in raw_tokens):
            raise DataFormatError("'tokens' must be an array of strings")
        tokens = [t.lower() for t in raw_tokens]
    else:
        tokens = tokenize(explanation)
    pos = obj.get("pos")
    if pos is not None:
        if not isinstance(pos, list) or not all(isinstance(t, str) for t in pos):
            raise DataFormatError("'pos' must be an array of strings")
        if raw_tokens is None:
            raise DataFormatError("'pos' requires externally supplied 'tokens'")
    annotator = obj.get("annotator_id")
    rec = AnnotationRecord(
        image_id=image_id,
        source=source,
        emotion=emotion,
        explanation=explanation,
        tokens=tokens,
        pos_tags=list(pos) if pos is not None else None,
        annotator_id=str(annotator) if annotator is not None else None,
    )
    rec.validate()
    return rec


def record_to_json(rec: AnnotationRecord) -> dict:
    obj = {
        "image_id": rec.image_id,
        "source": rec.source,
        "emotion": rec.emotion.value,
        "explanation": rec.explanation,
        "tokens": rec.tokens,
    }
    if rec.pos_tags is not None:
        obj["pos"] = rec.pos_tags
    if rec.annotator_id is not None:
        obj["annotator_id"] = rec.annotator_id
    return obj


@dataclass
class LoadResult:
    corpus: AnnotationCorpus
    skipped_count: int
    skipped_reasons: List[str]


def _is_header_line(obj) -> bool:
    return isinstance(obj, dict) and set(obj.keys()) == {"__header__"}


def load_annotations(path: str | Path, strict: bool = False) -> LoadResult:
    """Load a line-JSON annotation file into a validated corpus.

    In strict mode any malformed record aborts the load; otherwise malformed
    records are skipped and counted.
    """
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"annotation file not found: {path}")
    records: List[AnnotationRecord] = []
    skipped: List[str] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                if lineno == 1 and _is_header_line(obj):
                    continue
                records.append(record_from_json(obj))
            except (json.JSONDecodeError, DataFormatError) as exc:
                msg = f"{path.name}:{lineno}: {exc}"
                if strict:
                    raise DataFormatError(msg) from None
                skipped.append(msg)
    return LoadResult(AnnotationCorpus(records), len(skipped), skipped)


def save_annotations(corpus: AnnotationCorpus, path: str | Path, header: dict | None = None) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        if header is not None:
            fh.write(json.dumps({"__header__": header}, sort_keys=True) + "\n")
        for rec in corpus.records:
            fh.write(json.dumps(record_to_json(rec), sort_keys=True) + "\n")


@dataclass
class PreprocessResult:
    corpus: AnnotationCorpus
    kept: int
    removed: int

    @property
    def removal_fraction(self) -> float:
        total = self.kept + self.removed
        return self.removed / total if total else 0.0


def preprocess(
    corpus: AnnotationCorpus,
    min_tokens: int = DEFAULT_MIN_TOKENS,
    max_tokens: int = DEFAULT_MAX_TOKENS,
) -> PreprocessResult:
    """Drop records whose token count falls outside ``[min_tokens, max_tokens]``.

    Tokenization already happened at load time with the shared tokenizer, so
    this filter is idempotent: running it twice changes nothing.
    """
    if min_tokens < 1:
        raise ValueError(f"min_tokens must be >= 1, got {min_tokens}")
    if max_tokens < min_tokens:
        raise ValueError(f"max_tokens ({max_tokens}) < min_tokens ({min_tokens})")
    kept = [r for r in corpus.records if min_tokens <= len(r.tokens) <= max_tokens]
    removed = len(corpus.records) - len(kept)
    return PreprocessResult(AnnotationCorpus(kept), len(kept), removed)


class Vocabulary:
    """Token-to-id map with reserved pad/start/end/out-of-vocabulary symbols.

    Ids are dense from 0: the four reserved symbols first, then every token
    whose corpus frequency is at least ``min_count``, ordered by descending
    frequency (ties alphabetical).
    """

    PAD = "<pad>"
    SOS = "<sos>"
    EOS = "<eos>"
    UNK = "<unk>"
    RESERVED = (PAD, SOS, EOS, UNK)

    def __init__(self, counts: Counter, min_count: int):
        self.min_count = min_count
        kept = sorted(
            (t for t, c in counts.items() if c >= min_count),
            key=lambda t: (-counts[t], t),
        )
        for t in kept:
            if t in self.RESERVED:
                raise DataFormatError(f"corpus token collides with reserved symbol {t!r}")
        self.token_to_id: Dict[str, int] = {t: i for i, t in enumerate(self.RESERVED)}
        for t in kept:
            self.token_to_id[t] = len(self.token_to_id)
        self.id_to_token: Dict[int, str] = {i: t for t, i in self.token_to_id.items()}

    @property
    def pad_id(self) -> int:
        return self.token_to_id[self.PAD]

    @property
    def sos_id(self) -> int:
        return self.token_to_id[self.SOS]

    @property
    def eos_id(self) -> int:
        return self.token_to_id[self.EOS]

    @property
    def unk_id(self) -> int:
        return self.token_to_id[self.UNK]

    def __len__(self) -> int:
        return len(self.token_to_id)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def encode(self, tokens: Sequence[str]) -> List[int]:
        unk = self.unk_id
        return [self.token_to_id.get(t, unk) for t in tokens]

    def decode(self, ids: Sequence[int]) -> List[str]:
        return [self.id_to_token[i] for i in ids]


def build_vocabulary(corpus: AnnotationCorpus, min_count: int = 2) -> Vocabulary:
    """Build a vocabulary of tokens occurring at least ``min_count`` times."""
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")
    if not corpus.records:
        raise DataFormatError("cannot build a vocabulary from an empty corpus")
    counts: Counter = Counter()
    for rec in corpus.records:
        counts.update(rec.tokens)
    return Vocabulary(counts, min_count)


@dataclass
class SplitAssignment:
    """Image-level train/val/test partition (all records of an image together)."""

    assignment: Dict[str, str]
    ratios: Tuple[float, float, float]
    seed: int

    PARTS = ("train", "val", "test")

    def part_of(self, image_id: str) -> str:
        return self.assignment[image_id]

    def images_in(self, part: str) -> List[str]:
        return [i for i, p in self.assignment.items() if p == part]

    def apply(self, corpus: AnnotationCorpus, part: str) -> AnnotationCorpus:
        if part not in self.PARTS:
            raise ValueError(f"unknown split part {part!r}")
        return corpus.subset(self.images_in(part))


def split(
    corpus: AnnotationCorpus,
    ratios: Tuple[float, float, float] = (0.85, 0.05, 0.10),
    seed: int = 0,
) -> SplitAssignment:
    """Shuffle images with a seeded generator and cut at the cumulative ratios.

    The split unit is the image, never the record, so the three parts share no
    underlying images.
    """
    import random as _random

    if len(ratios) != 3:
        raise ValueError("ratios must be a (train, val, test) triple")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    image_ids = sorted(corpus.images.keys())
    if len(image_ids) < 3:
        raise DataFormatError(f"need at least 3 images to split, got {len(image_ids)}")
    rng = _random.Random(seed)
    rng.shuffle(image_ids)
    n = len(image_ids)
    cut1 = round(ratios[0] * n)
    cut2 = round((ratios[0] + ratios[1]) * n)
    assignment: Dict[str, str] = {}
    for i, img in enumerate(image_ids):
        if i < cut1:
            assignment[img] = "train"
        elif i < cut2:
            assignment[img] = "val"
        else:
            assignment[img] = "test"
    return SplitAssignment(assignment, tuple(ratios), seed)
