"""Evaluation battery for generated affective captions.

Reference-overlap scores (BLEU, ROUGE-L), embedding scores (CLIPScore and its
reference-aware harmonic variant), diversity measures (unique fraction,
training-set Max-LCS, mean pairwise cosine), and affect-specific measures
(simile fraction, emotional alignment against strong-majority labels).

CIDEr is deliberately absent: requiring similarity to every reference at once
is the wrong target when annotators legitimately disagree about an image's
emotional reading.  METEOR and SPICE need external resources and are listed
as unsupported rather than silently omitted.
"""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .classifiers import TextEmotionClassifier, predict_emotion
from .corpus import AnnotationCorpus, tokenize
from .embeddings import EmbeddingTable, cosine
from .emotions import EmotionLabel, parse_emotion
from .errors import DataFormatError, MissingDataError
from .lexicons import SimilePhraseList, detect_simile

ROUGE_BETA = 1.2
CLIPSCORE_WEIGHT = 2.5
DEFAULT_LCS_SAMPLE = 10_000
UNSUPPORTED_METRICS = ("meteor", "spice")

REPORT_COLUMNS = (
    "bleu_1", "bleu_2", "bleu_3", "bleu_4", "rouge_l",
    "clipscore", "ref_clipscore",
    "unique_pct", "max_lcs_pct", "clip_div_cos",
    "simile_pct", "emotional_alignment_pct",
)


@dataclass
class GenerationRecord:
    image_id: str
    text: str
    tokens: List[str]
    emotion: Optional[EmotionLabel] = None
    text_embedding_id: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.tokens:
            raise DataFormatError(f"empty generation for image {self.image_id!r}")


def load_generations(path: Union[str, Path]) -> List[GenerationRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}:{lineno}: bad JSON: {exc}") from exc
            if lineno == 1 and "__header__" in obj:
                continue
            try:
                records.append(
                    GenerationRecord(
                        image_id=obj["image_id"],
                        text=obj["text"],
                        tokens=tokenize(obj["text"]),
                        emotion=parse_emotion(obj["emotion"]) if "emotion" in obj else None,
                        text_embedding_id=obj.get("text_embedding_id"),
                    )
                )
            except KeyError as exc:
                raise DataFormatError(f"{path}:{lineno}: missing field {exc}") from exc
    if not records:
        raise DataFormatError(f"{path}: no generations")
    return records


def save_generations(
    records: Sequence[GenerationRecord],
    path: Union[str, Path],
    header: Optional[dict] = None,
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header is not None:
            fh.write(json.dumps({"__header__": header}, sort_keys=True) + "\n")
        for rec in records:
            obj: dict = {"image_id": rec.image_id, "text": rec.text}
            if rec.emotion is not None:
                obj["emotion"] = rec.emotion.value
            if rec.text_embedding_id is not None:
                obj["text_embedding_id"] = rec.text_embedding_id
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _closest_ref_length(cand_len: int, ref_lens: Sequence[int]) -> int:
    # ties go to the shorter reference, the usual convention
    return min(ref_lens, key=lambda r: (abs(r - cand_len), r))


def _clipped_counts(
    candidate: Sequence[str], references: Sequence[Sequence[str]], n: int
) -> Tuple[int, int]:
    cand_counts = _ngrams(candidate, n)
    max_ref: Counter = Counter()
    for ref in references:
        for gram, count in _ngrams(ref, n).items():
            if count > max_ref[gram]:
                max_ref[gram] = count
    clipped = sum(min(count, max_ref[gram]) for gram, count in cand_counts.items())
    return clipped, max(len(candidate) - n + 1, 0)


def _bleu_from_stats(
    matches: Sequence[int], totals: Sequence[int],
    cand_len: int, ref_len: int, smoothing: bool,
) -> float:
    log_precisions = []
    for m, t in zip(matches, totals):
        if smoothing and m == 0:
            m, t = m + 1, t + 1
        if m == 0 or t == 0:
            return 0.0
        log_precisions.append(math.log(m / t))
    bp = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / max(cand_len, 1))
    return bp * math.exp(sum(log_precisions) / len(log_precisions))


def bleu_n(
    candidate: Sequence[str],
    references: Sequence[Sequence[str]],
    n: int,
    smoothing: bool = False,
) -> float:
    """Sentence BLEU-n: geometric mean of clipped precisions 1..n, with BP.

    Smoothing replaces any zero clipped count with add-one on both sides of
    the ratio; without it a candidate shorter than n is rejected because the
    order-n precision is undefined.
    """
    if not 1 <= n <= 4:
        raise DataFormatError(f"BLEU order must be 1..4, got {n}")
    if not references:
        raise DataFormatError("BLEU needs at least one reference")
    if not candidate:
        raise DataFormatError("empty candidate")
    if len(candidate) < n and not smoothing:
        raise DataFormatError(
            f"candidate shorter than n={n}; enable smoothing or lower the order"
        )
    matches, totals = [], []
    for order in range(1, n + 1):
        m, t = _clipped_counts(candidate, references, order)
        matches.append(m)
        totals.append(t)
    ref_len = _closest_ref_length(len(candidate), [len(r) for r in references])
    return _bleu_from_stats(matches, totals, len(candidate), ref_len, smoothing)


def corpus_bleu(
    candidates: Sequence[Sequence[str]],
    references: Sequence[Sequence[Sequence[str]]],
    n: int,
    smoothing: bool = False,
) -> float:
    """Corpus BLEU-n: clipped counts pooled across segments before the ratio."""
    if not 1 <= n <= 4:
        raise DataFormatError(f"BLEU order must be 1..4, got {n}")
    if len(candidates) != len(references) or not candidates:
        raise DataFormatError("candidates and references must align and be nonempty")
    matches = [0] * n
    totals = [0] * n
    cand_len = 0
    ref_len = 0
    for cand, refs in zip(candidates, references):
        if not refs:
            raise DataFormatError("segment without references")
        if not cand:
            raise DataFormatError("empty candidate segment")
        for order in range(1, n + 1):
            m, t = _clipped_counts(cand, refs, order)
            matches[order - 1] += m
            totals[order - 1] += t
        cand_len += len(cand)
        ref_len += _closest_ref_length(len(cand), [len(r) for r in refs])
    return _bleu_from_stats(matches, totals, cand_len, ref_len, smoothing)


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Token-level longest common subsequence, O(|a|·|b|) table with two rows."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(
    candidate: Sequence[str], references: Sequence[Sequence[str]]
) -> float:
    """ROUGE-L F-score, recall-weighted (beta=1.2), max over references."""
    if not references:
        raise DataFormatError("ROUGE-L needs at least one reference")
    if not candidate:
        raise DataFormatError("empty candidate")
    best = 0.0
    b2 = ROUGE_BETA ** 2
    for ref in references:
        if not ref:
            raise DataFormatError("empty reference")
        lcs = lcs_length(candidate, ref)
        if lcs == 0:
            continue
        p = lcs / len(candidate)
        r = lcs / len(ref)
        best = max(best, (1 + b2) * r * p / (r + b2 * p))
    return best


def clip_score(caption_emb: np.ndarray, image_emb: np.ndarray) -> float:
    """2.5 * max(cosine, 0); tables show this value times 100."""
    return CLIPSCORE_WEIGHT * max(cosine(caption_emb, image_emb), 0.0)


def ref_clip_score(
    caption_emb: np.ndarray,
    image_emb: np.ndarray,
    reference_embs: Sequence[np.ndarray],
) -> float:
    """Harmonic mean of the image term and the best-reference term."""
    if len(reference_embs) == 0:
        raise DataFormatError("RefCLIPScore needs at least one reference embedding")
    image_term = clip_score(caption_emb, image_emb)
    ref_term = CLIPSCORE_WEIGHT * max(
        max(cosine(caption_emb, ref), 0.0) for ref in reference_embs
    )
    if image_term == 0.0 or ref_term == 0.0:
        return 0.0
    return 2.0 * image_term * ref_term / (image_term + ref_term)


def subsample_utterances(
    token_lists: Sequence[Sequence[str]], size: int = DEFAULT_LCS_SAMPLE, seed: int = 0
) -> List[Sequence[str]]:
    """Seeded prefix of a permutation, so larger samples contain smaller ones."""
    if size <= 0:
        raise DataFormatError("sample size must be positive")
    order = np.random.default_rng(seed).permutation(len(token_lists))
    return [token_lists[i] for i in order[: min(size, len(token_lists))]]


def max_lcs_detail(
    generation: Sequence[str], training_sample: Sequence[Sequence[str]]
) -> Tuple[int, float]:
    """(longest LCS length, percent of the generation that length covers)."""
    if not generation:
        raise DataFormatError("empty generation")
    if not training_sample:
        raise DataFormatError("empty training sample")
    best = max(lcs_length(generation, t) for t in training_sample)
    return best, 100.0 * best / len(generation)


def max_lcs(
    generation: Sequence[str], training_sample: Sequence[Sequence[str]]
) -> float:
    return max_lcs_detail(generation, training_sample)[1]


def unique_fraction(texts: Sequence[str]) -> float:
    if not texts:
        raise DataFormatError("no generations")
    return 100.0 * len(set(texts)) / len(texts)


def clip_div_cos(embeddings: Sequence[np.ndarray]) -> float:
    """Mean pairwise cosine over all unordered pairs; lower = more diverse."""
    if len(embeddings) < 2:
        raise DataFormatError("need at least 2 embeddings for pairwise cosine")
    total = 0.0
    count = 0
    for i in range(len(embeddings)):
        for j in range(i + 1, len(embeddings)):
            total += cosine(embeddings[i], embeddings[j])
            count += 1
    return total / count


def emotional_alignment(
    generations: Sequence[GenerationRecord],
    clf: TextEmotionClassifier,
    majority: Dict[str, EmotionLabel],
) -> Tuple[float, int]:
    """Percent of covered generations whose classifier argmax hits the majority.

    Only images with a strong-majority label count; the support size comes
    back alongside the score so sparse coverage is visible.
    """
    covered = [g for g in generations if g.image_id in majority]
    if not covered:
        raise MissingDataError("no generation falls on a strong-majority image")
    hits = sum(
        1
        for g in covered
        if predict_emotion(clf, g.tokens).argmax_label() == majority[g.image_id]
    )
    return 100.0 * hits / len(covered), len(covered)


def simile_fraction(
    generations: Sequence[GenerationRecord], phrases: SimilePhraseList
) -> float:
    """Percent containing a figurative trigger; ground truth sits near 19.7."""
    if not generations:
        raise DataFormatError("no generations")
    n = sum(1 for g in generations if detect_simile(g.tokens, phrases))
    return 100.0 * n / len(generations)


@dataclass
class MetricConfig:
    smoothing: bool = True
    lcs_sample_size: int = DEFAULT_LCS_SAMPLE
    lcs_seed: int = 0

    def fingerprint(self) -> dict:
        return {
            "smoothing": self.smoothing,
            "lcs_sample_size": self.lcs_sample_size,
            "lcs_seed": self.lcs_seed,
        }


@dataclass
class MetricReport:
    values: Dict[str, Optional[float]]
    support: Dict[str, int]
    config: dict = field(default_factory=dict)
    unsupported: Tuple[str, ...] = UNSUPPORTED_METRICS

    def as_dict(self) -> dict:
        return {
            "values": {k: self.values.get(k) for k in REPORT_COLUMNS},
            "support": dict(self.support),
            "unsupported": list(self.unsupported),
            "config": dict(self.config),
        }


def reference_embedding_ids(table: EmbeddingTable) -> Dict[str, List[str]]:
    """Group ids of the form "<image_id>#<k>" by image; order by k, then id."""
    groups: Dict[str, List[str]] = {}
    for eid in table.ids:
        if "#" in eid:
            image_id = eid.rsplit("#", 1)[0]
            groups.setdefault(image_id, []).append(eid)
    for ids in groups.values():
        ids.sort(key=lambda e: (len(e), e))
    return groups


def evaluate_all(
    generations: Sequence[GenerationRecord],
    references: Optional[AnnotationCorpus] = None,
    text_embeddings: Optional[EmbeddingTable] = None,
    image_embeddings: Optional[EmbeddingTable] = None,
    clf: Optional[TextEmotionClassifier] = None,
    majority: Optional[Dict[str, EmotionLabel]] = None,
    similes: Optional[SimilePhraseList] = None,
    training_tokens: Optional[Sequence[Sequence[str]]] = None,
    config: Optional[MetricConfig] = None,
) -> MetricReport:
    """One report over a generation set; absent inputs mark metrics unavailable.

    A metric is never silently zero: a None value plus zero support means its
    inputs were not supplied, while a numeric value always carries the number
    of generations that contributed.
    """
    if not generations:
        raise DataFormatError("no generations")
    config = config or MetricConfig()
    values: Dict[str, Optional[float]] = {k: None for k in REPORT_COLUMNS}
    support: Dict[str, int] = {k: 0 for k in REPORT_COLUMNS}

    if references is not None:
        ref_tokens = {
            g.image_id: [r.tokens for r in references.records_for_image(g.image_id)]
            for g in generations
            if g.image_id in references.images
        }
        covered = [g for g in generations if g.image_id in ref_tokens]
        if covered:
            for n in range(1, 5):
                key = f"bleu_{n}"
                scores = [
                    bleu_n(g.tokens, ref_tokens[g.image_id], n, config.smoothing)
                    for g in covered
                ]
                values[key] = 100.0 * float(np.mean(scores))
                support[key] = len(covered)
            rl = [rouge_l(g.tokens, ref_tokens[g.image_id]) for g in covered]
            values["rouge_l"] = 100.0 * float(np.mean(rl))
            support["rouge_l"] = len(covered)

    have_embs = text_embeddings is not None and image_embeddings is not None
    if have_embs:
        scored = [
            g
            for g in generations
            if g.text_embedding_id in text_embeddings.index
            and g.image_id in image_embeddings.index
        ]
        if scored:
            clips = [
                clip_score(
                    text_embeddings.get(g.text_embedding_id),
                    image_embeddings.get(g.image_id),
                )
                for g in scored
            ]
            values["clipscore"] = 100.0 * float(np.mean(clips))
            support["clipscore"] = len(scored)

            ref_groups = reference_embedding_ids(text_embeddings)
            with_refs = [g for g in scored if ref_groups.get(g.image_id)]
            if with_refs:
                rcs = [
                    ref_clip_score(
                        text_embeddings.get(g.text_embedding_id),
                        image_embeddings.get(g.image_id),
                        [text_embeddings.get(r) for r in ref_groups[g.image_id]],
                    )
                    for g in with_refs
                ]
                values["ref_clipscore"] = 100.0 * float(np.mean(rcs))
                support["ref_clipscore"] = len(with_refs)

        div_embs = [
            text_embeddings.get(g.text_embedding_id)
            for g in generations
            if g.text_embedding_id in text_embeddings.index
        ]
        if len(div_embs) >= 2:
            values["clip_div_cos"] = clip_div_cos(div_embs)
            support["clip_div_cos"] = len(div_embs)

    values["unique_pct"] = unique_fraction([g.text for g in generations])
    support["unique_pct"] = len(generations)

    if training_tokens:
        sample = subsample_utterances(
            list(training_tokens), config.lcs_sample_size, config.lcs_seed
        )
        values["max_lcs_pct"] = float(
            np.mean([max_lcs(g.tokens, sample) for g in generations])
        )
        support["max_lcs_pct"] = len(generations)

    if similes is not None:
        values["simile_pct"] = simile_fraction(generations, similes)
        support["simile_pct"] = len(generations)

    if clf is not None and majority:
        covered = [g for g in generations if g.image_id in majority]
        if covered:
            pct, n_cov = emotional_alignment(generations, clf, majority)
            values["emotional_alignment_pct"] = pct
            support["emotional_alignment_pct"] = n_cov

    return MetricReport(values=values, support=support, config=config.fingerprint())


def reports_to_csv(
    rows: Sequence[Tuple[str, MetricReport]], path: Union[str, Path]
) -> None:
    """One row per generation set, columns in table order; blank = unavailable."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["set"] + list(REPORT_COLUMNS))
        for name, report in rows:
            writer.writerow(
                [name]
                + [
                    "" if report.values.get(c) is None else f"{report.values[c]:.4f}"
                    for c in REPORT_COLUMNS
                ]
            )
