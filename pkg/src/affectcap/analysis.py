"""Corpus-level descriptive statistics: lexical richness, diversity, emotions.

Per-caption and per-image part-of-speech tables accept either the universal
tagset (NOUN, PRON, ...) or Penn Treebank tags; anything unrecognized simply
falls outside the five reported categories.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .corpus import AnnotationCorpus
from .emotions import (
    EMOTIONS,
    EmotionLabel,
    NEGATIVE_EMOTIONS,
    POSITIVE_EMOTIONS,
    valence_of,
)
from .errors import DataFormatError
from .lexicons import (
    CONCRETENESS_BINS,
    SENTIMENT_BINS,
    SUBJECTIVITY_BINS,
    LexiconSet,
    corpus_concreteness,
    detect_simile,
    sentiment_valence,
    subjectivity,
)

POS_CATEGORIES = ("nouns", "pronouns", "adjectives", "adpositions", "verbs")

_TAG_TO_CATEGORY = {
    "NOUN": "nouns", "PROPN": "nouns",
    "NN": "nouns", "NNS": "nouns", "NNP": "nouns", "NNPS": "nouns",
    "PRON": "pronouns",
    "PRP": "pronouns", "PRP$": "pronouns", "WP": "pronouns", "WP$": "pronouns",
    "ADJ": "adjectives",
    "JJ": "adjectives", "JJR": "adjectives", "JJS": "adjectives",
    "ADP": "adpositions", "IN": "adpositions",
    "VERB": "verbs",
    "VB": "verbs", "VBD": "verbs", "VBG": "verbs", "VBN": "verbs",
    "VBP": "verbs", "VBZ": "verbs", "MD": "verbs",
}


def pos_category(tag: str) -> Optional[str]:
    return _TAG_TO_CATEGORY.get(tag.upper())


def _require_pos(corpus: AnnotationCorpus) -> None:
    for rec in corpus.records:
        if rec.pos_tags is None:
            raise DataFormatError(
                f"record for image {rec.image_id!r} has no pos tags; "
                "POS tables need externally tagged input"
            )


@dataclass
class PosStatsRow:
    """Mean per-caption counts: total words plus the five POS categories."""

    words: float
    nouns: float
    pronouns: float
    adjectives: float
    adpositions: float
    verbs: float

    def as_dict(self) -> Dict[str, float]:
        return {
            "words": self.words,
            **{c: getattr(self, c) for c in POS_CATEGORIES},
        }


def pos_stats_per_caption(corpus: AnnotationCorpus) -> PosStatsRow:
    """Average occurrence counts per record for each POS category."""
    _require_pos(corpus)
    if not corpus.records:
        raise DataFormatError("empty corpus")
    totals = {c: 0 for c in POS_CATEGORIES}
    words = 0
    for rec in corpus.records:
        words += len(rec.tokens)
        for tag in rec.pos_tags:
            cat = pos_category(tag)
            if cat is not None:
                totals[cat] += 1
    n = len(corpus.records)
    return PosStatsRow(words=words / n, **{c: totals[c] / n for c in POS_CATEGORIES})


@dataclass
class PosDiversityRow:
    """Per-image mean unique (token, category) counts, raw and normalized.

    The normalized variant divides each image's unique count by its number of
    annotations before averaging, compensating for unequal annotator counts.
    """

    raw: Dict[str, float]
    normalized: Dict[str, float]

    def as_dict(self) -> Dict[str, Dict[str, float]]:
        return {"raw": dict(self.raw), "normalized": dict(self.normalized)}


def pos_diversity_per_image(corpus: AnnotationCorpus) -> PosDiversityRow:
    _require_pos(corpus)
    if not corpus.images:
        raise DataFormatError("empty corpus")
    raw_sums = {c: 0.0 for c in POS_CATEGORIES}
    norm_sums = {c: 0.0 for c in POS_CATEGORIES}
    for image_id, rec_ids in corpus.images.items():
        uniques: Dict[str, set] = {c: set() for c in POS_CATEGORIES}
        for idx in rec_ids:
            rec = corpus.records[idx]
            for tok, tag in zip(rec.tokens, rec.pos_tags):
                cat = pos_category(tag)
                if cat is not None:
                    uniques[cat].add(tok)
        n_recs = len(rec_ids)
        for c in POS_CATEGORIES:
            raw_sums[c] += len(uniques[c])
            norm_sums[c] += len(uniques[c]) / n_recs
    n_images = len(corpus.images)
    return PosDiversityRow(
        raw={c: raw_sums[c] / n_images for c in POS_CATEGORIES},
        normalized={c: norm_sums[c] / n_images for c in POS_CATEGORIES},
    )


@dataclass
class EmotionHistogram:
    counts: Dict[str, int]
    fractions: Dict[str, float]
    rollup: Dict[str, float]  # positive / negative / something-else

    def total(self) -> int:
        return sum(self.counts.values())


def emotion_distribution(corpus: AnnotationCorpus) -> EmotionHistogram:
    """Empirical label counts plus the positive/negative/something-else roll-up."""
    if not corpus.records:
        raise DataFormatError("empty corpus")
    counts = {e.value: 0 for e in EMOTIONS}
    for rec in corpus.records:
        counts[rec.emotion.value] += 1
    total = len(corpus.records)
    fractions = {k: v / total for k, v in counts.items()}
    rollup = {
        "positive": sum(counts[e.value] for e in POSITIVE_EMOTIONS) / total,
        "negative": sum(counts[e.value] for e in NEGATIVE_EMOTIONS) / total,
        "something-else": counts[EmotionLabel.SOMETHING_ELSE.value] / total,
    }
    return EmotionHistogram(counts=counts, fractions=fractions, rollup=rollup)


@dataclass
class AgreementStats:
    strong_majority_fraction: float
    strong_majority_count: int
    unique_strong_majority_count: int
    mixed_valence_fraction: float
    majority_composition: Dict[str, float]  # emotion -> share of strong-majority images
    n_images: int


def majority_labels(
    corpus: AnnotationCorpus, threshold: float = 0.5
) -> Dict[str, EmotionLabel]:
    """Map each image with a unique strong majority to that majority label.

    A strong majority needs one label chosen by strictly more than
    ``threshold`` of the image's annotators; with the default 0.5 the argmax
    label is necessarily unique, but lower thresholds can tie, and tied
    images are excluded.
    """
    out: Dict[str, EmotionLabel] = {}
    for image_id, rec_ids in corpus.images.items():
        counts: Dict[EmotionLabel, int] = {}
        for idx in rec_ids:
            lab = corpus.records[idx].emotion
            counts[lab] = counts.get(lab, 0) + 1
        n = len(rec_ids)
        top = max(counts.values())
        if top <= threshold * n:
            continue
        winners = [lab for lab, c in counts.items() if c == top]
        if len(winners) == 1:
            out[image_id] = winners[0]
    return out


def majority_stats(corpus: AnnotationCorpus, threshold: float = 0.5) -> AgreementStats:
    if not corpus.records:
        raise DataFormatError("empty corpus")
    strong = 0
    unique_strong = 0
    mixed = 0
    composition = {e.value: 0 for e in EMOTIONS}
    for image_id, rec_ids in corpus.images.items():
        counts: Dict[EmotionLabel, int] = {}
        has_pos = has_neg = False
        for idx in rec_ids:
            lab = corpus.records[idx].emotion
            counts[lab] = counts.get(lab, 0) + 1
            val = valence_of(lab)
            has_pos = has_pos or val == "positive"
            has_neg = has_neg or val == "negative"
        if has_pos and has_neg:
            mixed += 1
        n = len(rec_ids)
        top = max(counts.values())
        if top > threshold * n:
            strong += 1
            winners = [lab for lab, c in counts.items() if c == top]
            if len(winners) == 1:
                unique_strong += 1
                composition[winners[0].value] += 1
    n_images = len(corpus.images)
    comp_frac = {
        k: (v / unique_strong if unique_strong else 0.0) for k, v in composition.items()
    }
    return AgreementStats(
        strong_majority_fraction=strong / n_images,
        strong_majority_count=strong,
        unique_strong_majority_count=unique_strong,
        mixed_valence_fraction=mixed / n_images,
        majority_composition=comp_frac,
        n_images=n_images,
    )


def _histogram(values: List[float], edges: np.ndarray) -> Dict[str, List[float]]:
    counts, _ = np.histogram(np.asarray(values, dtype=float), bins=edges)
    return {"edges": [float(e) for e in edges], "counts": [int(c) for c in counts]}


def analysis_report(corpus: AnnotationCorpus, lexicons: LexiconSet) -> dict:
    """One structured document bundling every corpus statistic.

    POS sections degrade gracefully: when any record lacks tags they are
    marked unavailable instead of failing the whole report.
    """
    if not corpus.records:
        raise DataFormatError("empty corpus")

    report: dict = {
        "corpus": {
            "records": len(corpus.records),
            "images": len(corpus.images),
            "mean_tokens": float(np.mean([len(r.tokens) for r in corpus.records])),
            "distinct_tokens": len({t for r in corpus.records for t in r.tokens}),
        }
    }

    has_pos = all(r.pos_tags is not None for r in corpus.records)
    if has_pos:
        report["pos_per_caption"] = {
            "available": True,
            **pos_stats_per_caption(corpus).as_dict(),
        }
        report["pos_per_image"] = {
            "available": True,
            **pos_diversity_per_image(corpus).as_dict(),
        }
    else:
        report["pos_per_caption"] = {"available": False}
        report["pos_per_image"] = {"available": False}

    hist = emotion_distribution(corpus)
    report["emotion_distribution"] = {
        "counts": hist.counts,
        "fractions": hist.fractions,
        "rollup": hist.rollup,
    }

    agg = majority_stats(corpus)
    report["agreement"] = {
        "strong_majority_fraction": agg.strong_majority_fraction,
        "strong_majority_count": agg.strong_majority_count,
        "unique_strong_majority_count": agg.unique_strong_majority_count,
        "mixed_valence_fraction": agg.mixed_valence_fraction,
        "majority_composition": agg.majority_composition,
        "n_images": agg.n_images,
    }

    conc = corpus_concreteness(corpus, lexicons.concreteness)
    report["concreteness"] = {
        "mean": conc.mean,
        "coverage": conc.coverage,
        "histogram": {"edges": conc.histogram_edges, "counts": conc.histogram_counts},
    }

    subj_scores = [subjectivity(r.tokens, lexicons.subjectivity) for r in corpus.records]
    report["subjectivity"] = {
        "mean": float(np.mean(subj_scores)),
        "histogram": _histogram(subj_scores, SUBJECTIVITY_BINS),
    }

    sent_scores = [sentiment_valence(r.tokens, lexicons.sentiment) for r in corpus.records]
    compounds = [s.compound for s in sent_scores]
    n = len(sent_scores)
    report["sentiment"] = {
        "mean_compound": float(np.mean(compounds)),
        "class_fractions": {
            label: sum(1 for s in sent_scores if s.label == label) / n
            for label in ("negative", "neutral", "positive")
        },
        "histogram": _histogram(compounds, SENTIMENT_BINS),
    }

    n_similes = sum(1 for r in corpus.records if detect_simile(r.tokens, lexicons.similes))
    report["similes"] = {"fraction": n_similes / n, "count": n_similes}

    report["histogram_bins"] = {
        "concreteness": [float(e) for e in CONCRETENESS_BINS],
        "subjectivity": [float(e) for e in SUBJECTIVITY_BINS],
        "sentiment": [float(e) for e in SENTIMENT_BINS],
    }
    return report
