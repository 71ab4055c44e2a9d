"""Lexicon-backed scorers: concreteness, sentiment, subjectivity, similes.

Defaults ship in the package's ``data/`` directory as tab-separated files and
can be overridden with larger external lexicons through the CLI.  The
sentiment scorer is a documented subset of the VADER rules: token valences
are summed, a negation inside the 3 preceding tokens flips a valence's sign,
booster words immediately before a valenced token add their increment (sign
aligned), and the total is squashed to ``s / sqrt(s^2 + 15)``.  Punctuation
emphasis and ALL-CAPS rules are intentionally not implemented.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Set

import numpy as np

from .corpus import AnnotationCorpus, tokenize
from .errors import DataFormatError, MissingDataError

COMPOUND_NORM = 15.0
CLASS_THRESHOLD = 0.05
NEGATION_WINDOW = 3

CONCRETENESS_BINS = np.linspace(1.0, 5.0, 17)  # step 0.25
SUBJECTIVITY_BINS = np.linspace(0.0, 1.0, 21)  # step 0.05
SENTIMENT_BINS = np.linspace(-1.0, 1.0, 21)  # step 0.1


def _default_path(name: str) -> Path:
    return Path(str(resources.files("affectcap").joinpath("data", name)))


def _read_tsv(path: str | Path):
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"lexicon file not found: {path}")
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line.split("\t")


class ConcretenessLexicon:
    """Lemma -> concreteness score in [1, 5], case-insensitive."""

    def __init__(self, scores: Dict[str, float]):
        for lemma, s in scores.items():
            if not 1.0 <= s <= 5.0:
                raise DataFormatError(f"concreteness score out of [1,5] for {lemma!r}: {s}")
        self.scores = {lemma.lower(): float(s) for lemma, s in scores.items()}

    def __len__(self) -> int:
        return len(self.scores)

    def lookup(self, token: str) -> Optional[float]:
        """Exact lemma lookup with a plural s/es stripping fallback."""
        t = token.lower()
        if t in self.scores:
            return self.scores[t]
        if t.endswith("s") and t[:-1] in self.scores:
            return self.scores[t[:-1]]
        if t.endswith("es") and t[:-2] in self.scores:
            return self.scores[t[:-2]]
        return None

    @classmethod
    def load(cls, path: str | Path | None = None) -> "ConcretenessLexicon":
        path = path or _default_path("concreteness.tsv")
        scores: Dict[str, float] = {}
        for lineno, parts in _read_tsv(path):
            if len(parts) < 2:
                raise DataFormatError(f"{path}:{lineno}: expected 'lemma<TAB>score'")
            scores[parts[0]] = float(parts[1])
        return cls(scores)


class SentimentLexicon:
    """Token valences in [-4, 4] plus booster increments and negation words."""

    def __init__(
        self,
        valences: Dict[str, float],
        boosters: Dict[str, float],
        negations: Set[str],
    ):
        for tok, v in valences.items():
            if not -4.0 <= v <= 4.0:
                raise DataFormatError(f"valence out of [-4,4] for {tok!r}: {v}")
        self.valences = {t.lower(): float(v) for t, v in valences.items()}
        self.boosters = {t.lower(): float(v) for t, v in boosters.items()}
        self.negations = {t.lower() for t in negations}

    @classmethod
    def load(cls, path: str | Path | None = None) -> "SentimentLexicon":
        path = path or _default_path("sentiment.tsv")
        valences: Dict[str, float] = {}
        boosters: Dict[str, float] = {}
        negations: Set[str] = set()
        for lineno, parts in _read_tsv(path):
            if len(parts) < 2:
                raise DataFormatError(f"{path}:{lineno}: expected 'token<TAB>score[<TAB>kind]'")
            kind = parts[2] if len(parts) > 2 else "valence"
            if kind == "booster":
                boosters[parts[0]] = float(parts[1])
            elif kind == "negation":
                negations.add(parts[0])
            elif kind == "valence":
                valences[parts[0]] = float(parts[1])
            else:
                raise DataFormatError(f"{path}:{lineno}: unknown entry kind {kind!r}")
        lex = cls(valences, boosters, negations)
        if not lex.negations:
            raise DataFormatError(f"sentiment lexicon {path} declares no negation tokens")
        return lex


class SubjectivityLexicon:
    """Word pattern -> subjectivity weight in [0, 1]."""

    def __init__(self, weights: Dict[str, float]):
        for w, s in weights.items():
            if not 0.0 <= s <= 1.0:
                raise DataFormatError(f"subjectivity weight out of [0,1] for {w!r}: {s}")
        self.weights = {w.lower(): float(s) for w, s in weights.items()}

    def lookup(self, token: str) -> Optional[float]:
        return self.weights.get(token.lower())

    @classmethod
    def load(cls, path: str | Path | None = None) -> "SubjectivityLexicon":
        path = path or _default_path("subjectivity.tsv")
        weights: Dict[str, float] = {}
        for lineno, parts in _read_tsv(path):
            if len(parts) < 2:
                raise DataFormatError(f"{path}:{lineno}: expected 'word<TAB>weight'")
            weights[parts[0]] = float(parts[1])
        return cls(weights)


class SimilePhraseList:
    """Ordered lowercase trigger phrases, stored pre-tokenized."""

    def __init__(self, phrases: Sequence[str]):
        if not phrases:
            raise DataFormatError("simile phrase list must be nonempty")
        self.phrases: List[List[str]] = [tokenize(p) for p in phrases]

    @classmethod
    def load(cls, path: str | Path | None = None) -> "SimilePhraseList":
        path = path or _default_path("similes.txt")
        path = Path(path)
        if not path.exists():
            raise DataFormatError(f"simile phrase file not found: {path}")
        phrases = [
            line.strip()
            for line in path.read_text(encoding="utf-8").splitlines()
            if line.strip() and not line.startswith("#")
        ]
        return cls(phrases)


@dataclass
class LexiconSet:
    concreteness: ConcretenessLexicon
    sentiment: SentimentLexicon
    subjectivity: SubjectivityLexicon
    similes: SimilePhraseList


def load_default_lexicons(
    concreteness_path: str | Path | None = None,
    sentiment_path: str | Path | None = None,
    subjectivity_path: str | Path | None = None,
    similes_path: str | Path | None = None,
) -> LexiconSet:
    return LexiconSet(
        concreteness=ConcretenessLexicon.load(concreteness_path),
        sentiment=SentimentLexicon.load(sentiment_path),
        subjectivity=SubjectivityLexicon.load(subjectivity_path),
        similes=SimilePhraseList.load(similes_path),
    )


# ----------------------------------------------------------------- scorers


def concreteness_score(token: str, lexicon: ConcretenessLexicon) -> Optional[float]:
    """Concreteness of one token, or None when the lexicon does not cover it."""
    return lexicon.lookup(token)


@dataclass
class ConcretenessStats:
    mean: float
    coverage: float
    histogram_counts: List[int]
    histogram_edges: List[float]
    covered_tokens: int
    total_tokens: int


def corpus_concreteness(
    corpus: AnnotationCorpus, lexicon: ConcretenessLexicon
) -> ConcretenessStats:
    """Mean concreteness over covered token *occurrences*, plus a histogram.

    Averaging is uniform over occurrences, not over distinct word types.
    """
    values: List[float] = []
    total = 0
    for rec in corpus.records:
        for tok in rec.tokens:
            total += 1
            s = lexicon.lookup(tok)
            if s is not None:
                values.append(s)
    if not values:
        raise MissingDataError("lexicon covers no token of the corpus")
    arr = np.asarray(values)
    counts, edges = np.histogram(arr, bins=CONCRETENESS_BINS)
    return ConcretenessStats(
        mean=float(arr.mean()),
        coverage=len(values) / total,
        histogram_counts=counts.tolist(),
        histogram_edges=edges.tolist(),
        covered_tokens=len(values),
        total_tokens=total,
    )


@dataclass
class SentimentScore:
    compound: float
    label: str  # negative / neutral / positive


def sentiment_valence(tokens: Sequence[str], lexicon: SentimentLexicon) -> SentimentScore:
    """Rule-based sentence valence: compound in [-1, 1] and its class."""
    lowered = [t.lower() for t in tokens]
    total = 0.0
    for i, tok in enumerate(lowered):
        base = lexicon.valences.get(tok)
        if base is None or base == 0.0:
            continue
        v = base
        # Contiguous boosters immediately before the valenced token.
        j = i - 1
        boost = 0.0
        while j >= 0 and lowered[j] in lexicon.boosters:
            boost += lexicon.boosters[lowered[j]]
            j -= 1
        if boost:
            v += boost if v > 0 else -boost
        # A negation anywhere in the 3 preceding tokens flips the sign.
        window = lowered[max(0, i - NEGATION_WINDOW) : i]
        if any(w in lexicon.negations for w in window):
            v = -v
        total += v
    compound = total / float(np.sqrt(total * total + COMPOUND_NORM))
    if compound > CLASS_THRESHOLD:
        label = "positive"
    elif compound < -CLASS_THRESHOLD:
        label = "negative"
    else:
        label = "neutral"
    return SentimentScore(compound=compound, label=label)


def subjectivity(tokens: Sequence[str], lexicon: SubjectivityLexicon) -> float:
    """Mean subjectivity weight of matched entries; 0.0 when nothing matches."""
    matched = [w for w in (lexicon.lookup(t) for t in tokens) if w is not None]
    if not matched:
        return 0.0
    return float(np.mean(matched))


def detect_simile(tokens: Sequence[str], phrases: SimilePhraseList) -> bool:
    """True iff any trigger phrase occurs as a contiguous token subsequence."""
    lowered = [t.lower() for t in tokens]
    n = len(lowered)
    for phrase in phrases.phrases:
        m = len(phrase)
        if m == 0 or m > n:
            continue
        for start in range(n - m + 1):
            if lowered[start : start + m] == phrase:
                return True
    return False
