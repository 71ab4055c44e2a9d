"""Pragmatic re-ranking of candidate captions.

Candidates arrive pre-sampled from an external speaker with their log
likelihoods.  A listener scores each candidate's fit to the image as a
within-set log probability, a one-off calibration makes the two terms
comparable on average, and the fused score

    beta * log_p_listener + (1 - beta) * rescale * log_p_speaker

orders each set.  beta=0 recovers pure speaker ranking, beta=1 pure listener
ranking.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from .corpus import tokenize
from .embeddings import EmbeddingTable, cosine
from .emotions import EmotionLabel, parse_emotion
from .errors import DataFormatError, MissingDataError

DEFAULT_LISTENER_TEMPERATURE = 0.07
TIE_BREAK_RULE = "listener-then-text"


@dataclass
class Candidate:
    text: str
    tokens: List[str]
    log_p_speaker: float
    emotion: Optional[EmotionLabel] = None
    text_embedding_id: Optional[str] = None
    log_p_listener: Optional[float] = None
    score: Optional[float] = None
    rank: Optional[int] = None
    selected: bool = False

    def __post_init__(self) -> None:
        if not math.isfinite(self.log_p_speaker) or self.log_p_speaker > 0:
            raise DataFormatError(
                f"speaker log-likelihood must be finite and <= 0, got {self.log_p_speaker}"
            )


@dataclass
class CandidateSet:
    image_id: str
    image_embedding_id: str
    candidates: List[Candidate]

    def __post_init__(self) -> None:
        if not self.candidates:
            raise DataFormatError(f"image {self.image_id!r} has no candidates")

    def scored(self) -> bool:
        return all(c.log_p_listener is not None for c in self.candidates)


@dataclass
class PragmaticConfig:
    beta: float
    rescale: float = 1.0
    tie_break: str = TIE_BREAK_RULE

    def __post_init__(self) -> None:
        if not 0.0 <= self.beta <= 1.0:
            raise DataFormatError(f"beta must lie in [0,1], got {self.beta}")
        if not self.rescale > 0:
            raise DataFormatError(f"rescale factor must be positive, got {self.rescale}")
        if self.tie_break != TIE_BREAK_RULE:
            raise DataFormatError(f"unknown tie-break rule {self.tie_break!r}")


def listener_logprob(
    candidate_set: CandidateSet,
    text_embeddings: EmbeddingTable,
    image_embeddings: EmbeddingTable,
    temperature: float = DEFAULT_LISTENER_TEMPERATURE,
) -> CandidateSet:
    """Fill log_p_listener: within-set log-softmax of cosine / temperature.

    Treating the candidate set as the listener's hypothesis space makes the
    listener term a proper probability over exactly the options being ranked.
    """
    if temperature <= 0:
        raise DataFormatError("temperature must be positive")
    image_vec = image_embeddings.get(candidate_set.image_embedding_id)
    logits = []
    for cand in candidate_set.candidates:
        if cand.text_embedding_id is None:
            raise MissingDataError(
                f"candidate {cand.text!r} has no text embedding id"
            )
        logits.append(
            cosine(text_embeddings.get(cand.text_embedding_id), image_vec) / temperature
        )
    arr = np.asarray(logits, dtype=np.float64)
    z = arr - arr.max()
    logp = z - np.log(np.exp(z).sum())
    for cand, lp in zip(candidate_set.candidates, logp):
        cand.log_p_listener = float(lp)
    return candidate_set


def calibrate_rescale(sets: Sequence[CandidateSet]) -> float:
    """Global factor making the two score terms equal in set-averaged magnitude.

    s = mean(log_p_listener) / mean(log_p_speaker) over every candidate of
    every set; applied multiplicatively to the speaker term.
    """
    if not sets:
        raise DataFormatError("no candidate sets to calibrate on")
    listener = []
    speaker = []
    for cs in sets:
        for cand in cs.candidates:
            if cand.log_p_listener is None:
                raise DataFormatError(
                    f"unscored candidate in set {cs.image_id!r}; run listener first"
                )
            listener.append(cand.log_p_listener)
            speaker.append(cand.log_p_speaker)
    mean_listener = float(np.mean(listener))
    mean_speaker = float(np.mean(speaker))
    if mean_speaker == 0.0 or mean_listener == 0.0:
        raise DataFormatError("degenerate calibration: a term averages to zero")
    return mean_listener / mean_speaker


def calibrate_rescale_per_set(sets: Sequence[CandidateSet]) -> Dict[str, float]:
    """Per-image variant of the calibration; off the default path."""
    return {cs.image_id: calibrate_rescale([cs]) for cs in sets}


def pragmatic_score(candidate: Candidate, config: PragmaticConfig) -> float:
    if candidate.log_p_listener is None:
        raise DataFormatError(f"candidate {candidate.text!r} is unscored")
    return (
        config.beta * candidate.log_p_listener
        + (1.0 - config.beta) * config.rescale * candidate.log_p_speaker
    )


def rerank(candidate_set: CandidateSet, config: PragmaticConfig) -> CandidateSet:
    """Order candidates by descending fused score; the top one is the output.

    Ties break toward the higher listener term, then lexicographic text, so
    the order is total and deterministic.
    """
    for cand in candidate_set.candidates:
        cand.score = pragmatic_score(cand, config)
    ordered = sorted(
        candidate_set.candidates,
        key=lambda c: (-c.score, -c.log_p_listener, c.text),
    )
    for pos, cand in enumerate(ordered):
        cand.rank = pos + 1
        cand.selected = pos == 0
    candidate_set.candidates = ordered
    return candidate_set


@dataclass
class SweepRow:
    beta: float
    selected: Dict[str, Candidate]  # image_id -> winning candidate


def beta_sweep(
    sets: Sequence[CandidateSet],
    betas: Sequence[float],
    rescale: float = 1.0,
) -> List[SweepRow]:
    """Rerank every set at each beta; selections feed downstream metrics."""
    rows = []
    for beta in betas:
        config = PragmaticConfig(beta=beta, rescale=rescale)
        picked: Dict[str, Candidate] = {}
        for cs in sets:
            rerank(cs, config)
            # copy: later betas re-rank the same sets in place
            picked[cs.image_id] = replace(cs.candidates[0])
        rows.append(SweepRow(beta=float(beta), selected=picked))
    return rows


def _candidate_from_json(obj: dict) -> Candidate:
    try:
        text = obj["text"]
        log_p_speaker = float(obj["log_p_speaker"])
    except KeyError as exc:
        raise DataFormatError(f"candidate missing field {exc}") from exc
    emotion = parse_emotion(obj["emotion"]) if "emotion" in obj else None
    cand = Candidate(
        text=text,
        tokens=tokenize(text),
        log_p_speaker=log_p_speaker,
        emotion=emotion,
        text_embedding_id=obj.get("text_embedding_id"),
    )
    if "log_p_listener" in obj:
        cand.log_p_listener = float(obj["log_p_listener"])
    return cand


def _candidate_to_json(cand: Candidate) -> dict:
    obj: dict = {"text": cand.text, "log_p_speaker": cand.log_p_speaker}
    if cand.emotion is not None:
        obj["emotion"] = cand.emotion.value
    if cand.text_embedding_id is not None:
        obj["text_embedding_id"] = cand.text_embedding_id
    if cand.log_p_listener is not None:
        obj["log_p_listener"] = cand.log_p_listener
    if cand.score is not None:
        obj["score"] = cand.score
        obj["rank"] = cand.rank
        obj["selected"] = cand.selected
    return obj


def load_candidate_sets(path: Union[str, Path]) -> List[CandidateSet]:
    """One JSON object per line; a leading __header__ line is ignored."""
    sets = []
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
                sets.append(
                    CandidateSet(
                        image_id=obj["image_id"],
                        image_embedding_id=obj["image_embedding_id"],
                        candidates=[_candidate_from_json(c) for c in obj["candidates"]],
                    )
                )
            except KeyError as exc:
                raise DataFormatError(f"{path}:{lineno}: missing field {exc}") from exc
    if not sets:
        raise DataFormatError(f"{path}: no candidate sets")
    return sets


def save_candidate_sets(
    sets: Sequence[CandidateSet],
    path: Union[str, Path],
    header: Optional[dict] = None,
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header is not None:
            fh.write(json.dumps({"__header__": header}, sort_keys=True) + "\n")
        for cs in sets:
            obj = {
                "image_id": cs.image_id,
                "image_embedding_id": cs.image_embedding_id,
                "candidates": [_candidate_to_json(c) for c in cs.candidates],
            }
            fh.write(json.dumps(obj, sort_keys=True) + "\n")
