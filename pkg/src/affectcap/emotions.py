"""The nine-way emotion taxonomy and its fixed valence partition.

Every module that touches emotion labels goes through this one so the label
order (and therefore every probability-vector layout) is identical everywhere:
four positive emotions, four negative ones, then ``something-else``.
"""

from __future__ import annotations

from enum import Enum

from .errors import DataFormatError


class EmotionLabel(str, Enum):
    AMUSEMENT = "amusement"
    AWE = "awe"
    CONTENTMENT = "contentment"
    EXCITEMENT = "excitement"
    ANGER = "anger"
    DISGUST = "disgust"
    FEAR = "fear"
    SADNESS = "sadness"
    SOMETHING_ELSE = "something-else"


# Canonical vector layout: positives, negatives, something-else.
EMOTIONS: tuple[EmotionLabel, ...] = tuple(EmotionLabel)
EMOTION_INDEX: dict[EmotionLabel, int] = {e: i for i, e in enumerate(EMOTIONS)}
NUM_EMOTIONS = len(EMOTIONS)

POSITIVE_EMOTIONS = frozenset(
    {
        EmotionLabel.AMUSEMENT,
        EmotionLabel.AWE,
        EmotionLabel.CONTENTMENT,
        EmotionLabel.EXCITEMENT,
    }
)
NEGATIVE_EMOTIONS = frozenset(
    {
        EmotionLabel.ANGER,
        EmotionLabel.DISGUST,
        EmotionLabel.FEAR,
        EmotionLabel.SADNESS,
    }
)
VALENCED_EMOTIONS: tuple[EmotionLabel, ...] = EMOTIONS[:8]


def parse_emotion(value: str) -> EmotionLabel:
    """Parse an emotion string; anything outside the nine labels is an error."""
    try:
        return EmotionLabel(value.strip().lower())
    except ValueError:
        raise DataFormatError(f"unknown emotion label: {value!r}") from None


def valence_of(label: EmotionLabel) -> str | None:
    """Return ``"positive"``/``"negative"``, or None for something-else."""
    if label in POSITIVE_EMOTIONS:
        return "positive"
    if label in NEGATIVE_EMOTIONS:
        return "negative"
    return None
