"""Lightweight trainable emotion predictors.

Two convex linear models: a multinomial logistic classifier over bag-of-1,2-gram
counts (text to emotion) and a softmax probe over image embeddings trained
against empirical per-image emotion distributions with a KL objective.  Both
use plain mini-batch gradient descent; convexity makes anything fancier
unnecessary at this scale.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse

from ._version import __version__
from .corpus import AnnotationCorpus
from .embeddings import EmbeddingTable
from .emotions import (
    EMOTION_INDEX,
    EMOTIONS,
    EmotionLabel,
    NUM_EMOTIONS,
    VALENCED_EMOTIONS,
    valence_of,
)
from .errors import DataFormatError, MissingDataError

MODEL_FORMAT = "affectcap-model/1"
GRADIENT_TOLERANCE = 1e-4


@dataclass
class EmotionDistribution:
    """Probability vector over the nine labels in canonical order."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.shape != (NUM_EMOTIONS,):
            raise DataFormatError(f"expected {NUM_EMOTIONS} probabilities")
        if np.any(self.probs < 0) or abs(float(self.probs.sum()) - 1.0) > 1e-6:
            raise DataFormatError("not a probability distribution")

    def argmax_label(self, valenced_only: bool = False) -> EmotionLabel:
        k = len(VALENCED_EMOTIONS) if valenced_only else NUM_EMOTIONS
        return EMOTIONS[int(np.argmax(self.probs[:k]))]

    def as_dict(self) -> Dict[str, float]:
        return {e.value: float(p) for e, p in zip(EMOTIONS, self.probs)}


@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 200
    batch_size: Optional[int] = None  # None = full batch
    l2: float = 0.0
    seed: int = 0
    class_weighting: bool = False  # inverse-frequency example weights


def softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _penalty_grad(weights: np.ndarray, l2: float) -> np.ndarray:
    g = l2 * weights
    g[:, -1] = 0.0  # bias column carries no penalty
    return g


def _penalty(weights: np.ndarray, l2: float) -> float:
    return 0.5 * l2 * float(np.sum(weights[:, :-1] ** 2))


def ce_loss_and_grad(
    weights: np.ndarray,
    features,
    labels: np.ndarray,
    l2: float = 0.0,
    example_weights: Optional[np.ndarray] = None,
) -> Tuple[float, np.ndarray]:
    """Weighted mean cross-entropy with L2 (bias excluded) and its gradient.

    features is n x (F+1) with a trailing all-ones bias column; sparse CSR or
    dense both work.  labels are class indices.
    """
    n = features.shape[0]
    scores = np.asarray(features @ weights.T)
    logp = log_softmax(scores)
    if example_weights is None:
        w = np.full(n, 1.0 / n)
    else:
        w = np.asarray(example_weights, dtype=np.float64)
        w = w / w.sum()
    loss = -float(np.dot(w, logp[np.arange(n), labels])) + _penalty(weights, l2)
    delta = np.exp(logp)
    delta[np.arange(n), labels] -= 1.0
    delta *= w[:, None]
    grad = np.asarray((features.T @ delta)).T + _penalty_grad(weights, l2)
    return loss, grad


def kl_loss_and_grad(
    weights: np.ndarray,
    features: np.ndarray,
    targets: np.ndarray,
    l2: float = 0.0,
) -> Tuple[float, np.ndarray]:
    """Mean KL(target || prediction) with L2; gradient of scores is pred - target."""
    n = features.shape[0]
    logp = log_softmax(features @ weights.T)
    t = np.asarray(targets, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        tlogt = np.where(t > 0, t * np.log(t), 0.0)
    loss = float(np.sum(tlogt - t * logp) / n) + _penalty(weights, l2)
    delta = (np.exp(logp) - t) / n
    grad = (features.T @ delta).T + _penalty_grad(weights, l2)
    return loss, grad


def _gd(loss_and_grad, weights, data_rows, lr, epochs, batch_size, seed):
    """Mini-batch gradient descent with seeded shuffling.

    loss_and_grad(weights, row_indices) must return the full-data loss when
    given all rows; per-epoch losses are recorded on the full data so the
    trajectory is comparable across batch sizes.
    """
    rng = np.random.default_rng(seed)
    all_rows = np.arange(data_rows)
    losses = [loss_and_grad(weights, all_rows)[0]]
    for _ in range(epochs):
        if batch_size is None or batch_size >= data_rows:
            _, grad = loss_and_grad(weights, all_rows)
            weights = weights - lr * grad
        else:
            perm = rng.permutation(data_rows)
            for start in range(0, data_rows, batch_size):
                batch = perm[start : start + batch_size]
                _, grad = loss_and_grad(weights, batch)
                weights = weights - lr * grad
        losses.append(loss_and_grad(weights, all_rows)[0])
    return weights, losses


def ngram_keys(tokens: Sequence[str]) -> List[str]:
    """Unigram and bigram keys; bigrams join with a space, which tokens never contain."""
    keys = list(tokens)
    keys.extend(f"{a} {b}" for a, b in zip(tokens, tokens[1:]))
    return keys


def build_feature_index(corpus: AnnotationCorpus) -> Dict[str, int]:
    grams = {k for rec in corpus.records for k in ngram_keys(rec.tokens)}
    return {g: i for i, g in enumerate(sorted(grams))}


def featurize(
    token_lists: Iterable[Sequence[str]], feature_index: Dict[str, int]
) -> sparse.csr_matrix:
    """CSR count matrix, one row per token list, trailing bias column of ones."""
    n_features = len(feature_index)
    indptr = [0]
    indices: List[int] = []
    values: List[float] = []
    rows = 0
    for tokens in token_lists:
        counts: Dict[int, float] = {}
        for key in ngram_keys(tokens):
            col = feature_index.get(key)
            if col is not None:
                counts[col] = counts.get(col, 0.0) + 1.0
        for col in sorted(counts):
            indices.append(col)
            values.append(counts[col])
        indices.append(n_features)  # bias
        values.append(1.0)
        indptr.append(len(indices))
        rows += 1
    return sparse.csr_matrix(
        (np.array(values), np.array(indices), np.array(indptr)),
        shape=(rows, n_features + 1),
    )


@dataclass
class TextEmotionClassifier:
    feature_index: Dict[str, int]
    weights: np.ndarray  # 9 x (features + 1 bias)
    config: TrainConfig
    losses: List[float] = field(default_factory=list)
    single_class: bool = False

    def __post_init__(self) -> None:
        expected = (NUM_EMOTIONS, len(self.feature_index) + 1)
        if self.weights.shape != expected:
            raise DataFormatError(f"weight shape {self.weights.shape} != {expected}")
        if not np.all(np.isfinite(self.weights)):
            raise DataFormatError("non-finite weights")


def train_text_emotion(
    train: AnnotationCorpus, config: Optional[TrainConfig] = None
) -> TextEmotionClassifier:
    config = config or TrainConfig()
    if not train.records:
        raise DataFormatError("empty training corpus")
    feature_index = build_feature_index(train)
    features = featurize((r.tokens for r in train.records), feature_index)
    labels = np.array([EMOTION_INDEX[r.emotion] for r in train.records])

    example_weights = None
    if config.class_weighting:
        counts = np.bincount(labels, minlength=NUM_EMOTIONS).astype(float)
        inv = np.where(counts > 0, 1.0 / np.maximum(counts, 1.0), 0.0)
        example_weights = inv[labels]
        example_weights *= len(labels) / example_weights.sum()

    def step(weights, rows):
        ew = example_weights[rows] if example_weights is not None else None
        return ce_loss_and_grad(weights, features[rows], labels[rows], config.l2, ew)

    weights = np.zeros((NUM_EMOTIONS, len(feature_index) + 1))
    weights, losses = _gd(
        step, weights, len(labels), config.learning_rate,
        config.epochs, config.batch_size, config.seed,
    )
    return TextEmotionClassifier(
        feature_index=feature_index,
        weights=weights,
        config=config,
        losses=losses,
        single_class=len(set(labels.tolist())) == 1,
    )


def predict_emotion(
    clf: TextEmotionClassifier, tokens: Sequence[str]
) -> EmotionDistribution:
    """Softmax over linear scores; unseen n-grams contribute nothing."""
    x = featurize([tokens], clf.feature_index)
    return EmotionDistribution(softmax(np.asarray(x @ clf.weights.T))[0])


@dataclass
class ImageEmotionProbe:
    weights: np.ndarray  # 9 x (d + 1 bias)
    space_tag: str
    config: TrainConfig
    losses: List[float] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.weights.shape[1] - 1

    def __post_init__(self) -> None:
        if self.weights.shape[0] != NUM_EMOTIONS:
            raise DataFormatError("probe needs one row per emotion")
        if not np.all(np.isfinite(self.weights)):
            raise DataFormatError("non-finite weights")


def empirical_targets(corpus: AnnotationCorpus) -> Dict[str, np.ndarray]:
    """Per-image normalized label counts, the probe's training targets."""
    out: Dict[str, np.ndarray] = {}
    for image_id, rec_ids in corpus.images.items():
        counts = np.zeros(NUM_EMOTIONS)
        for idx in rec_ids:
            counts[EMOTION_INDEX[corpus.records[idx].emotion]] += 1
        out[image_id] = counts / counts.sum()
    return out


def _bias_augment(matrix: np.ndarray) -> np.ndarray:
    return np.hstack([matrix, np.ones((matrix.shape[0], 1))])


def train_image_probe(
    embeddings: EmbeddingTable,
    targets: Dict[str, np.ndarray],
    config: Optional[TrainConfig] = None,
) -> ImageEmotionProbe:
    config = config or TrainConfig()
    if not targets:
        raise DataFormatError("no probe targets")
    ids = sorted(targets)
    missing = [i for i in ids if i not in embeddings.index]
    if missing:
        raise MissingDataError(f"no embedding for target ids {missing[:5]}")
    features = _bias_augment(
        np.stack([embeddings.get(i) for i in ids]).astype(np.float64)
    )
    target_matrix = np.stack([np.asarray(targets[i], dtype=np.float64) for i in ids])
    if target_matrix.shape[1] != NUM_EMOTIONS:
        raise DataFormatError("targets must cover all nine labels")
    row_sums = target_matrix.sum(axis=1)
    if np.any(target_matrix < 0) or np.any(np.abs(row_sums - 1.0) > 1e-6):
        raise DataFormatError("targets are not probability distributions")

    def step(weights, rows):
        return kl_loss_and_grad(weights, features[rows], target_matrix[rows], config.l2)

    weights = np.zeros((NUM_EMOTIONS, features.shape[1]))
    weights, losses = _gd(
        step, weights, len(ids), config.learning_rate,
        config.epochs, config.batch_size, config.seed,
    )
    return ImageEmotionProbe(
        weights=weights, space_tag=embeddings.space_tag, config=config, losses=losses
    )


def predict_image_emotion(
    probe: ImageEmotionProbe,
    embedding: np.ndarray,
    space_tag: Optional[str] = None,
) -> EmotionDistribution:
    if space_tag is not None and space_tag != probe.space_tag:
        raise DataFormatError(
            f"probe trained on space {probe.space_tag!r}, got {space_tag!r}"
        )
    vec = np.asarray(embedding, dtype=np.float64)
    if vec.shape != (probe.dim,):
        raise DataFormatError(f"expected dim {probe.dim}, got {vec.shape}")
    scores = probe.weights @ np.concatenate([vec, [1.0]])
    return EmotionDistribution(softmax(scores))


def binarize_sentiment(
    value: Union[EmotionLabel, EmotionDistribution, np.ndarray]
) -> str:
    """Map a label or distribution to positive/negative; something-else is excluded.

    Distributions are argmaxed over the eight valenced labels first, so the
    something-else mass never wins.
    """
    if isinstance(value, EmotionLabel):
        return valence_of(value) or "excluded"
    if not isinstance(value, EmotionDistribution):
        value = EmotionDistribution(value)
    return valence_of(value.argmax_label(valenced_only=True)) or "excluded"


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # 9x9, rows = ground truth

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (NUM_EMOTIONS, NUM_EMOTIONS) or np.any(self.counts < 0):
            raise DataFormatError("bad confusion matrix")

    @classmethod
    def from_pairs(
        cls, pairs: Iterable[Tuple[EmotionLabel, EmotionLabel]]
    ) -> "ConfusionMatrix":
        counts = np.zeros((NUM_EMOTIONS, NUM_EMOTIONS), dtype=np.int64)
        n = 0
        for true, pred in pairs:
            counts[EMOTION_INDEX[true], EMOTION_INDEX[pred]] += 1
            n += 1
        if n == 0:
            raise DataFormatError("empty evaluation set")
        return cls(counts)

    def support(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.counts.sum())

    def per_class_precision(self) -> np.ndarray:
        col = self.counts.sum(axis=0)
        return np.where(col > 0, np.diag(self.counts) / np.maximum(col, 1), 0.0)

    def per_class_recall(self) -> np.ndarray:
        row = self.counts.sum(axis=1)
        return np.where(row > 0, np.diag(self.counts) / np.maximum(row, 1), 0.0)

    def binarized_accuracy(self) -> float:
        """Positive/negative accuracy over items whose true label is valenced.

        The prediction counts as correct when its valence matches the truth's,
        whatever the fine-grained confusion; something-else rows are dropped.
        """
        correct = 0
        total = 0
        for ti, true in enumerate(EMOTIONS):
            tv = valence_of(true)
            if tv is None:
                continue
            for pi, pred in enumerate(EMOTIONS):
                c = int(self.counts[ti, pi])
                if c == 0:
                    continue
                total += c
                if valence_of(pred) == tv:
                    correct += c
        if total == 0:
            raise DataFormatError("no valenced items")
        return correct / total


def evaluate_text_classifier(
    clf: TextEmotionClassifier, test: AnnotationCorpus
) -> ConfusionMatrix:
    if not test.records:
        raise DataFormatError("empty test set")
    pairs = [
        (r.emotion, predict_emotion(clf, r.tokens).argmax_label())
        for r in test.records
    ]
    return ConfusionMatrix.from_pairs(pairs)


def evaluate_image_probe(
    probe: ImageEmotionProbe,
    embeddings: EmbeddingTable,
    majority: Dict[str, EmotionLabel],
) -> ConfusionMatrix:
    """Confusion over the strong-majority subset only."""
    pairs = []
    for image_id in sorted(majority):
        vec = embeddings.get(image_id)
        pairs.append(
            (majority[image_id], predict_image_emotion(probe, vec).argmax_label())
        )
    return ConfusionMatrix.from_pairs(pairs)


def _sibling(prefix: Path, suffix: str) -> Path:
    # plain concatenation: a dotted prefix like "model.v2" keeps its dot
    return prefix.parent / (prefix.name + suffix)


def _write_weights(path: Path, weights: np.ndarray) -> str:
    payload = weights.astype("<f4").tobytes()
    path.write_bytes(payload)
    return hashlib.sha256(payload).hexdigest()


def save_model(
    model: Union[TextEmotionClassifier, ImageEmotionProbe], prefix: Union[str, Path]
) -> None:
    """Write <prefix>.json header plus <prefix>.bin little-endian f32 weights."""
    prefix = Path(prefix)
    header: Dict[str, object] = {
        "format": MODEL_FORMAT,
        "tool": {"name": "affectcap", "version": __version__},
        "rows": int(model.weights.shape[0]),
        "cols": int(model.weights.shape[1]),
        "hyper": {
            "learning_rate": model.config.learning_rate,
            "epochs": model.config.epochs,
            "batch_size": model.config.batch_size,
            "l2": model.config.l2,
            "seed": model.config.seed,
            "class_weighting": model.config.class_weighting,
        },
    }
    if isinstance(model, TextEmotionClassifier):
        ordered = sorted(model.feature_index, key=model.feature_index.__getitem__)
        header["kind"] = "text-ngram-logistic"
        header["features"] = ordered
        header["single_class"] = model.single_class
    else:
        header["kind"] = "image-probe"
        header["space_tag"] = model.space_tag
    header["sha256"] = _write_weights(_sibling(prefix, ".bin"), model.weights)
    _sibling(prefix, ".json").write_text(
        json.dumps(header, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )


def load_model(
    prefix: Union[str, Path]
) -> Union[TextEmotionClassifier, ImageEmotionProbe]:
    prefix = Path(prefix)
    try:
        header = json.loads(_sibling(prefix, ".json").read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise MissingDataError(f"missing model header {prefix}.json") from exc
    if header.get("format") != MODEL_FORMAT:
        raise DataFormatError(f"unsupported model format {header.get('format')!r}")
    payload = _sibling(prefix, ".bin").read_bytes()
    rows, cols = int(header["rows"]), int(header["cols"])
    if len(payload) != rows * cols * 4:
        raise DataFormatError("weight payload length mismatch")
    if hashlib.sha256(payload).hexdigest() != header["sha256"]:
        raise DataFormatError("weight checksum mismatch")
    weights = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    weights = weights.reshape(rows, cols)
    config = TrainConfig(**header["hyper"])
    if header["kind"] == "text-ngram-logistic":
        feature_index = {g: i for i, g in enumerate(header["features"])}
        return TextEmotionClassifier(
            feature_index=feature_index,
            weights=weights,
            config=config,
            single_class=bool(header.get("single_class", False)),
        )
    if header["kind"] == "image-probe":
        return ImageEmotionProbe(
            weights=weights, space_tag=header["space_tag"], config=config
        )
    raise DataFormatError(f"unknown model kind {header['kind']!r}")
