"""Embedding-space referential comprehension.

A listener here is anything that can pick the right image for a caption out
of a lineup.  This module provides the lineup protocol (single trials and
accuracy curves over distractor counts) and a small trainable piece: linear
projections of both modalities into a shared space, fit with a symmetric
batch-contrastive objective over temperature-scaled cosine logits.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .embeddings import EmbeddingTable, cosine, unit_rows
from .errors import DataFormatError, MissingDataError


def retrieval_trial(
    caption: np.ndarray,
    target: np.ndarray,
    distractors: Sequence[np.ndarray],
) -> bool:
    """Hit iff the caption is strictly closest (by cosine) to the target.

    A cosine tie with any distractor counts as a miss: conservative and
    deterministic.  Zero distractors is a vacuous hit.
    """
    target_sim = cosine(caption, target)
    for d in distractors:
        if cosine(caption, d) >= target_sim:
            return False
    return True


@dataclass
class CurvePoint:
    n_distractors: int
    mean_accuracy: float
    std_accuracy: float
    per_seed: List[float]


@dataclass
class RetrievalCurve:
    points: List[CurvePoint]
    seeds: List[int]

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["n_distractors", "mean_accuracy", "std_accuracy"]
                + [f"seed_{s}" for s in self.seeds]
            )
            for pt in self.points:
                writer.writerow(
                    [pt.n_distractors, f"{pt.mean_accuracy:.6f}", f"{pt.std_accuracy:.6f}"]
                    + [f"{a:.6f}" for a in pt.per_seed]
                )


def _matched_matrices(
    captions: EmbeddingTable,
    images: EmbeddingTable,
    pairs: Sequence[Tuple[str, str]],
) -> Tuple[np.ndarray, np.ndarray, List[str]]:
    if not pairs:
        raise DataFormatError("no caption/image pairs")
    cap_rows = np.stack([captions.get(c) for c, _ in pairs])
    image_ids = sorted({i for _, i in pairs})
    img_rows = np.stack([images.get(i) for i in image_ids])
    return cap_rows.astype(np.float64), img_rows.astype(np.float64), image_ids


def retrieval_curve(
    captions: EmbeddingTable,
    images: EmbeddingTable,
    pairs: Sequence[Tuple[str, str]],
    ns: Sequence[int],
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
) -> RetrievalCurve:
    """Accuracy versus distractor count, mean and std over seeds.

    Distractors are drawn uniformly without replacement from the other images,
    fresh per pair and per seed.
    """
    cap_rows, img_rows, image_ids = _matched_matrices(captions, images, pairs)
    n_images = len(image_ids)
    if max(ns) + 1 > n_images:
        raise DataFormatError(
            f"need at least {max(ns) + 1} distinct images, have {n_images}"
        )
    image_pos = {iid: k for k, iid in enumerate(image_ids)}
    targets = np.array([image_pos[i] for _, i in pairs])
    # one similarity matrix reused across all trials
    sims = unit_rows(cap_rows) @ unit_rows(img_rows).T

    points = []
    for n in ns:
        per_seed = []
        for seed in seeds:
            rng = np.random.default_rng(seed)
            hits = 0
            for row, t in enumerate(targets):
                draw = rng.choice(n_images - 1, size=n, replace=False)
                draw = draw + (draw >= t)  # skip the target slot
                if n == 0 or sims[row, t] > sims[row, draw].max():
                    hits += 1
            per_seed.append(hits / len(targets))
        arr = np.array(per_seed)
        points.append(
            CurvePoint(
                n_distractors=int(n),
                mean_accuracy=float(arr.mean()),
                std_accuracy=float(arr.std()),
                per_seed=per_seed,
            )
        )
    return RetrievalCurve(points=points, seeds=list(seeds))


@dataclass
class ContrastiveConfig:
    learning_rate: float = 0.05
    epochs: int = 200
    batch_size: Optional[int] = None
    temperature: float = 0.07
    seed: int = 0

    def __post_init__(self) -> None:
        if self.temperature <= 0:
            raise DataFormatError("temperature must be positive")
        if self.batch_size is not None and self.batch_size < 2:
            raise DataFormatError("contrastive batches need at least 2 pairs")


@dataclass
class ContrastiveProjection:
    text_weights: np.ndarray  # d_t x p
    image_weights: np.ndarray  # d_i x p
    temperature: float
    losses: List[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.temperature <= 0:
            raise DataFormatError("temperature must be positive")
        for w in (self.text_weights, self.image_weights):
            if not np.all(np.isfinite(w)):
                raise DataFormatError("non-finite projection weights")
        if self.text_weights.shape[1] != self.image_weights.shape[1]:
            raise DataFormatError("projection dims disagree")

    def project_text(self, vectors: np.ndarray) -> np.ndarray:
        return np.asarray(vectors, dtype=np.float64) @ self.text_weights

    def project_image(self, vectors: np.ndarray) -> np.ndarray:
        return np.asarray(vectors, dtype=np.float64) @ self.image_weights


def contrastive_loss_and_grads(
    text_weights: np.ndarray,
    image_weights: np.ndarray,
    text_batch: np.ndarray,
    image_batch: np.ndarray,
    temperature: float,
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Symmetric InfoNCE over cosine logits; analytic gradients for both maps.

    Both cross-entropy directions (caption retrieves image, image retrieves
    caption) are averaged.  Matched pairs sit on the diagonal.
    """
    b = text_batch.shape[0]
    if b < 2:
        raise DataFormatError("contrastive loss needs at least 2 pairs")
    t = text_batch @ text_weights
    i = image_batch @ image_weights
    t_norm = np.linalg.norm(t, axis=1, keepdims=True)
    i_norm = np.linalg.norm(i, axis=1, keepdims=True)
    if np.any(t_norm == 0) or np.any(i_norm == 0):
        raise DataFormatError("zero-norm projected vector")
    tn, im = t / t_norm, i / i_norm
    logits = (tn @ im.T) / temperature

    z = logits - logits.max(axis=1, keepdims=True)
    row_logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    zc = logits - logits.max(axis=0, keepdims=True)
    col_logp = zc - np.log(np.exp(zc).sum(axis=0, keepdims=True))
    diag = np.arange(b)
    loss = -0.5 * float(row_logp[diag, diag].mean() + col_logp[diag, diag].mean())

    eye = np.eye(b)
    g_logits = ((np.exp(row_logp) - eye) + (np.exp(col_logp) - eye)) / (2 * b)
    g_sim = g_logits / temperature
    # back through the row normalizations: d(x/|x|) removes the radial part
    g_tn = g_sim @ im
    g_im = g_sim.T @ tn
    g_t = (g_tn - (g_tn * tn).sum(axis=1, keepdims=True) * tn) / t_norm
    g_i = (g_im - (g_im * im).sum(axis=1, keepdims=True) * im) / i_norm
    return loss, text_batch.T @ g_t, image_batch.T @ g_i


def train_contrastive_projection(
    text_embs: EmbeddingTable,
    image_embs: EmbeddingTable,
    pairs: Sequence[Tuple[str, str]],
    proj_dim: int,
    config: Optional[ContrastiveConfig] = None,
) -> ContrastiveProjection:
    config = config or ContrastiveConfig()
    if len(pairs) < 2:
        raise DataFormatError("need at least 2 matched pairs")
    if config.batch_size is not None and config.batch_size > len(pairs):
        raise DataFormatError("batch size exceeds pair count")
    missing = [c for c, _ in pairs if c not in text_embs.index]
    missing += [i for _, i in pairs if i not in image_embs.index]
    if missing:
        raise MissingDataError(f"missing embeddings for {missing[:5]}")
    x = np.stack([text_embs.get(c) for c, _ in pairs]).astype(np.float64)
    y = np.stack([image_embs.get(i) for _, i in pairs]).astype(np.float64)

    rng = np.random.default_rng(config.seed)
    wt = rng.standard_normal((x.shape[1], proj_dim)) / np.sqrt(x.shape[1])
    wi = rng.standard_normal((y.shape[1], proj_dim)) / np.sqrt(y.shape[1])

    n = len(pairs)
    bs = config.batch_size

    def full_loss(wt_, wi_):
        return contrastive_loss_and_grads(wt_, wi_, x, y, config.temperature)[0]

    losses = [full_loss(wt, wi)]
    for _ in range(config.epochs):
        if bs is None or bs >= n:
            _, g_wt, g_wi = contrastive_loss_and_grads(wt, wi, x, y, config.temperature)
            wt = wt - config.learning_rate * g_wt
            wi = wi - config.learning_rate * g_wi
        else:
            perm = rng.permutation(n)
            for start in range(0, n - bs + 1, bs):  # drop ragged tail < 2 pairs
                rows = perm[start : start + bs]
                _, g_wt, g_wi = contrastive_loss_and_grads(
                    wt, wi, x[rows], y[rows], config.temperature
                )
                wt = wt - config.learning_rate * g_wt
                wi = wi - config.learning_rate * g_wi
        losses.append(full_loss(wt, wi))
    return ContrastiveProjection(
        text_weights=wt, image_weights=wi,
        temperature=config.temperature, losses=losses,
    )


def project_tables(
    projection: ContrastiveProjection,
    text_embs: EmbeddingTable,
    image_embs: EmbeddingTable,
    space_tag: str = "joint",
) -> Tuple[EmbeddingTable, EmbeddingTable]:
    """Map both tables into the shared space under a common tag."""
    t = EmbeddingTable(
        list(text_embs.ids),
        projection.project_text(text_embs.matrix).astype(np.float32),
        space_tag,
    )
    i = EmbeddingTable(
        list(image_embs.ids),
        projection.project_image(image_embs.matrix).astype(np.float32),
        space_tag,
    )
    return t, i
