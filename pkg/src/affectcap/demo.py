"""Bundled synthetic fixture so every command runs end-to-end offline.

36 images (4 per emotion), 6 annotations each, a small shared embedding
space (dim 16) holding image, reference, candidate, and generation vectors,
plus candidate and generation files.  Everything is derived from one seed;
``python -m affectcap.demo --out DIR`` regenerates the exact shipped bytes.

Reference text embeddings use the "<image_id>#<k>" id convention the metrics
module groups by; candidate and generation embeddings are "cand-*"/"gen-*".
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from ._version import __version__
from .corpus import AnnotationCorpus, AnnotationRecord, save_annotations
from .embeddings import EmbeddingTable
from .emotions import EMOTIONS, EmotionLabel

DEMO_SEED = 7
DEMO_DIM = 16
SPACE_TAG = "demo-joint"
IMAGES_PER_EMOTION = 4
ANNOTATORS_PER_IMAGE = 6
CANDIDATE_IMAGES = 12
CANDIDATES_PER_IMAGE = 5

_NOUNS = {
    "amusement": ["clown", "puppy", "joke", "grin", "parade"],
    "awe": ["mountain", "canyon", "aurora", "cathedral", "waterfall"],
    "contentment": ["meadow", "blanket", "garden", "porch", "teacup"],
    "excitement": ["rollercoaster", "crowd", "firework", "race", "stadium"],
    "anger": ["scream", "wreck", "fistfight", "graffiti", "riot"],
    "disgust": ["slime", "garbage", "mold", "roach", "sewer"],
    "fear": ["shadow", "storm", "cliff", "spider", "basement"],
    "sadness": ["grave", "ruin", "farewell", "wheelchair", "raincloud"],
    "something-else": ["pattern", "texture", "wall", "diagram", "blur"],
}
_ADJS = {
    "amusement": ["funny", "silly", "playful"],
    "awe": ["majestic", "vast", "towering"],
    "contentment": ["calm", "cozy", "gentle"],
    "excitement": ["thrilling", "wild", "electric"],
    "anger": ["furious", "hostile", "violent"],
    "disgust": ["gross", "filthy", "rotten"],
    "fear": ["creepy", "ominous", "terrifying"],
    "sadness": ["lonely", "gloomy", "mournful"],
    "something-else": ["plain", "odd", "ordinary"],
}
_FEELS = {
    "amusement": "amused",
    "awe": "awestruck",
    "contentment": "content",
    "excitement": "excited",
    "anger": "angry",
    "disgust": "disgusted",
    "fear": "scared",
    "sadness": "sad",
    "something-else": "uncertain",
}

# (token pattern, tag pattern); {n}/{n2} nouns, {a} adjective, {e} feeling word
_PLAIN_TEMPLATES: List[Tuple[List[str], List[str]]] = [
    ("the {a} {n} makes me feel {e}".split(),
     ["DT", "JJ", "NN", "VBZ", "PRP", "VB", "JJ"]),
    ("i feel {e} because the {n} is so {a}".split(),
     ["PRP", "VBP", "JJ", "IN", "DT", "NN", "VBZ", "RB", "JJ"]),
    ("there is a {a} {n} near the {n2} and it feels {e}".split(),
     ["EX", "VBZ", "DT", "JJ", "NN", "IN", "DT", "NN", "CC", "PRP", "VBZ", "JJ"]),
    ("such a {a} {n} in this picture".split(),
     ["PDT", "DT", "JJ", "NN", "IN", "DT", "NN"]),
]
_SIMILE_TEMPLATES: List[Tuple[List[str], List[str]]] = [
    ("this {n} looks like a {a} {n2}".split(),
     ["DT", "NN", "VBZ", "IN", "DT", "JJ", "NN"]),
    ("the {n} reminds me of a {a} {n2} from my childhood".split(),
     ["DT", "NN", "VBZ", "PRP", "IN", "DT", "JJ", "NN", "IN", "PRP$", "NN"]),
]


def _sentence(
    emotion: str, rng: np.random.Generator, simile_prob: float = 0.2
) -> Tuple[List[str], List[str]]:
    if rng.random() < simile_prob:
        pattern, tags = _SIMILE_TEMPLATES[rng.integers(len(_SIMILE_TEMPLATES))]
    else:
        pattern, tags = _PLAIN_TEMPLATES[rng.integers(len(_PLAIN_TEMPLATES))]
    nouns = _NOUNS[emotion]
    n = nouns[rng.integers(len(nouns))]
    n2 = nouns[rng.integers(len(nouns))]
    a = _ADJS[emotion][rng.integers(len(_ADJS[emotion]))]
    fills = {"{n}": n, "{n2}": n2, "{a}": a, "{e}": _FEELS[emotion]}
    tokens = [fills.get(w, w) for w in pattern]
    return tokens, list(tags)


def _image_emotions() -> List[Tuple[str, EmotionLabel]]:
    out = []
    for k, emotion in enumerate(EMOTIONS):
        for j in range(IMAGES_PER_EMOTION):
            out.append((f"img{k * IMAGES_PER_EMOTION + j:02d}", emotion))
    return out


def build_demo(out_dir: str | Path, seed: int = DEMO_SEED) -> Dict[str, Path]:
    """Write the full fixture into out_dir; returns the paths by role."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    images = _image_emotions()
    sources = ("coco", "emotional-machines", "flickr30k", "visual-genome",
               "yang-affective")

    # --- annotations: 6 per image; every 6th image gets a 3/2/1 label split
    records: List[AnnotationRecord] = []
    for idx, (image_id, emotion) in enumerate(images):
        others = [e for e in EMOTIONS if e is not emotion]
        if idx % 6 == 5:  # no strong majority here
            spread = [emotion] * 3 + [others[rng.integers(len(others))]] * 2
            spread.append(others[rng.integers(len(others))])
        else:
            spread = [emotion] * 5 + [others[rng.integers(len(others))]]
        for k, label in enumerate(spread):
            tokens, tags = _sentence(label.value, rng)
            records.append(
                AnnotationRecord(
                    image_id=image_id,
                    source=sources[idx % len(sources)],
                    emotion=label,
                    explanation=" ".join(tokens),
                    tokens=tokens,
                    pos_tags=tags,
                    annotator_id=f"ann{int(rng.integers(12)):02d}",
                )
            )
    corpus = AnnotationCorpus(records)
    ann_path = out / "annotations.jsonl"
    save_annotations(
        corpus, ann_path,
        header={"tool": "affectcap", "version": __version__,
                "fixture": "demo", "seed": seed},
    )

    # --- embeddings: one anchor direction per emotion, noise around it
    anchors = {}
    for emotion in EMOTIONS:
        v = rng.standard_normal(DEMO_DIM)
        anchors[emotion] = v / np.linalg.norm(v)

    def around(emotion: EmotionLabel, spread: float) -> np.ndarray:
        return anchors[emotion] + spread * rng.standard_normal(DEMO_DIM)

    image_ids = [i for i, _ in images]
    image_matrix = np.stack([around(e, 0.15) for _, e in images])
    image_table = EmbeddingTable(image_ids, image_matrix.astype(np.float32), SPACE_TAG)
    img_path = out / "image_embeddings.bin"
    image_table.save(img_path, header_extra={"fixture": "demo", "seed": seed})

    text_ids: List[str] = []
    text_rows: List[np.ndarray] = []
    per_image_refs: Dict[str, int] = {}
    for rec in records:
        k = per_image_refs.get(rec.image_id, 0)
        per_image_refs[rec.image_id] = k + 1
        text_ids.append(f"{rec.image_id}#{k}")
        text_rows.append(around(rec.emotion, 0.25))

    # --- candidates for the first few images
    cand_sets = []
    for image_id, emotion in images[:CANDIDATE_IMAGES]:
        cands = []
        for j in range(CANDIDATES_PER_IMAGE):
            if j < 2:
                cand_emotion = emotion
            else:
                others = [e for e in EMOTIONS if e is not emotion]
                cand_emotion = others[rng.integers(len(others))]
            tokens, _ = _sentence(cand_emotion.value, rng)
            eid = f"cand-{image_id}-{j}"
            text_ids.append(eid)
            text_rows.append(around(cand_emotion, 0.3))
            cands.append({
                "text": " ".join(tokens),
                "log_p_speaker": round(float(-1.0 - abs(rng.normal(12.0, 4.0))), 6),
                "emotion": cand_emotion.value,
                "text_embedding_id": eid,
            })
        cand_sets.append({
            "image_id": image_id,
            "image_embedding_id": image_id,
            "candidates": cands,
        })
    cand_path = out / "candidates.jsonl"
    with cand_path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps({"__header__": {
            "tool": "affectcap", "version": __version__,
            "fixture": "demo", "seed": seed}}, sort_keys=True) + "\n")
        for cs in cand_sets:
            fh.write(json.dumps(cs, sort_keys=True) + "\n")

    # --- one generation per image; something-else images share one sentence
    generations = []
    shared = None
    for image_id, emotion in images:
        if emotion.value == "something-else":
            if shared is None:
                shared, _ = _sentence(emotion.value, rng)
            tokens = shared
        else:
            tokens, _ = _sentence(emotion.value, rng)
        eid = f"gen-{image_id}"
        text_ids.append(eid)
        text_rows.append(around(emotion, 0.2))
        generations.append({
            "image_id": image_id,
            "text": " ".join(tokens),
            "emotion": emotion.value,
            "text_embedding_id": eid,
        })
    gen_path = out / "generations.jsonl"
    with gen_path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps({"__header__": {
            "tool": "affectcap", "version": __version__,
            "fixture": "demo", "seed": seed}}, sort_keys=True) + "\n")
        for g in generations:
            fh.write(json.dumps(g, sort_keys=True) + "\n")

    text_table = EmbeddingTable(
        text_ids, np.stack(text_rows).astype(np.float32), SPACE_TAG
    )
    text_path = out / "text_embeddings.bin"
    text_table.save(text_path, header_extra={"fixture": "demo", "seed": seed})

    return {
        "annotations": ann_path,
        "image_embeddings": img_path,
        "text_embeddings": text_path,
        "candidates": cand_path,
        "generations": gen_path,
    }


def demo_dir() -> Path:
    """Directory of the fixture files shipped inside the installed package."""
    return Path(str(resources.files("affectcap").joinpath("data", "demo")))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="affectcap.demo", description="regenerate the bundled demo fixture"
    )
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=DEMO_SEED)
    args = parser.parse_args(argv)
    paths = build_demo(args.out, args.seed)
    for role, p in sorted(paths.items()):
        print(f"{role}: {p}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
