"""Input readers: utterance line-JSON files and image list TSVs.

Utterance files are line-JSON in either the annotation shape (``image_id``
plus ``explanation`` and/or ``tokens``) or the generation shape
(``image_id`` plus ``text``).  Either way each utterance gets the id
``<image_id>#<k>`` with ``k`` counting utterances per image in file order,
which is the id convention retrieval tooling expects.

Image lists are two-column TSVs: ``id<TAB>path``, ``#`` comments and blank
lines ignored, relative paths resolved against the list file's directory.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import List, Tuple

from .errors import InputError


def read_utterances(path: str | Path) -> List[Tuple[str, str]]:
    path = Path(path)
    if not path.exists():
        raise InputError(f"utterance file not found: {path}")
    items: List[Tuple[str, str]] = []
    per_image: dict = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path.name}:{lineno}: {exc}") from None
            if lineno == 1 and isinstance(obj, dict) and set(obj) == {"__header__"}:
                continue
            if not isinstance(obj, dict) or "image_id" not in obj:
                raise InputError(f"{path.name}:{lineno}: expected an object with 'image_id'")
            if "text" in obj:
                text = str(obj["text"])
            elif "explanation" in obj:
                text = str(obj["explanation"])
            elif "tokens" in obj:
                text = " ".join(str(t) for t in obj["tokens"])
            else:
                raise InputError(
                    f"{path.name}:{lineno}: no 'text', 'explanation', or 'tokens' field"
                )
            image_id = str(obj["image_id"])
            k = per_image.get(image_id, 0)
            per_image[image_id] = k + 1
            items.append((f"{image_id}#{k}", text))
    if not items:
        raise InputError(f"no utterances found in {path}")
    return items


def read_image_list(path: str | Path) -> List[Tuple[str, Path]]:
    path = Path(path)
    if not path.exists():
        raise InputError(f"image list not found: {path}")
    items: List[Tuple[str, Path]] = []
    seen = set()
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise InputError(f"{path.name}:{lineno}: expected 'id<TAB>path'")
        image_id, rel = parts[0].strip(), parts[1].strip()
        if not image_id or not rel:
            raise InputError(f"{path.name}:{lineno}: empty id or path")
        if image_id in seen:
            raise InputError(f"{path.name}:{lineno}: duplicate image id {image_id!r}")
        seen.add(image_id)
        p = Path(rel)
        items.append((image_id, p if p.is_absolute() else path.parent / p))
    if not items:
        raise InputError(f"no images listed in {path}")
    return items
