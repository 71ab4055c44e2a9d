import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from affectcap import AnnotationCorpus, AnnotationRecord, EmotionLabel, demo_dir

# one line per acceptance criterion; re-emitted after the test summary so the
# verdicts survive pytest's stdout capture
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_line("")
        terminalreporter.write_line("acceptance criteria:")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line("  " + line)


def make_record(
    image_id="img-0",
    emotion=EmotionLabel.AWE,
    tokens=None,
    pos=None,
    source="coco",
    annotator=None,
):
    tokens = tokens if tokens is not None else ["a", "huge", "wave", "over", "rocks"]
    return AnnotationRecord(
        image_id=image_id,
        source=source,
        emotion=emotion,
        explanation=" ".join(tokens),
        tokens=list(tokens),
        pos_tags=list(pos) if pos is not None else None,
        annotator_id=annotator,
    )


@pytest.fixture(scope="session")
def demo_path() -> Path:
    return demo_dir()


@pytest.fixture(scope="session")
def demo_corpus(demo_path):
    from affectcap import load_annotations

    return load_annotations(demo_path / "annotations.jsonl").corpus


@pytest.fixture
def tiny_corpus():
    recs = [
        make_record("i1", EmotionLabel.AWE, ["the", "vast", "canyon", "stuns", "me"]),
        make_record("i1", EmotionLabel.AWE, ["what", "a", "towering", "cliff", "face"]),
        make_record("i1", EmotionLabel.FEAR, ["the", "drop", "terrifies", "me", "badly"]),
        make_record("i2", EmotionLabel.SADNESS, ["the", "wilted", "flowers", "look", "lonely"]),
        make_record("i2", EmotionLabel.SADNESS, ["a", "lonely", "bench", "sits", "empty"]),
    ]
    return AnnotationCorpus(recs)
