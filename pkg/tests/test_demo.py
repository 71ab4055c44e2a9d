import filecmp
import hashlib

from affectcap import EmbeddingTable, build_demo, demo_dir, load_annotations

EXPECTED_FILES = (
    "annotations.jsonl",
    "candidates.jsonl",
    "generations.jsonl",
    "image_embeddings.bin",
    "image_embeddings.bin.ids",
    "image_embeddings.bin.json",
    "text_embeddings.bin",
    "text_embeddings.bin.ids",
    "text_embeddings.bin.json",
)


def test_bundled_fixture_complete():
    d = demo_dir()
    for name in EXPECTED_FILES:
        assert (d / name).exists(), name


def test_fixture_matches_generator(tmp_path):
    # the committed fixture must be exactly what build_demo produces, so a
    # regenerate is always safe and the fixture can't drift silently
    build_demo(tmp_path)
    d = demo_dir()
    for name in EXPECTED_FILES:
        a = (d / name).read_bytes()
        b = (tmp_path / name).read_bytes()
        assert hashlib.sha256(a).hexdigest() == hashlib.sha256(b).hexdigest(), name


def test_generator_deterministic(tmp_path):
    build_demo(tmp_path / "one")
    build_demo(tmp_path / "two")
    match, mismatch, errors = filecmp.cmpfiles(
        tmp_path / "one", tmp_path / "two", EXPECTED_FILES, shallow=False
    )
    assert not mismatch and not errors


def test_fixture_shape():
    d = demo_dir()
    corpus = load_annotations(d / "annotations.jsonl").corpus
    assert len(corpus.images) == 36
    assert len(corpus.records) == 216
    per_image = {len(v) for v in corpus.images.values()}
    assert per_image == {6}


def test_fixture_embeddings_aligned():
    d = demo_dir()
    corpus = load_annotations(d / "annotations.jsonl").corpus
    imgs = EmbeddingTable.load(d / "image_embeddings.bin")
    texts = EmbeddingTable.load(d / "text_embeddings.bin")
    assert imgs.space_tag == texts.space_tag
    assert set(imgs.ids) == set(corpus.images.keys())
    # every image has reference text embeddings keyed image#k
    for image_id in corpus.images:
        assert f"{image_id}#0" in texts.index
