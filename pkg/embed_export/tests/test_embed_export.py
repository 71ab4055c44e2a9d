"""End-to-end checks for embed-export.

The round-trip tests load the exported tables with the affectcap package:
the file formats are the only contract between the two components, and
bit-exact recovery through the other side's loader is the check that
matters.
"""

import hashlib
import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from affectcap import DataFormatError, EmbeddingTable

from embed_export import (
    EncoderUnavailableError,
    ExportError,
    InputError,
    export_image_embeddings,
    export_text_embeddings,
    get_encoder,
    list_encoders,
)
from embed_export.cli import run
from embed_export.inputs import read_utterances


def write_generations(path: Path, rows):
    lines = [json.dumps({"image_id": img, "text": text}) for img, text in rows]
    path.write_text("".join(l + "\n" for l in lines), encoding="utf-8")
    return path


def write_png(path: Path, rgb, size=(24, 24)):
    Image.new("RGB", size, rgb).save(path, "PNG")
    return path


@pytest.fixture
def utterances(tmp_path):
    return write_generations(tmp_path / "gen.jsonl", [
        ("img-a", "a dog runs across the sunny park"),
        ("img-a", "the dog is running through a sunny park"),
        ("img-b", "stock prices fell sharply on tuesday"),
    ])


class TestTextExport:
    def test_round_trip_is_bit_exact(self, utterances, tmp_path):
        out = tmp_path / "text.emb"
        manifest = export_text_embeddings(utterances, "hashed-ngram-v1", out)
        table = EmbeddingTable.load(out)
        assert table.ids == ["img-a#0", "img-a#1", "img-b#0"]
        assert table.space_tag == "hashed-ngram-v1"
        assert table.matrix.dtype == np.float32
        # the loader verified the checksum; compare raw bytes too
        payload = out.read_bytes()
        assert table.matrix.tobytes() == payload
        assert hashlib.sha256(payload).hexdigest() == manifest.sha256

    def test_checksum_guards_the_payload(self, utterances, tmp_path):
        out = tmp_path / "text.emb"
        export_text_embeddings(utterances, "hashed-ngram-v1", out)
        raw = bytearray(out.read_bytes())
        raw[0] ^= 0xFF
        out.write_bytes(bytes(raw))
        with pytest.raises(DataFormatError):
            EmbeddingTable.load(out)

    def test_identical_text_identical_vectors(self, tmp_path):
        src = write_generations(tmp_path / "gen.jsonl", [
            ("i1", "the same sentence"),
            ("i2", "the same sentence"),
        ])
        out = tmp_path / "t.emb"
        export_text_embeddings(src, "hashed-ngram-v1", out)
        table = EmbeddingTable.load(out)
        assert np.array_equal(table.get("i1#0"), table.get("i2#0"))

    def test_reruns_are_byte_identical(self, utterances, tmp_path):
        a, b = tmp_path / "a.emb", tmp_path / "b.emb"
        export_text_embeddings(utterances, "hashed-ngram-v1", a)
        export_text_embeddings(utterances, "hashed-ngram-v1", b)
        assert a.read_bytes() == b.read_bytes()
        assert Path(str(a) + ".ids").read_text() == Path(str(b) + ".ids").read_text()

    def test_batching_does_not_change_output(self, utterances, tmp_path):
        a, b = tmp_path / "a.emb", tmp_path / "b.emb"
        export_text_embeddings(utterances, "hashed-ngram-v1", a, batch_size=1)
        export_text_embeddings(utterances, "hashed-ngram-v1", b, batch_size=64)
        assert a.read_bytes() == b.read_bytes()

    def test_paraphrases_are_closest_pair(self, utterances, tmp_path):
        out = tmp_path / "t.emb"
        export_text_embeddings(utterances, "hashed-ngram-v1", out)
        table = EmbeddingTable.load(out)
        m = table.matrix.astype(np.float64)
        cos = lambda i, j: float(m[i] @ m[j] / (np.linalg.norm(m[i]) * np.linalg.norm(m[j])))
        paraphrase = cos(0, 1)
        assert paraphrase > cos(0, 2)
        assert paraphrase > cos(1, 2)

    def test_empty_utterance_rejected(self, tmp_path):
        src = write_generations(tmp_path / "gen.jsonl", [("i1", "   ")])
        with pytest.raises(InputError, match="i1#0"):
            export_text_embeddings(src, "hashed-ngram-v1", tmp_path / "t.emb")

    def test_annotation_format_accepted(self, tmp_path):
        rows = [
            {"image_id": "x", "emotion": "awe", "explanation": "what a vast canyon"},
            {"image_id": "x", "emotion": "fear", "tokens": ["the", "drop", "scares", "me"]},
        ]
        src = tmp_path / "ann.jsonl"
        src.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
        items = read_utterances(src)
        assert [i for i, _ in items] == ["x#0", "x#1"]
        assert items[1][1] == "the drop scares me"

    def test_header_line_skipped(self, tmp_path):
        src = tmp_path / "gen.jsonl"
        src.write_text(
            json.dumps({"__header__": {"tool": "other"}}) + "\n"
            + json.dumps({"image_id": "i", "text": "hello there"}) + "\n",
            encoding="utf-8",
        )
        assert [i for i, _ in read_utterances(src)] == ["i#0"]


class TestImageExport:
    def _image_list(self, tmp_path, entries):
        lines = [f"{img_id}\t{p.name}" for img_id, p in entries]
        lst = tmp_path / "images.tsv"
        lst.write_text("".join(l + "\n" for l in lines), encoding="utf-8")
        return lst

    def test_structural(self, tmp_path):
        entries = [
            ("red", write_png(tmp_path / "r.png", (200, 30, 30))),
            ("green", write_png(tmp_path / "g.png", (30, 200, 30))),
            ("blue", write_png(tmp_path / "b.png", (30, 30, 200))),
        ]
        out = tmp_path / "img.emb"
        manifest = export_image_embeddings(
            self._image_list(tmp_path, entries), "pixel-grid-v1", out)
        assert manifest.count == 3
        assert manifest.dim == get_encoder("pixel-grid-v1").dim
        table = EmbeddingTable.load(out)
        assert table.ids == ["red", "green", "blue"]  # input order preserved
        assert len(out.read_bytes()) == manifest.count * manifest.dim * 4

    def test_duplicate_files_near_identical(self, tmp_path):
        a = write_png(tmp_path / "a.png", (120, 90, 60))
        b = tmp_path / "copy.png"
        b.write_bytes(a.read_bytes())
        out = tmp_path / "img.emb"
        export_image_embeddings(
            self._image_list(tmp_path, [("a", a), ("copy", b)]),
            "pixel-grid-v1", out)
        table = EmbeddingTable.load(out)
        va = table.get("a").astype(np.float64)
        vb = table.get("copy").astype(np.float64)
        cos = va @ vb / (np.linalg.norm(va) * np.linalg.norm(vb))
        assert cos > 0.999

    def test_corrupt_image_names_offender(self, tmp_path):
        good = write_png(tmp_path / "ok.png", (10, 10, 10))
        bad = tmp_path / "broken.png"
        bad.write_bytes(b"this is not an image at all")
        lst = self._image_list(tmp_path, [("ok", good), ("broken", bad)])
        with pytest.raises(InputError, match="broken"):
            export_image_embeddings(lst, "pixel-grid-v1", tmp_path / "img.emb")

    def test_missing_file_rejected(self, tmp_path):
        lst = tmp_path / "images.tsv"
        lst.write_text("ghost\tnowhere.png\n", encoding="utf-8")
        with pytest.raises(InputError, match="ghost"):
            export_image_embeddings(lst, "pixel-grid-v1", tmp_path / "img.emb")


class TestManifestAndRegistry:
    def test_manifest_matches_payload(self, utterances, tmp_path):
        out = tmp_path / "t.emb"
        export_text_embeddings(utterances, "hashed-ngram-v1", out)
        manifest = json.loads(Path(str(out) + ".manifest.json").read_text())
        header = json.loads(Path(str(out) + ".json").read_text())
        assert manifest["count"] == header["count"]
        assert manifest["dim"] == header["dim"]
        assert manifest["sha256"] == header["sha256"]
        assert manifest["encoder_name"] == "hashed-ngram-v1"
        assert manifest["encoder_version"] == "1.0"
        assert manifest["space_tag"] == header["space_tag"]

    def test_space_tag_override(self, utterances, tmp_path):
        out = tmp_path / "t.emb"
        export_text_embeddings(utterances, "hashed-ngram-v1", out, space_tag="joint")
        assert EmbeddingTable.load(out).space_tag == "joint"

    def test_pretrained_names_resolve_but_refuse(self):
        names = {spec.name for spec in list_encoders()}
        assert {"clip-vit-b32", "resnet50-imagenet"} <= names
        with pytest.raises(EncoderUnavailableError, match="weights"):
            get_encoder("clip-vit-b32")

    def test_unknown_encoder(self):
        with pytest.raises(ExportError, match="known encoders"):
            get_encoder("made-up")

    def test_wrong_modality_rejected(self, utterances, tmp_path):
        with pytest.raises(ExportError, match="encodes image"):
            export_text_embeddings(utterances, "pixel-grid-v1", tmp_path / "t.emb")

    def test_no_temp_files_left_behind(self, utterances, tmp_path):
        export_text_embeddings(utterances, "hashed-ngram-v1", tmp_path / "t.emb")
        assert not list(tmp_path.glob("*.tmp"))


class TestCli:
    def test_text_end_to_end(self, utterances, tmp_path, capsys):
        out = tmp_path / "cli.emb"
        assert run(["text", "--input", str(utterances), "--out", str(out)]) == 0
        assert "wrote 3 x 256 vectors" in capsys.readouterr().out
        assert EmbeddingTable.load(out).ids == ["img-a#0", "img-a#1", "img-b#0"]

    def test_encoders_listing(self, capsys):
        assert run(["encoders"]) == 0
        out = capsys.readouterr().out
        assert "hashed-ngram-v1" in out
        assert "unavailable" in out

    def test_usage_errors(self, capsys):
        assert run([]) == 1
        assert run(["text"]) == 1  # missing required flags

    def test_data_error_exit(self, tmp_path, capsys):
        code = run(["text", "--input", str(tmp_path / "missing.jsonl"),
                    "--out", str(tmp_path / "t.emb")])
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_unavailable_encoder_exit(self, utterances, tmp_path, capsys):
        code = run(["text", "--input", str(utterances),
                    "--encoder", "clip-vit-b32", "--out", str(tmp_path / "t.emb")])
        assert code == 2
        assert "weights" in capsys.readouterr().err
