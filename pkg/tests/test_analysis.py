import pytest

from affectcap import (
    AnnotationCorpus,
    EmotionLabel,
    analysis_report,
    emotion_distribution,
    load_default_lexicons,
    majority_labels,
    majority_stats,
    pos_diversity_per_image,
    pos_stats_per_caption,
)
from affectcap.analysis import POS_CATEGORIES, pos_category
from conftest import make_record


class TestPosCategories:
    def test_universal_tags(self):
        assert pos_category("NOUN") == "nouns"
        assert pos_category("PROPN") == "nouns"
        assert pos_category("PRON") == "pronouns"
        assert pos_category("ADJ") == "adjectives"
        assert pos_category("ADP") == "adpositions"
        assert pos_category("VERB") == "verbs"

    def test_penn_tags(self):
        assert pos_category("NNS") == "nouns"
        assert pos_category("PRP$") == "pronouns"
        assert pos_category("JJR") == "adjectives"
        assert pos_category("IN") == "adpositions"
        assert pos_category("VBG") == "verbs"
        assert pos_category("MD") == "verbs"

    def test_uncounted_tags(self):
        assert pos_category("DT") is None
        assert pos_category("ADV") is None
        assert pos_category("AUX") is None
        assert pos_category("...") is None

    def test_case_insensitive(self):
        assert pos_category("noun") == "nouns"


class TestPosStats:
    def _corpus(self):
        return AnnotationCorpus([
            make_record(
                "i1",
                tokens=["the", "dog", "runs", "to", "me"],
                pos=["DT", "NOUN", "VERB", "ADP", "PRON"],
            ),
            make_record(
                "i1",
                tokens=["a", "big", "dog", "barks", "loudly"],
                pos=["DT", "ADJ", "NOUN", "VERB", "ADV"],
            ),
        ])

    def test_per_caption_means(self):
        row = pos_stats_per_caption(self._corpus())
        assert row.nouns == pytest.approx(1.0)
        assert row.verbs == pytest.approx(1.0)
        assert row.pronouns == pytest.approx(0.5)
        assert row.adjectives == pytest.approx(0.5)
        assert row.adpositions == pytest.approx(0.5)
        assert row.words == pytest.approx(5.0)

    def test_untagged_record_rejected(self):
        from affectcap import DataFormatError

        corpus = AnnotationCorpus([
            make_record("i1", tokens=["dog", "runs", "x", "y", "z"],
                        pos=["NOUN", "VERB", "DT", "DT", "DT"]),
            make_record("i2", tokens=["no", "tags", "here", "at", "all"]),
        ])
        with pytest.raises(DataFormatError):
            pos_stats_per_caption(corpus)

    def test_per_image_unique_counts(self):
        # "dog" appears as a noun in both captions of i1: counted once
        row = pos_diversity_per_image(self._corpus())
        assert set(row.raw) == set(POS_CATEGORIES)
        assert row.raw["nouns"] == pytest.approx(1.0)
        assert row.raw["verbs"] == pytest.approx(2.0)
        # two annotations for the image, so normalized halves the raw counts
        assert row.normalized["verbs"] == pytest.approx(1.0)


class TestEmotionDistribution:
    def test_counts_and_fractions(self, tiny_corpus):
        dist = emotion_distribution(tiny_corpus)
        assert dist.counts[EmotionLabel.AWE] == 2
        assert dist.counts[EmotionLabel.SADNESS] == 2
        assert dist.counts[EmotionLabel.FEAR] == 1
        assert dist.fractions[EmotionLabel.AWE] == pytest.approx(0.4)
        assert sum(dist.fractions.values()) == pytest.approx(1.0)

    def test_valence_rollup(self, tiny_corpus):
        dist = emotion_distribution(tiny_corpus)
        assert dist.rollup["positive"] == pytest.approx(0.4)
        assert dist.rollup["negative"] == pytest.approx(0.6)
        assert dist.rollup["something-else"] == 0.0


class TestMajority:
    def _corpus(self, labels_by_image):
        recs = []
        for img, labels in labels_by_image.items():
            for k, lab in enumerate(labels):
                recs.append(make_record(img, lab, ["w"] * 5, annotator=f"a{k}"))
        return AnnotationCorpus(recs)

    def test_strict_majority_required(self):
        corpus = self._corpus({
            "win": [EmotionLabel.AWE] * 3 + [EmotionLabel.FEAR] * 2,
            "tie": [EmotionLabel.AWE] * 2 + [EmotionLabel.FEAR] * 2,
            "exact-half": [EmotionLabel.AWE] * 2 + [EmotionLabel.FEAR, EmotionLabel.SADNESS],
        })
        winners = majority_labels(corpus, threshold=0.5)
        assert winners["win"] is EmotionLabel.AWE
        assert "tie" not in winners
        # 2 of 4 is not strictly more than half
        assert "exact-half" not in winners

    def test_stats_fractions(self):
        corpus = self._corpus({
            "a": [EmotionLabel.AWE] * 4 + [EmotionLabel.FEAR],
            "b": [EmotionLabel.AWE, EmotionLabel.FEAR, EmotionLabel.SADNESS,
                  EmotionLabel.ANGER, EmotionLabel.DISGUST],
        })
        stats = majority_stats(corpus)
        assert stats.n_images == 2
        assert stats.strong_majority_count == 1
        assert stats.strong_majority_fraction == pytest.approx(0.5)

    def test_mixed_valence(self):
        corpus = self._corpus({
            "mixed": [EmotionLabel.AWE] * 3 + [EmotionLabel.FEAR] * 2,
            "pure": [EmotionLabel.AWE] * 5,
        })
        stats = majority_stats(corpus)
        assert stats.mixed_valence_fraction == pytest.approx(0.5)


class TestReport:
    def test_report_sections(self, demo_corpus):
        report = analysis_report(demo_corpus, load_default_lexicons())
        for key in ("corpus", "pos_per_caption", "pos_per_image",
                    "emotion_distribution", "agreement", "concreteness",
                    "subjectivity", "sentiment", "similes"):
            assert key in report
        assert report["corpus"]["records"] == len(demo_corpus.records)
        assert report["corpus"]["images"] == len(demo_corpus.images)
        assert 0.0 <= report["similes"]["fraction"] <= 1.0

    def test_report_runs_without_pos(self, tiny_corpus):
        report = analysis_report(tiny_corpus, load_default_lexicons())
        assert report["pos_per_caption"]["available"] is False
