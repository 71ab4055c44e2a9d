import math

import pytest

from affectcap import (
    DataFormatError,
    detect_simile,
    load_default_lexicons,
    sentiment_valence,
    subjectivity,
)
from affectcap.lexicons import (
    CLASS_THRESHOLD,
    COMPOUND_NORM,
    ConcretenessLexicon,
    SentimentLexicon,
    SimilePhraseList,
    SubjectivityLexicon,
    corpus_concreteness,
)
from conftest import make_record
from affectcap import AnnotationCorpus


@pytest.fixture(scope="module")
def lexicons():
    return load_default_lexicons()


def compound_of(total: float) -> float:
    return total / math.sqrt(total * total + COMPOUND_NORM)


class TestConcreteness:
    def test_plural_fallback(self):
        lex = ConcretenessLexicon({"dog": 4.8, "box": 4.5})
        assert lex.lookup("dogs") == 4.8
        assert lex.lookup("boxes") == 4.5
        assert lex.lookup("dog") == 4.8
        assert lex.lookup("cat") is None

    def test_score_bounds_enforced(self):
        with pytest.raises(DataFormatError):
            ConcretenessLexicon({"bad": 5.5})

    def test_corpus_stats(self, lexicons):
        corpus = AnnotationCorpus([
            make_record(tokens=["the", "dog", "sits", "on", "grass"]),
        ])
        stats = corpus_concreteness(corpus, lexicons.concreteness)
        assert 0.0 < stats.coverage <= 1.0
        assert 1.0 <= stats.mean <= 5.0


class TestSentiment:
    def test_single_positive_word(self):
        lex = SentimentLexicon({"good": 1.9}, {}, {"not"})
        score = sentiment_valence(["a", "good", "day"], lex)
        assert score.compound == pytest.approx(compound_of(1.9))
        assert score.label == "positive"

    def test_negation_flips_within_window(self):
        lex = SentimentLexicon({"good": 1.9}, {}, {"not"})
        flipped = sentiment_valence(["not", "a", "good", "day"], lex)
        assert flipped.compound == pytest.approx(compound_of(-1.9))
        assert flipped.label == "negative"

    def test_negation_outside_window_ignored(self):
        lex = SentimentLexicon({"good": 1.9}, {}, {"not"})
        far = sentiment_valence(["not", "x", "y", "z", "good"], lex)
        assert far.compound > 0

    def test_booster_amplifies(self):
        lex = SentimentLexicon({"good": 1.9}, {"very": 0.3}, {"not"})
        plain = sentiment_valence(["good"], lex)
        boosted = sentiment_valence(["very", "good"], lex)
        assert boosted.compound == pytest.approx(compound_of(2.2))
        assert boosted.compound > plain.compound

    def test_booster_stacks_and_respects_sign(self):
        lex = SentimentLexicon({"bad": -2.0}, {"very": 0.3}, {"not"})
        score = sentiment_valence(["very", "very", "bad"], lex)
        assert score.compound == pytest.approx(compound_of(-2.6))

    def test_neutral_band(self):
        lex = SentimentLexicon({"meh": 0.1}, {}, {"not"})
        score = sentiment_valence(["meh"], lex)
        assert abs(score.compound) <= CLASS_THRESHOLD
        assert score.label == "neutral"

    def test_no_hits_is_neutral_zero(self):
        lex = SentimentLexicon({"good": 1.0}, {}, {"not"})
        score = sentiment_valence(["completely", "unrelated"], lex)
        assert score.compound == 0.0
        assert score.label == "neutral"

    def test_compound_bounded(self, lexicons):
        tokens = ["horrible", "terrible", "awful"] * 10
        score = sentiment_valence(tokens, lexicons.sentiment)
        assert -1.0 < score.compound < 1.0


class TestSubjectivity:
    def test_mean_of_matches(self):
        lex = SubjectivityLexicon({"lovely": 0.8, "gray": 0.2})
        assert subjectivity(["lovely", "gray", "wall"], lex) == pytest.approx(0.5)

    def test_no_matches(self):
        lex = SubjectivityLexicon({"lovely": 0.8})
        assert subjectivity(["plain", "wall"], lex) == 0.0

    def test_weight_bounds(self):
        with pytest.raises(DataFormatError):
            SubjectivityLexicon({"bad": 1.3})


class TestSimile:
    def test_contiguous_phrase(self):
        phrases = SimilePhraseList(["looks like", "as if"])
        assert detect_simile(["it", "looks", "like", "a", "ghost"], phrases)
        assert not detect_simile(["it", "looks", "very", "like", "that"], phrases)

    def test_case_insensitive(self):
        phrases = SimilePhraseList(["looks like"])
        assert detect_simile(["It", "LOOKS", "Like", "snow"], phrases)

    def test_phrase_at_edges(self):
        phrases = SimilePhraseList(["reminds me of"])
        assert detect_simile(["reminds", "me", "of", "home"], phrases)
        assert detect_simile(["this", "reminds", "me", "of"], phrases)

    def test_bundled_list_nonempty(self, lexicons):
        assert lexicons.similes.phrases
        assert ["like"] not in lexicons.similes.phrases  # bare "like" too noisy


class TestBundledFiles:
    def test_all_load(self, lexicons):
        assert len(lexicons.concreteness) > 100
        assert lexicons.sentiment.negations
        assert lexicons.subjectivity.weights

    def test_rejects_missing_file(self):
        with pytest.raises(DataFormatError):
            ConcretenessLexicon.load("/no/such/lexicon.tsv")
