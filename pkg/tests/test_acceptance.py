"""Acceptance gate: one test and one printed verdict line per criterion.

Every tolerance is pinned here rather than imported, so a drift in package
constants cannot silently weaken the gate.  Criteria that need the public
corpus are skipped (with a visible SKIP line) unless AFFECTCAP_PUBLIC_CORPUS
points at an annotation file in the ingestion format.
"""

import math
import os
import time
from contextlib import contextmanager

import numpy as np
import pytest

from affectcap import (
    AnnotationCorpus,
    Candidate,
    CandidateSet,
    EmbeddingTable,
    EmotionLabel,
    PragmaticConfig,
    TrainConfig,
    beta_sweep,
    bleu_n,
    calibrate_rescale,
    clip_div_cos,
    empirical_targets,
    evaluate_text_classifier,
    load_annotations,
    max_lcs,
    predict_image_emotion,
    rerank,
    rouge_l,
    split,
    train_image_probe,
    train_text_emotion,
    unique_fraction,
)
from affectcap.analysis import emotion_distribution, majority_stats
from affectcap.classifiers import ce_loss_and_grad, kl_loss_and_grad
from affectcap.emotions import EMOTIONS, NUM_EMOTIONS
from affectcap.lexicons import corpus_concreteness, load_default_lexicons
from affectcap.listener import retrieval_trial
from affectcap.metrics import GenerationRecord, simile_fraction

import oracles
from conftest import ACCEPTANCE_LINES

ORACLE_TOL = 1e-12        # "exact" agreement between two float pipelines
BALANCE_TOL = 1e-9        # term balance after rescale calibration
GRAD_TOL = 1e-4           # finite-difference relative error
MONOTONE_TOL = 1e-12      # loss may flatline, never rise
CORPUS_ENV = "AFFECTCAP_PUBLIC_CORPUS"


def _emit(name, status):
    line = f"ACCEPTANCE {name}: {status}"
    print(line, flush=True)
    ACCEPTANCE_LINES.append(line)


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException as exc:
        skipped = isinstance(exc, pytest.skip.Exception)
        _emit(name, f"SKIP ({exc})" if skipped else "FAIL")
        raise
    _emit(name, "PASS")


def _random_tokens(rng, lo, hi, vocab=("the", "a", "dog", "cat", "runs",
                                       "sleeps", "red", "on", "mat", "fast")):
    return [vocab[i] for i in rng.integers(0, len(vocab), rng.integers(lo, hi + 1))]


def test_overlap_metrics_match_oracles():
    with criterion("overlap-metric-oracles"):
        rng = np.random.default_rng(20240)
        start = time.perf_counter()
        for _ in range(100):
            cand = _random_tokens(rng, 1, 20)
            refs = [_random_tokens(rng, 1, 20) for _ in range(rng.integers(1, 4))]
            for n in range(1, 5):
                # unsmoothed scores require n-grams to exist in the candidate
                modes = (True, False) if len(cand) >= n else (True,)
                for smoothing in modes:
                    got = bleu_n(cand, refs, n, smoothing=smoothing)
                    want = oracles.bleu_reference(cand, refs, n, smoothing=smoothing)
                    assert got == pytest.approx(want, abs=ORACLE_TOL)
            got = rouge_l(cand, refs)
            want = oracles.rouge_l_reference(cand, refs)
            assert got == pytest.approx(want, abs=ORACLE_TOL)
        assert time.perf_counter() - start < 1.0


def _random_sets(rng, n_sets, min_size=3, max_size=8):
    sets = []
    for k in range(n_sets):
        cands = []
        for j in range(rng.integers(min_size, max_size + 1)):
            c = Candidate(text=f"utterance {k} {j}",
                          tokens=["utterance", str(k), str(j)],
                          log_p_speaker=float(-abs(rng.normal(2.0, 1.0))))
            c.log_p_listener = float(-abs(rng.normal(1.0, 0.7)))
            cands.append(c)
        sets.append(CandidateSet(image_id=f"img-{k}",
                                 image_embedding_id=f"img-{k}",
                                 candidates=cands))
    return sets


def test_fused_score_endpoints_and_frontier():
    with criterion("fused-score-endpoints-and-frontier"):
        rng = np.random.default_rng(77)
        sets = _random_sets(rng, 50)
        start = time.perf_counter()
        for cs in sets:
            rerank(cs, PragmaticConfig(beta=0.0, rescale=1.0))
            by_speaker = sorted(cs.candidates,
                                key=lambda c: -c.log_p_speaker)
            assert [c.text for c in cs.candidates] == [c.text for c in by_speaker]
            rerank(cs, PragmaticConfig(beta=1.0, rescale=1.0))
            by_listener = sorted(cs.candidates,
                                 key=lambda c: -c.log_p_listener)
            assert [c.text for c in cs.candidates] == [c.text for c in by_listener]
        betas = [i / 10 for i in range(11)]
        rows = beta_sweep(sets, betas, rescale=1.0)
        for cs in sets:
            winners = [rows[i].selected[cs.image_id].log_p_listener
                       for i in range(len(betas))]
            assert all(b - a >= -MONOTONE_TOL for a, b in zip(winners, winners[1:]))
        assert time.perf_counter() - start < 1.0


def test_rescale_calibration_balances_terms():
    with criterion("rescale-calibration-balance"):
        rng = np.random.default_rng(9)
        sets = _random_sets(rng, 20)
        s = calibrate_rescale(sets)
        listener_terms = []
        speaker_terms = []
        for cs in sets:
            for c in cs.candidates:
                listener_terms.append(0.5 * c.log_p_listener)
                speaker_terms.append(0.5 * s * c.log_p_speaker)
        gap = abs(float(np.mean(listener_terms)) - float(np.mean(speaker_terms)))
        assert gap < BALANCE_TOL


def test_gradients_match_finite_differences():
    with criterion("finite-difference-gradients"):
        rng = np.random.default_rng(5)
        # text model: 6 examples, 5 bag-of-ngram features plus bias
        feats = np.zeros((6, 6))
        feats[np.arange(6), rng.integers(0, 5, 6)] = rng.integers(1, 3, 6)
        feats[:, -1] = 1.0
        labels = rng.integers(0, NUM_EMOTIONS, 6)
        weights = rng.normal(scale=0.3, size=(NUM_EMOTIONS, 6))
        _, grad = ce_loss_and_grad(weights, feats, labels, 0.2)
        numeric = oracles.central_difference_gradient(
            lambda w: ce_loss_and_grad(w, feats, labels, 0.2)[0], weights.copy())
        assert oracles.relative_gradient_error(grad, numeric) < GRAD_TOL

        # image probe: 8 examples, distribution targets
        feats = np.hstack([rng.normal(size=(8, 4)), np.ones((8, 1))])
        targets = rng.dirichlet(np.ones(NUM_EMOTIONS), size=8)
        weights = rng.normal(scale=0.3, size=(NUM_EMOTIONS, 5))
        _, grad = kl_loss_and_grad(weights, feats, targets, 0.1)
        numeric = oracles.central_difference_gradient(
            lambda w: kl_loss_and_grad(w, feats, targets, 0.1)[0], weights.copy())
        assert oracles.relative_gradient_error(grad, numeric) < GRAD_TOL


def test_training_is_monotone_and_toy_separable(demo_corpus, demo_path):
    with criterion("convex-training"):
        clf = train_text_emotion(demo_corpus,
                                 TrainConfig(learning_rate=1e-3, epochs=200))
        diffs = np.diff(np.asarray(clf.losses))
        assert np.all(diffs <= MONOTONE_TOL)

        images = EmbeddingTable.load(demo_path / "image_embeddings.bin")
        targets = empirical_targets(demo_corpus)
        probe = train_image_probe(images, targets,
                                  TrainConfig(learning_rate=1e-3, epochs=200))
        diffs = np.diff(np.asarray(probe.losses))
        assert np.all(diffs <= MONOTONE_TOL)

        # 20 points, 4 emotions, orthogonal embeddings: must hit 100% argmax
        ids = [f"toy-{i}" for i in range(20)]
        mat = np.zeros((20, 4))
        toy_emotions = EMOTIONS[:4]
        toy_targets = {}
        for i, img in enumerate(ids):
            mat[i, i % 4] = 1.0
            t = np.zeros(NUM_EMOTIONS)
            t[i % 4] = 1.0
            toy_targets[img] = t
        table = EmbeddingTable(ids, mat, "toy")
        probe = train_image_probe(table, toy_targets,
                                  TrainConfig(learning_rate=1.0, epochs=300))
        for i, img in enumerate(ids):
            dist = predict_image_emotion(probe, table.get(img), "toy")
            assert dist.argmax_label() is toy_emotions[i % 4]


def test_retrieval_chance_and_perfect_pairs():
    with criterion("retrieval-sanity"):
        start = time.perf_counter()
        rng = np.random.default_rng(123)
        trials = 10_000
        for n in (1, 4, 10):
            hits = 0
            for _ in range(trials):
                cap = rng.normal(size=64)
                pool = rng.normal(size=(n + 1, 64))
                # rows are unit-normalized; retrieval only compares cosines
                pool /= np.linalg.norm(pool, axis=1, keepdims=True)
                hits += retrieval_trial(cap / np.linalg.norm(cap),
                                        pool[0], pool[1:])
            p = 1.0 / (n + 1)
            sigma = math.sqrt(p * (1 - p) / trials)
            assert abs(hits / trials - p) <= 3 * sigma
        for n in (1, 4, 10):
            for _ in range(200):
                target = rng.normal(size=64)
                distractors = rng.normal(size=(n, 64))
                assert retrieval_trial(target, target, distractors)
        assert time.perf_counter() - start < 30.0


def test_diversity_metric_hand_values():
    with criterion("diversity-hand-values"):
        v = np.array([0.3, 0.4])
        assert clip_div_cos([v, v, v]) == pytest.approx(1.0, abs=ORACLE_TOL)
        a, b = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        assert clip_div_cos([a, b]) == pytest.approx(0.0, abs=ORACLE_TOL)
        assert clip_div_cos([a, b, a.copy()]) == pytest.approx(1 / 3, abs=ORACLE_TOL)
        assert unique_fraction(["a", "b", "a", "c"]) == pytest.approx(75.0)
        assert unique_fraction(["same"] * 4) == pytest.approx(25.0)
        got = max_lcs("a b c d e".split(), ["a c e".split()])
        assert got == pytest.approx(60.0, abs=1e-9)
        toks = "x y z".split()
        assert max_lcs(toks, [toks]) == pytest.approx(100.0, abs=1e-9)


def _public_corpus():
    path = os.environ.get(CORPUS_ENV)
    if not path:
        pytest.skip(f"set {CORPUS_ENV} to the public annotation file")
    return load_annotations(path).corpus


def test_public_corpus_statistics():
    with criterion("public-corpus-statistics"):
        corpus = _public_corpus()
        mean_len = float(np.mean([len(r.tokens) for r in corpus.records]))
        assert mean_len == pytest.approx(18.8, abs=0.2)

        rollup = emotion_distribution(corpus).rollup
        assert 100 * rollup["positive"] == pytest.approx(71.3, abs=0.5)
        assert 100 * rollup["negative"] == pytest.approx(21.1, abs=0.5)
        assert 100 * rollup["something-else"] == pytest.approx(7.6, abs=0.5)

        agree = majority_stats(corpus)
        assert 100 * agree.strong_majority_fraction == pytest.approx(67.5, abs=1.0)
        assert 100 * agree.mixed_valence_fraction == pytest.approx(50.0, abs=1.0)

        lex = load_default_lexicons()
        assert corpus_concreteness(corpus, lex.concreteness).mean == \
            pytest.approx(2.82, abs=0.05)

        wrapped = [GenerationRecord(image_id=r.image_id, text=r.explanation,
                                    tokens=r.tokens) for r in corpus.records]
        assert simile_fraction(wrapped, lex.similes) == pytest.approx(19.7, abs=1.0)

        tagged = [r for r in corpus.records if r.pos_tags]
        if len(tagged) == len(corpus.records):
            from affectcap.analysis import pos_stats_per_caption
            assert pos_stats_per_caption(corpus).nouns == pytest.approx(4.5, abs=0.2)


def test_public_corpus_classifier_floor():
    with criterion("public-corpus-classifier-floor"):
        corpus = _public_corpus()
        parts = split(corpus, (0.85, 0.05, 0.10), seed=0)
        train_ids = set(parts.images_in("train"))
        test_ids = set(parts.images_in("test"))
        train = AnnotationCorpus([r for r in corpus.records
                                  if r.image_id in train_ids])
        test = AnnotationCorpus([r for r in corpus.records
                                 if r.image_id in test_ids])
        clf = train_text_emotion(train, TrainConfig(learning_rate=0.5, epochs=300))
        cm = evaluate_text_classifier(clf, test)
        counts = np.zeros(NUM_EMOTIONS)
        for r in test.records:
            counts[EMOTIONS.index(r.emotion)] += 1
        majority_baseline = counts.max() / counts.sum()
        assert cm.accuracy() >= majority_baseline + 0.10
        assert cm.binarized_accuracy() > 0.80
