"""Toolkit for affective explanation captioning: corpus analytics, emotion
classifiers, listener retrieval, pragmatic re-ranking, and a metric battery.
"""

from ._version import __version__
from .analysis import (
    AgreementStats,
    EmotionHistogram,
    analysis_report,
    emotion_distribution,
    majority_labels,
    majority_stats,
    pos_diversity_per_image,
    pos_stats_per_caption,
)
from .classifiers import (
    ConfusionMatrix,
    EmotionDistribution,
    ImageEmotionProbe,
    TextEmotionClassifier,
    TrainConfig,
    binarize_sentiment,
    empirical_targets,
    evaluate_image_probe,
    evaluate_text_classifier,
    load_model,
    predict_emotion,
    predict_image_emotion,
    save_model,
    train_image_probe,
    train_text_emotion,
)
from .corpus import (
    AnnotationCorpus,
    AnnotationRecord,
    Vocabulary,
    build_vocabulary,
    load_annotations,
    preprocess,
    save_annotations,
    split,
    tokenize,
)
from .demo import build_demo, demo_dir
from .embeddings import (
    EmbeddingTable,
    EmbeddingVector,
    check_compatible,
    cosine,
    deduplicate,
    exact_duplicate_groups,
    select_seed_neighbors,
)
from .emotions import EMOTIONS, EmotionLabel, parse_emotion, valence_of
from .errors import AffectcapError, DataFormatError, MissingDataError
from .lexicons import (
    LexiconSet,
    concreteness_score,
    corpus_concreteness,
    detect_simile,
    load_default_lexicons,
    sentiment_valence,
    subjectivity,
)
from .listener import (
    ContrastiveConfig,
    ContrastiveProjection,
    RetrievalCurve,
    retrieval_curve,
    retrieval_trial,
    train_contrastive_projection,
)
from .metrics import (
    GenerationRecord,
    MetricConfig,
    MetricReport,
    bleu_n,
    clip_div_cos,
    clip_score,
    corpus_bleu,
    emotional_alignment,
    evaluate_all,
    load_generations,
    max_lcs,
    ref_clip_score,
    rouge_l,
    save_generations,
    simile_fraction,
    unique_fraction,
)
from .pragmatics import (
    Candidate,
    CandidateSet,
    PragmaticConfig,
    beta_sweep,
    calibrate_rescale,
    listener_logprob,
    load_candidate_sets,
    pragmatic_score,
    rerank,
    save_candidate_sets,
)
