"""Command-line surface: reproducible pipelines over the library modules.

Every command resolves its options as flag > config file > default, embeds
the resolved configuration in a header at the top of each output file, and
seeds all randomness explicitly, so identical invocations produce identical
bytes.  Progress goes to stderr; results go to files only.

The optional config file is a deliberately small TOML subset: ``key = value``
pairs and ``[command]`` sections, with strings, numbers, booleans, and flat
arrays.  (Hand-rolled here: this interpreter predates stdlib TOML support.)
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from . import analysis
from ._version import __version__
from .classifiers import (
    TextEmotionClassifier,
    TrainConfig,
    empirical_targets,
    evaluate_image_probe,
    evaluate_text_classifier,
    load_model,
    save_model,
    train_image_probe,
    train_text_emotion,
)
from .corpus import (
    build_vocabulary,
    load_annotations,
    preprocess,
    save_annotations,
    split,
)
from .embeddings import EmbeddingTable
from .errors import AffectcapError, DataFormatError
from .lexicons import load_default_lexicons
from .listener import ContrastiveConfig, project_tables, retrieval_curve, train_contrastive_projection
from .metrics import (
    MetricConfig,
    MetricReport,
    evaluate_all,
    load_generations,
    reference_embedding_ids,
    reports_to_csv,
)
from .pragmatics import (
    PragmaticConfig,
    beta_sweep,
    calibrate_rescale,
    listener_logprob,
    load_candidate_sets,
    rerank,
    save_candidate_sets,
)


class UsageError(Exception):
    """Bad arguments or flags; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: A003 - argparse API
        raise UsageError(message)


# --------------------------------------------------------------- TOML subset


def _strip_comment(line: str) -> str:
    out = []
    quote = None
    for ch in line:
        if quote:
            out.append(ch)
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
            out.append(ch)
        elif ch == "#":
            break
        else:
            out.append(ch)
    return "".join(out).strip()


def _toml_scalar(text: str, where: str):
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        body = text[1:-1]
        if text[0] == '"':
            body = (
                body.replace("\\\\", "\x00")
                .replace('\\"', '"')
                .replace("\\n", "\n")
                .replace("\\t", "\t")
                .replace("\x00", "\\")
            )
        return body
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        raise DataFormatError(f"{where}: cannot parse value {text!r}") from None


def _split_array(body: str, where: str) -> List[str]:
    parts = []
    depth = 0
    quote = None
    cur = ""
    for ch in body:
        if quote:
            cur += ch
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
            cur += ch
        elif ch == "[":
            depth += 1
            cur += ch
        elif ch == "]":
            depth -= 1
            cur += ch
        elif ch == "," and depth == 0:
            parts.append(cur.strip())
            cur = ""
        else:
            cur += ch
    if quote or depth:
        raise DataFormatError(f"{where}: unterminated array or string")
    if cur.strip():
        parts.append(cur.strip())
    return parts


def _toml_value(text: str, where: str):
    if text.startswith("[") and text.endswith("]"):
        body = text[1:-1].strip()
        if not body:
            return []
        return [_toml_value(p, where) for p in _split_array(body, where)]
    return _toml_scalar(text, where)


def parse_flat_toml(text: str, name: str = "<config>") -> Dict[str, Any]:
    """Flat key = value pairs, optional [section] tables, one level deep."""
    data: Dict[str, Any] = {}
    table = data
    for lineno, raw in enumerate(text.splitlines(), start=1):
        where = f"{name}:{lineno}"
        line = _strip_comment(raw)
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if not section:
                raise DataFormatError(f"{where}: empty section name")
            table = data.setdefault(section, {})
            if not isinstance(table, dict):
                raise DataFormatError(f"{where}: section {section!r} collides with a key")
            continue
        if "=" not in line:
            raise DataFormatError(f"{where}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise DataFormatError(f"{where}: empty key")
        table[key] = _toml_value(value.strip(), where)
    return data


# ----------------------------------------------------------- option plumbing


def _ints(value) -> List[int]:
    if isinstance(value, list):
        return [int(v) for v in value]
    return [int(p) for p in str(value).split(",") if p.strip() != ""]


def _floats(value) -> List[float]:
    if isinstance(value, list):
        return [float(v) for v in value]
    return [float(p) for p in str(value).split(",") if p.strip() != ""]


_UNSET = object()


class Opt:
    def __init__(self, flag: str, type: Callable = str, default: Any = None,
                 help: str = "", required: bool = False, is_flag: bool = False):
        self.flag = flag
        self.dest = flag.lstrip("-").replace("-", "_")
        self.type = type
        self.default = default
        self.help = help
        self.required = required
        self.is_flag = is_flag

    def coerce(self, value):
        if self.is_flag:
            return bool(value)
        return self.type(value)


_HYPER = [
    Opt("--lr", float, 0.1, "gradient descent learning rate"),
    Opt("--epochs", int, 200, "training epochs"),
    Opt("--batch-size", int, 0, "mini-batch size; 0 = full batch"),
    Opt("--l2", float, 0.0, "L2 penalty strength (bias excluded)"),
    Opt("--seed", int, 0, "seed for all randomness in this command"),
]

COMMANDS: Dict[str, Dict[str, Any]] = {
    "ingest": {
        "help": "load, validate, filter, and split an annotation file",
        "opts": [
            Opt("--annotations", str, None, "input line-JSON annotation file", required=True),
            Opt("--out", str, None, "output directory", required=True),
            Opt("--min-tokens", int, 5, "drop explanations shorter than this"),
            Opt("--max-tokens", int, 51, "drop explanations longer than this"),
            Opt("--min-count", int, 2, "vocabulary frequency cutoff"),
            Opt("--ratios", _floats, [0.85, 0.05, 0.10], "train,val,test image ratios"),
            Opt("--seed", int, 0, "split shuffle seed"),
            Opt("--strict", is_flag=True, default=False, help="abort on any malformed record"),
        ],
    },
    "analyze": {
        "help": "corpus statistics report (emotions, agreement, language)",
        "opts": [
            Opt("--annotations", str, None, "input annotation file", required=True),
            Opt("--out", str, None, "output directory", required=True),
            Opt("--concreteness-lexicon", str, None, "override bundled concreteness TSV"),
            Opt("--sentiment-lexicon", str, None, "override bundled sentiment TSV"),
            Opt("--subjectivity-lexicon", str, None, "override bundled subjectivity TSV"),
            Opt("--simile-phrases", str, None, "override bundled simile phrase list"),
            Opt("--strict", is_flag=True, default=False, help="abort on any malformed record"),
        ],
    },
    "train-text-clf": {
        "help": "train the bag-of-ngrams text emotion classifier",
        "opts": [
            Opt("--annotations", str, None, "training annotation file", required=True),
            Opt("--out", str, None, "model path prefix (writes .json/.bin)", required=True),
            Opt("--eval-annotations", str, None, "optional held-out file for a confusion report"),
            Opt("--class-weighting", is_flag=True, default=False,
                help="inverse-frequency example weights"),
        ] + _HYPER,
    },
    "train-image-probe": {
        "help": "train the linear image-to-emotion probe",
        "opts": [
            Opt("--annotations", str, None, "annotations providing empirical targets", required=True),
            Opt("--image-emb", str, None, "packed image embedding table", required=True),
            Opt("--out", str, None, "model path prefix (writes .json/.bin)", required=True),
        ] + _HYPER,
    },
    "listen": {
        "help": "retrieval accuracy curve over distractor counts",
        "opts": [
            Opt("--text-emb", str, None, "caption embedding table", required=True),
            Opt("--image-emb", str, None, "image embedding table", required=True),
            Opt("--out", str, None, "output directory", required=True),
            Opt("--ns", _ints, [1, 4, 10], "distractor counts"),
            Opt("--seeds", _ints, [0, 1, 2, 3, 4], "trial seeds"),
            Opt("--proj-dim", int, 0, "if > 0, train a contrastive projection first"),
            Opt("--temperature", float, 0.07, "contrastive temperature"),
            Opt("--lr", float, 0.05, "projection learning rate"),
            Opt("--epochs", int, 200, "projection epochs"),
            Opt("--batch-size", int, 0, "projection batch size; 0 = full batch"),
            Opt("--seed", int, 0, "projection init seed"),
        ],
    },
    "rerank": {
        "help": "score candidates with the listener and re-rank per beta",
        "opts": [
            Opt("--candidates", str, None, "candidate set file", required=True),
            Opt("--text-emb", str, None, "caption embedding table", required=True),
            Opt("--img-emb", str, None, "image embedding table", required=True),
            Opt("--out", str, None, "output candidate file", required=True),
            Opt("--beta", float, 0.5, "listener weight in [0,1]"),
            Opt("--rescale", float, 1.0, "speaker-term rescale factor when not calibrating"),
            Opt("--calibrate", is_flag=True, default=False,
                help="compute the rescale factor from these sets"),
            Opt("--temperature", float, 0.07, "listener softmax temperature"),
            Opt("--betas", _floats, [], "optional sweep; writes <out>.sweep.json"),
        ],
    },
    "eval": {
        "help": "metric battery over a generation file",
        "opts": [
            Opt("--generations", str, None, "generation file", required=True),
            Opt("--out", str, None, "output directory", required=True),
            Opt("--refs", str, None, "reference annotation file"),
            Opt("--text-emb", str, None, "caption embedding table"),
            Opt("--img-emb", str, None, "image embedding table"),
            Opt("--clf", str, None, "text classifier prefix for emotional alignment"),
            Opt("--train-annotations", str, None,
                "training corpus for Max-LCS (defaults to --refs)"),
            Opt("--simile-phrases", str, None, "override bundled simile phrase list"),
            Opt("--lcs-sample", int, 10000, "training subsample size for Max-LCS"),
            Opt("--seed", int, 0, "subsample seed"),
            Opt("--no-smoothing", is_flag=True, default=False,
                help="disable add-one BLEU smoothing"),
            Opt("--strict", is_flag=True, default=False, help="abort on malformed records"),
        ],
    },
    "report": {
        "help": "merge eval reports into one CSV table",
        "opts": [
            Opt("--inputs", str, None, "comma-separated report.json paths", required=True),
            Opt("--names", str, None, "comma-separated row names (default: file stems)"),
            Opt("--out", str, None, "output CSV path", required=True),
        ],
    },
}

for _spec in COMMANDS.values():
    _spec["opts"].append(Opt("--config", str, None, "TOML-style config file"))
    _spec["opts"].append(Opt("--threads", int, 0,
                             "worker parallelism bound; 0 = all cores "
                             "(results never depend on it)"))


def _resolve(command: str, args: argparse.Namespace, opts: List[Opt]) -> Dict[str, Any]:
    """flag > config file > declared default."""
    file_values: Dict[str, Any] = {}
    config_path = getattr(args, "config", None)
    if config_path is _UNSET:
        config_path = None
    if config_path:
        path = Path(config_path)
        if not path.exists():
            raise DataFormatError(f"config file not found: {path}")
        parsed = parse_flat_toml(path.read_text(encoding="utf-8"), path.name)
        for key, value in parsed.items():
            if isinstance(value, dict):
                if key == command:
                    file_values.update(value)
            else:
                file_values.setdefault(key, value)
    resolved: Dict[str, Any] = {}
    for opt in opts:
        def _coerce(raw):
            try:
                return opt.coerce(raw)
            except (TypeError, ValueError) as exc:
                raise UsageError(f"bad value for {opt.flag}: {exc}") from None

        value = getattr(args, opt.dest)
        if value is not _UNSET:
            value = _coerce(value)
        else:
            key_dash = opt.flag.lstrip("-")
            if key_dash in file_values:
                value = _coerce(file_values[key_dash])
            elif opt.dest in file_values:
                value = _coerce(file_values[opt.dest])
            else:
                value = opt.default
        if value is None and opt.required:
            raise UsageError(f"{command}: missing required option {opt.flag}")
        resolved[opt.dest] = value
    return resolved


def _header(command: str, cfg: Dict[str, Any]) -> Dict[str, Any]:
    return {
        "tool": "affectcap",
        "version": __version__,
        "command": command,
        "config": {k: v for k, v in sorted(cfg.items())},
    }


def _write_json(path: Path, payload: Dict[str, Any], header: Dict[str, Any]) -> None:
    doc = {"__header__": header}
    doc.update(payload)
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def _open_csv(path: Path, header: Dict[str, Any]):
    fh = open(path, "w", newline="", encoding="utf-8")
    fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
    return fh


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load_corpus(path: str, strict: bool):
    result = load_annotations(path, strict=strict)
    if result.skipped_count:
        _log(f"skipped {result.skipped_count} malformed records")
    if not result.corpus.records:
        raise DataFormatError(f"{path}: no usable records")
    return result


# ------------------------------------------------------------- the commands


def _cmd_ingest(cfg: Dict[str, Any]) -> int:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    header = _header("ingest", cfg)
    loaded = _load_corpus(cfg["annotations"], cfg["strict"])
    pre = preprocess(loaded.corpus, cfg["min_tokens"], cfg["max_tokens"])
    _log(f"kept {pre.kept} records, removed {pre.removed} "
         f"({100 * pre.removal_fraction:.2f}%)")
    save_annotations(pre.corpus, out / "annotations.jsonl", header=header)

    vocab = build_vocabulary(pre.corpus, cfg["min_count"])
    with _open_csv(out / "vocab.tsv", header) as fh:
        fh.write("id\ttoken\n")
        for token, tid in sorted(vocab.token_to_id.items(), key=lambda kv: kv[1]):
            fh.write(f"{tid}\t{token}\n")

    ratios = cfg["ratios"]
    if len(ratios) != 3:
        raise UsageError("--ratios needs exactly three values")
    assignment = split(pre.corpus, tuple(ratios), cfg["seed"])
    _write_json(out / "splits.json", {
        "assignment": assignment.assignment,
        "ratios": list(assignment.ratios),
        "seed": assignment.seed,
        "counts": {p: len(assignment.images_in(p)) for p in assignment.PARTS},
    }, header)

    _write_json(out / "ingest_summary.json", {
        "loaded": len(loaded.corpus.records),
        "skipped": loaded.skipped_count,
        "kept": pre.kept,
        "removed": pre.removed,
        "removal_fraction": pre.removal_fraction,
        "images": len(pre.corpus.images),
        "vocab_size": len(vocab),
    }, header)
    return 0


def _cmd_analyze(cfg: Dict[str, Any]) -> int:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    header = _header("analyze", cfg)
    corpus = _load_corpus(cfg["annotations"], cfg["strict"]).corpus
    lexicons = load_default_lexicons(
        cfg["concreteness_lexicon"], cfg["sentiment_lexicon"],
        cfg["subjectivity_lexicon"], cfg["simile_phrases"],
    )
    report = analysis.analysis_report(corpus, lexicons)
    _write_json(out / "report.json", report, header)

    with _open_csv(out / "emotions.csv", header) as fh:
        w = csv.writer(fh)
        w.writerow(["emotion", "count", "fraction"])
        dist = report["emotion_distribution"]
        for label in dist["counts"]:
            w.writerow([label, dist["counts"][label], f"{dist['fractions'][label]:.6f}"])
        for bucket, frac in dist["rollup"].items():
            w.writerow([f"rollup:{bucket}", "", f"{frac:.6f}"])

    with _open_csv(out / "agreement.csv", header) as fh:
        w = csv.writer(fh)
        w.writerow(["measure", "value"])
        for key, value in sorted(report["agreement"].items()):
            if isinstance(value, dict):
                for label, frac in value.items():
                    w.writerow([f"{key}:{label}", f"{frac:.6f}"])
            else:
                w.writerow([key, value])

    with _open_csv(out / "language.csv", header) as fh:
        w = csv.writer(fh)
        w.writerow(["measure", "value"])
        w.writerow(["concreteness_mean", f"{report['concreteness']['mean']:.6f}"])
        w.writerow(["concreteness_coverage", f"{report['concreteness']['coverage']:.6f}"])
        w.writerow(["subjectivity_mean", f"{report['subjectivity']['mean']:.6f}"])
        w.writerow(["sentiment_mean_compound", f"{report['sentiment']['mean_compound']:.6f}"])
        for label, frac in report["sentiment"]["class_fractions"].items():
            w.writerow([f"sentiment_fraction_{label}", f"{frac:.6f}"])
        w.writerow(["simile_fraction", f"{report['similes']['fraction']:.6f}"])
        w.writerow(["mean_tokens", f"{report['corpus']['mean_tokens']:.6f}"])

    if report["pos_per_caption"]["available"]:
        with _open_csv(out / "pos.csv", header) as fh:
            w = csv.writer(fh)
            w.writerow(["category", "per_caption_mean", "per_image_unique_raw",
                        "per_image_unique_normalized"])
            per_img = report["pos_per_image"]
            for cat in analysis.POS_CATEGORIES:
                w.writerow([
                    cat,
                    f"{report['pos_per_caption'][cat]:.6f}",
                    f"{per_img['raw'][cat]:.6f}",
                    f"{per_img['normalized'][cat]:.6f}",
                ])
    else:
        _log("pos tags absent; POS tables skipped")
    return 0


def _train_config(cfg: Dict[str, Any], class_weighting: bool = False) -> TrainConfig:
    return TrainConfig(
        learning_rate=cfg["lr"],
        epochs=cfg["epochs"],
        batch_size=cfg["batch_size"] or None,
        l2=cfg["l2"],
        seed=cfg["seed"],
        class_weighting=class_weighting,
    )


def _cmd_train_text_clf(cfg: Dict[str, Any]) -> int:
    header = _header("train-text-clf", cfg)
    corpus = _load_corpus(cfg["annotations"], strict=False).corpus
    clf = train_text_emotion(corpus, _train_config(cfg, cfg["class_weighting"]))
    if clf.single_class:
        _log("warning: training corpus holds a single emotion class")
    prefix = Path(cfg["out"])
    prefix.parent.mkdir(parents=True, exist_ok=True)
    save_model(clf, prefix)
    _write_json(Path(str(prefix) + ".train.json"), {
        "final_loss": clf.losses[-1],
        "losses": clf.losses,
        "features": len(clf.feature_index),
        "records": len(corpus.records),
        "single_class": clf.single_class,
    }, header)
    _log(f"final train loss {clf.losses[-1]:.6f}")
    if cfg["eval_annotations"]:
        test = _load_corpus(cfg["eval_annotations"], strict=False).corpus
        cm = evaluate_text_classifier(clf, test)
        _write_json(Path(str(prefix) + ".eval.json"), {
            "accuracy": cm.accuracy(),
            "binarized_accuracy": cm.binarized_accuracy(),
            "support": cm.support().tolist(),
            "confusion": cm.counts.tolist(),
        }, header)
        _log(f"eval accuracy {cm.accuracy():.4f}")
    return 0


def _cmd_train_image_probe(cfg: Dict[str, Any]) -> int:
    header = _header("train-image-probe", cfg)
    corpus = _load_corpus(cfg["annotations"], strict=False).corpus
    table = EmbeddingTable.load(cfg["image_emb"])
    targets = empirical_targets(corpus)
    targets = {i: t for i, t in targets.items() if i in table.index}
    if not targets:
        raise DataFormatError("no annotated image has an embedding")
    probe = train_image_probe(table, targets, _train_config(cfg))
    prefix = Path(cfg["out"])
    prefix.parent.mkdir(parents=True, exist_ok=True)
    save_model(probe, prefix)
    majority = analysis.majority_labels(corpus)
    majority = {i: l for i, l in majority.items() if i in table.index}
    payload: Dict[str, Any] = {
        "final_loss": probe.losses[-1],
        "losses": probe.losses,
        "targets": len(targets),
        "space_tag": probe.space_tag,
    }
    if majority:
        cm = evaluate_image_probe(probe, table, majority)
        payload["strong_majority_images"] = len(majority)
        payload["strong_majority_accuracy"] = cm.accuracy()
    _write_json(Path(str(prefix) + ".train.json"), payload, header)
    _log(f"final train loss {probe.losses[-1]:.6f}")
    return 0


def _cmd_listen(cfg: Dict[str, Any]) -> int:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    header = _header("listen", cfg)
    texts = EmbeddingTable.load(cfg["text_emb"])
    images = EmbeddingTable.load(cfg["image_emb"])
    groups = reference_embedding_ids(texts)
    pairs = sorted(
        (tid, image_id)
        for image_id, tids in groups.items()
        if image_id in images.index
        for tid in tids
    )
    if not pairs:
        raise DataFormatError(
            "no caption/image pairs: expected text ids of the form '<image_id>#<k>'"
        )
    _log(f"{len(pairs)} caption/image pairs over {len(images)} images")
    if cfg["proj_dim"] > 0:
        proj = train_contrastive_projection(
            texts, images, pairs, cfg["proj_dim"],
            ContrastiveConfig(
                learning_rate=cfg["lr"],
                epochs=cfg["epochs"],
                batch_size=cfg["batch_size"] or None,
                temperature=cfg["temperature"],
                seed=cfg["seed"],
            ),
        )
        texts, images = project_tables(proj, texts, images)
        _write_json(out / "projection.json", {
            "losses": proj.losses,
            "final_loss": proj.losses[-1],
            "proj_dim": cfg["proj_dim"],
            "temperature": proj.temperature,
        }, header)
        _log(f"projection final loss {proj.losses[-1]:.6f}")
    curve = retrieval_curve(texts, images, pairs, cfg["ns"], cfg["seeds"])
    _write_json(out / "curve.json", {
        "seeds": curve.seeds,
        "points": [
            {
                "n_distractors": p.n_distractors,
                "mean_accuracy": p.mean_accuracy,
                "std_accuracy": p.std_accuracy,
                "per_seed": p.per_seed,
            }
            for p in curve.points
        ],
    }, header)
    with _open_csv(out / "curve.csv", header) as fh:
        writer = csv.writer(fh)
        writer.writerow(["n_distractors", "mean_accuracy", "std_accuracy"]
                        + [f"seed_{s}" for s in curve.seeds])
        for p in curve.points:
            writer.writerow([p.n_distractors, f"{p.mean_accuracy:.6f}",
                             f"{p.std_accuracy:.6f}"]
                            + [f"{a:.6f}" for a in p.per_seed])
    for p in curve.points:
        _log(f"n={p.n_distractors}: {p.mean_accuracy:.4f} ± {p.std_accuracy:.4f}")
    return 0


def _cmd_rerank(cfg: Dict[str, Any]) -> int:
    header = _header("rerank", cfg)
    sets = load_candidate_sets(cfg["candidates"])
    texts = EmbeddingTable.load(cfg["text_emb"])
    images = EmbeddingTable.load(cfg["img_emb"])
    for cs in sets:
        listener_logprob(cs, texts, images, cfg["temperature"])
    rescale = calibrate_rescale(sets) if cfg["calibrate"] else cfg["rescale"]
    _log(f"rescale factor s = {rescale:.6g}"
         + (" (calibrated)" if cfg["calibrate"] else ""))
    config = PragmaticConfig(beta=cfg["beta"], rescale=rescale)
    for cs in sets:
        rerank(cs, config)
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    header["rescale_applied"] = rescale
    save_candidate_sets(sets, out, header=header)
    if cfg["betas"]:
        rows = beta_sweep(sets, cfg["betas"], rescale)
        _write_json(Path(str(out) + ".sweep.json"), {
            "rescale": rescale,
            "sweep": [
                {
                    "beta": row.beta,
                    "selected": {
                        img: {
                            "text": cand.text,
                            "score": cand.score,
                            "log_p_listener": cand.log_p_listener,
                            "log_p_speaker": cand.log_p_speaker,
                        }
                        for img, cand in sorted(row.selected.items())
                    },
                }
                for row in rows
            ],
        }, header)
        # the sweep leaves sets ranked at its last beta; restore the main one
        for cs in sets:
            rerank(cs, config)
        save_candidate_sets(sets, out, header=header)
    return 0


def _cmd_eval(cfg: Dict[str, Any]) -> int:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    header = _header("eval", cfg)
    generations = load_generations(cfg["generations"])
    refs = None
    if cfg["refs"]:
        refs = _load_corpus(cfg["refs"], cfg["strict"]).corpus
    texts = EmbeddingTable.load(cfg["text_emb"]) if cfg["text_emb"] else None
    images = EmbeddingTable.load(cfg["img_emb"]) if cfg["img_emb"] else None
    clf = None
    if cfg["clf"]:
        model = load_model(cfg["clf"])
        if not isinstance(model, TextEmotionClassifier):
            raise DataFormatError("--clf must name a text classifier, not a probe")
        clf = model
    majority = analysis.majority_labels(refs) if refs is not None else None
    train_tokens = None
    if cfg["train_annotations"]:
        train_tokens = [
            r.tokens
            for r in _load_corpus(cfg["train_annotations"], cfg["strict"]).corpus.records
        ]
    elif refs is not None:
        train_tokens = [r.tokens for r in refs.records]
    similes = load_default_lexicons(similes_path=cfg["simile_phrases"]).similes
    report = evaluate_all(
        generations,
        references=refs,
        text_embeddings=texts,
        image_embeddings=images,
        clf=clf,
        majority=majority,
        similes=similes,
        training_tokens=train_tokens,
        config=MetricConfig(
            smoothing=not cfg["no_smoothing"],
            lcs_sample_size=cfg["lcs_sample"],
            lcs_seed=cfg["seed"],
        ),
    )
    name = Path(cfg["generations"]).stem
    _write_json(out / "report.json", report.as_dict(), header)
    csv_path = out / "report.csv"
    with _open_csv(csv_path, header):
        pass  # header comment first, then the table below
    with open(csv_path, "a", newline="", encoding="utf-8") as fh:
        from .metrics import REPORT_COLUMNS
        writer = csv.writer(fh)
        writer.writerow(["set"] + list(REPORT_COLUMNS))
        writer.writerow([name] + [
            "" if report.values.get(c) is None else f"{report.values[c]:.4f}"
            for c in REPORT_COLUMNS
        ])
    for key in ("bleu_1", "rouge_l", "clipscore", "unique_pct"):
        value = report.values.get(key)
        if value is not None:
            _log(f"{key} = {value:.3f}")
    return 0


def _cmd_report(cfg: Dict[str, Any]) -> int:
    paths = [p for p in str(cfg["inputs"]).split(",") if p]
    if not paths:
        raise UsageError("report: --inputs is empty")
    names = str(cfg["names"]).split(",") if cfg["names"] else [Path(p).stem for p in paths]
    if len(names) != len(paths):
        raise UsageError("report: --names count must match --inputs")
    rows = []
    for name, p in zip(names, paths):
        path = Path(p)
        if not path.exists():
            raise DataFormatError(f"report input not found: {path}")
        doc = json.loads(path.read_text(encoding="utf-8"))
        if "values" not in doc:
            raise DataFormatError(f"{path}: not an eval report")
        rows.append((name, MetricReport(
            values=doc["values"], support=doc.get("support", {}),
            config=doc.get("config", {}),
        )))
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    reports_to_csv(rows, out)
    # prepend the header comment; reports_to_csv writes a bare table
    body = out.read_text(encoding="utf-8")
    out.write_text("# " + json.dumps(_header("report", cfg), sort_keys=True)
                   + "\n" + body, encoding="utf-8")
    return 0


_HANDLERS = {
    "ingest": _cmd_ingest,
    "analyze": _cmd_analyze,
    "train-text-clf": _cmd_train_text_clf,
    "train-image-probe": _cmd_train_image_probe,
    "listen": _cmd_listen,
    "rerank": _cmd_rerank,
    "eval": _cmd_eval,
    "report": _cmd_report,
}


def _build_parser() -> _Parser:
    parser = _Parser(prog="affectcap",
                     description="affective explanation captioning toolkit")
    parser.add_argument("--version", action="version",
                        version=f"affectcap {__version__}")
    sub = parser.add_subparsers(dest="command")
    for name, spec in COMMANDS.items():
        p = sub.add_parser(name, help=spec["help"], description=spec["help"])
        for opt in spec["opts"]:
            if opt.is_flag:
                p.add_argument(opt.flag, dest=opt.dest, action="store_const",
                               const=True, default=_UNSET, help=opt.help)
            else:
                p.add_argument(opt.flag, dest=opt.dest, default=_UNSET,
                               help=opt.help)
    return parser


def _help_json() -> str:
    doc = {
        "tool": "affectcap",
        "version": __version__,
        "commands": {
            name: {
                "help": spec["help"],
                "options": [
                    {
                        "flag": opt.flag,
                        "default": opt.default,
                        "required": opt.required,
                        "is_flag": opt.is_flag,
                        "help": opt.help,
                    }
                    for opt in spec["opts"]
                ],
            }
            for name, spec in COMMANDS.items()
        },
    }
    return json.dumps(doc, sort_keys=True, indent=1)


def run(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if "--help-json" in argv:
        print(_help_json())
        return 0
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("no command given (see --help)")
        spec = COMMANDS[args.command]
        cfg = _resolve(args.command, args, spec["opts"])
        return _HANDLERS[args.command](cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except AffectcapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse --help
        code = exc.code
        return int(code) if isinstance(code, int) else 0


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
