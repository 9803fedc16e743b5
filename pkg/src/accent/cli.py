"""Command-line entry point: ``accent <subcommand> ...``.

Exit codes: 0 success, 1 some samples failed, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import __version__
from .backends import (
    EndpointEmbedder,
    EndpointGenerator,
    HashEmbedder,
    ScriptedGenerator,
    Seq2SeqGenerator,
    SentenceTransformerEmbedder,
)
from .compatibility import CompatibilityConfig, compatibility_score, neural_tuple_score, query_tails
from .core import ScoredResponse
from .data_io import (
    HEADER_KEY,
    CorpusFilterConfig,
    dumps,
    filter_corpus,
    iter_jsonl,
    load_annotations,
    load_dialogues,
    load_gold_tuples,
    load_kb,
    load_labeled_triples,
    tuple_to_json,
)
from .errors import AccentError, BackendError, LoadError
from .extraction import ExtractionConfig, LocalityFilter, extract_tuples, prepare_training_examples
from .metrics import (
    SUBSET_RELATIONS,
    bleu2,
    embedding_similarity_eval,
    extraction_f1,
    grouped_auc,
    iaa,
    pearson,
    spearman,
    system_ranking,
    tuple_to_text,
)
from .pipeline import LocalityPolicy, PipelineConfig, dumps_scored, score_corpus
from .search import build_concept_set, search_tuples

log = logging.getLogger("accent")

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2
MODEL_DIR_ENV = "ACCENT_MODEL_DIR"


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    backend: str = "mock"
    extractor: Optional[str] = None
    cskb: Optional[str] = None
    embedder: Optional[str] = None
    mock_script: Optional[dict] = None
    seed: int = 0
    parallelism: int = 1
    beam_size: int = 10
    max_history: int = 4
    fallback_score: float = 0.5
    locality_policy: str = "ScoreAll"
    min_response_words: int = 5
    require_non_interrogative: bool = True
    device: str = "cpu"

    def pipeline_config(self) -> PipelineConfig:
        return PipelineConfig(
            extraction=ExtractionConfig(max_history=self.max_history),
            compatibility=CompatibilityConfig(beam_size=self.beam_size),
            fallback_score=self.fallback_score,
            locality_policy=LocalityPolicy(self.locality_policy),
        )

    def filter_config(self) -> CorpusFilterConfig:
        return CorpusFilterConfig(self.min_response_words, self.require_non_interrogative, self.max_history)

    def config_hash(self) -> str:
        # parallelism never changes results, so it stays out of the hash
        data = {k: v for k, v in dataclasses.asdict(self).items() if k != "parallelism"}
        return hashlib.sha256(dumps(data).encode("utf-8")).hexdigest()[:16]

    def header(self, command: str) -> dict:
        return {"command": command, "config_hash": self.config_hash(), "seed": self.seed,
                "tool_version": __version__}


_CONFIG_FIELDS = {f.name for f in dataclasses.fields(RunConfig)}


def resolve_config(args) -> RunConfig:
    values = {}
    if args.config:
        try:
            values = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(values, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(values) - _CONFIG_FIELDS
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for name in _CONFIG_FIELDS:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    if isinstance(values.get("mock_script"), str):
        try:
            values["mock_script"] = json.loads(Path(values["mock_script"]).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read mock script: {exc}") from None
    cfg = RunConfig(**values)
    if cfg.backend not in ("mock", "real", "endpoint"):
        raise UsageError(f"unknown backend {cfg.backend!r}")
    if cfg.parallelism < 1:
        raise UsageError("--parallelism must be >= 1")
    return cfg


@dataclass
class Backends:
    extractor: object
    cskb: object
    embedder: object


def _cskb_mock_default(query):
    return ["none"]


def build_backends(cfg: RunConfig, need=("extractor", "cskb", "embedder")) -> Backends:
    if cfg.backend == "mock":
        script = cfg.mock_script or {}
        strict = bool(script.get("strict", False))
        losses = {(e["source"], e["target"]): e["loss"] for e in script.get("losses", [])}
        return Backends(
            ScriptedGenerator(script.get("extractor"), strict=strict, default=["None"]),
            ScriptedGenerator(script.get("cskb"), strict=strict, default=_cskb_mock_default,
                              target_losses=losses),
            HashEmbedder(int(script.get("embedding_dim", 64))),
        )
    model_dir = os.environ.get(MODEL_DIR_ENV)
    paths = {}
    for name, sub in (("extractor", "extractor"), ("cskb", "cskb"), ("embedder", "embedder")):
        value = getattr(cfg, name)
        if value is None and model_dir:
            value = str(Path(model_dir) / sub)
        if value is None and name in need:
            raise UsageError(f"no {name} given (use --{name} or set {MODEL_DIR_ENV})")
        paths[name] = value
    built = {}
    try:
        for name in need:
            if cfg.backend == "endpoint":
                obj = EndpointEmbedder(paths[name]) if name == "embedder" else EndpointGenerator(paths[name])
                obj.check()
            elif name == "embedder":
                obj = SentenceTransformerEmbedder(paths[name], device=cfg.device)
            else:
                obj = Seq2SeqGenerator(paths[name], device=cfg.device)
            built[name] = obj
    except BackendError as exc:
        raise UsageError(f"backend unavailable: {exc}") from None
    return Backends(built.get("extractor"), built.get("cskb"), built.get("embedder"))


class _Output:
    """Writes to ``--out`` or stdout."""

    def __init__(self, path):
        self.path = path

    def __enter__(self):
        if self.path is None or self.path == "-":
            self.fh = sys.stdout
        else:
            try:
                self.fh = open(self.path, "w", encoding="utf-8", newline="\n")
            except OSError as exc:
                raise UsageError(f"cannot write {self.path}: {exc.strerror}") from None
        return self.fh

    def __exit__(self, *exc):
        if self.fh is not sys.stdout:
            self.fh.close()


def _write_jsonl(path, header, lines):
    with _Output(path) as fh:
        fh.write(dumps({HEADER_KEY: header}) + "\n")
        for line in lines:
            fh.write(line + "\n")


def _write_report(args, cfg, command, setup, metrics, n, csv_rows=None, figures=None):
    report = {
        "header": cfg.header(command),
        "setup": setup,
        "metrics": metrics,
        "n": n,
        "config_hash": cfg.config_hash(),
    }
    with _Output(args.out) as fh:
        fh.write(json.dumps(report, indent=2, ensure_ascii=False) + "\n")
    if args.csv and csv_rows:
        with _Output(args.csv) as fh:
            fh.write(f"# config_hash={cfg.config_hash()} seed={cfg.seed} tool_version={__version__}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerows(csv_rows)
    if args.figures and figures:
        out_dir = Path(args.figures)
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, draw in figures.items():
            draw(out_dir / name)
    return report


def _load_dialogues_for(cfg, args):
    dialogues = load_dialogues(args.dialogues)
    if getattr(args, "filter", False):
        dialogues, rejected = filter_corpus(dialogues, cfg.filter_config())
        if rejected:
            log.info("filtered out %d dialogues", len(rejected))
    return dialogues


def cmd_score(args, cfg):
    dialogues = _load_dialogues_for(cfg, args)
    backends = build_backends(cfg)
    result = score_corpus(dialogues, backends.extractor, backends.cskb, backends.embedder,
                          cfg.pipeline_config(), cfg.parallelism)
    _write_jsonl(args.out, cfg.header("score"), (dumps_scored(e) for e in result.entries))
    summary = result.summary()
    text = json.dumps(summary, sort_keys=True)
    if args.summary:
        Path(args.summary).write_text(text + "\n", encoding="utf-8")
    print(text, file=sys.stderr if args.out in (None, "-") else sys.stdout)
    for failure in result.failures:
        log.error("%s: %s", failure.dialogue_id, failure.error)
    return EXIT_PARTIAL if result.failures else EXIT_OK


def cmd_extract(args, cfg):
    dialogues = _load_dialogues_for(cfg, args)
    backends = build_backends(cfg, need=("extractor",))
    extraction = cfg.pipeline_config().extraction
    lines, failures = [], 0
    for d in dialogues:
        try:
            tuples = extract_tuples(d, backends.extractor, extraction)
        except AccentError as exc:
            failures += 1
            log.error("%s: %s", d.id, exc)
            continue
        lines.extend(dumps(tuple_to_json(t, d.id)) for t in tuples)
    _write_jsonl(args.out, cfg.header("extract"), lines)
    return EXIT_PARTIAL if failures else EXIT_OK


def _load_scores(path):
    out = {}
    for lineno, obj in iter_jsonl(path):
        if "error" in obj:
            continue
        if not isinstance(obj.get("id"), str) or not isinstance(obj.get("score"), (int, float)):
            raise LoadError("score lines need 'id' and 'score'", lineno, path)
        out[obj["id"]] = ScoredResponse(obj["id"], float(obj["score"]), (), bool(obj.get("fallback")),
                                        obj.get("system"))
    return out


def cmd_eval_metric(args, cfg):
    from . import plotting

    scores = _load_scores(args.scores)
    annotations = {a.id: a for a in load_annotations(args.annotations)}
    ids = [i for i in scores if i in annotations]
    if len(ids) < 2:
        raise UsageError("fewer than two samples have both a score and an annotation")
    metric = [scores[i].score for i in ids]
    human = [annotations[i].mean for i in ids]
    metrics = {"pearson": pearson(metric, human), "spearman": spearman(metric, human)}
    raters = [annotations[i].scores for i in ids]
    if all(len(r) >= 2 for r in raters):
        metrics["iaa"] = iaa(raters)
    responses = [scores[i] for i in ids]
    metrics["fallback_rate"] = sum(r.used_fallback for r in responses) / len(responses)
    ranking = None
    if all(r.system is not None for r in responses):
        ranking = system_ranking(responses)
        metrics["system_ranking"] = [[name, mean] for name, mean in ranking]
        human_scored = [ScoredResponse(r.dialogue_id, annotations[r.dialogue_id].mean, (), False, r.system)
                        for r in responses]
        metrics["human_system_ranking"] = [[name, mean] for name, mean in system_ranking(human_scored)]
    rows = [["metric", "pearson", "spearman", "n"],
            [args.label, f"{metrics['pearson']:.4f}", f"{metrics['spearman']:.4f}", len(ids)]]
    figures = {"setup1_correlation.png": lambda p: plotting.correlation_scatter(
        metric, human, p, metrics["pearson"], metrics["spearman"], label=args.label)}
    if ranking:
        figures["setup1_system_ranking.png"] = lambda p: plotting.system_ranking_bars(ranking, p)
    _write_report(args, cfg, "eval-metric", 1, metrics, len(ids), rows, figures)
    return EXIT_OK


def _load_similarities(path):
    out = {}
    for lineno, obj in iter_jsonl(path):
        try:
            out[(obj["id"], obj["relation"])] = float(obj["similarity"])
        except (KeyError, TypeError, ValueError):
            raise LoadError("similarity lines need 'id', 'relation', 'similarity'", lineno, path) from None
    return out


def cmd_eval_extraction(args, cfg):
    from . import plotting

    pred = load_gold_tuples(args.pred)
    gold = load_gold_tuples(args.gold)
    prf = extraction_f1(pred, gold)
    cand_texts, ref_texts, bleus, keys = [], [], [], []
    for sid in sorted(set(pred) & set(gold)):
        for rel in sorted(SUBSET_RELATIONS):
            p = [t for t in pred[sid] if t.relation.value == rel]
            g = [tuple_to_text(t) for t in gold[sid] if t.relation.value == rel]
            if not p or not g:
                continue
            cand = tuple_to_text(p[0])
            bleus.append(bleu2(cand, g))
            # pair with the closest reference for the similarity column
            best_ref = max(g, key=lambda ref: bleu2(cand, [ref]))
            cand_texts.append(cand)
            ref_texts.append(best_ref)
            keys.append((sid, rel))
    metrics = {"precision": prf.precision, "recall": prf.recall, "f1": prf.f1,
               "matched_cells": len(keys)}
    if keys:
        metrics["bleu2"] = sum(bleus) / len(bleus)
        if args.similarity_file:
            external = _load_similarities(args.similarity_file)
            missing = [k for k in keys if k not in external]
            if missing:
                raise UsageError(f"similarity file lacks {len(missing)} matched cells, e.g. {missing[0]}")
            metrics["similarity"] = sum(external[k] for k in keys) / len(keys)
        else:
            embedder = build_backends(cfg, need=("embedder",)).embedder
            metrics["similarity"] = embedding_similarity_eval(cand_texts, ref_texts, embedder)
    rows = [["method", "precision", "recall", "f1", "bleu2", "similarity"],
            [args.label] + [f"{metrics[k]:.4f}" if k in metrics else "" for k in
                            ("precision", "recall", "f1", "bleu2", "similarity")]]
    shown = {k: metrics[k] for k in ("precision", "recall", "f1", "bleu2", "similarity") if k in metrics}
    figures = {"setup2_extraction.png": lambda p: plotting.metric_bars(shown, p)}
    _write_report(args, cfg, "eval-extraction", 2, metrics, len(set(pred) | set(gold)), rows, figures)
    return EXIT_OK


def cmd_eval_compat(args, cfg):
    from . import plotting

    triples = load_labeled_triples(args.triples)
    if args.scores:
        values = [obj.get("score") for _, obj in iter_jsonl(args.scores)]
        if len(values) != len(triples) or not all(isinstance(v, (int, float)) for v in values):
            raise UsageError("--scores must hold one numeric 'score' per triple, in order")
        scores = [float(v) for v in values]
    else:
        need = ("cskb",) if args.scorer == "neural" else ("cskb", "embedder")
        backends = build_backends(cfg, need=need)
        comp = cfg.pipeline_config().compatibility
        scores = []
        for t in triples:
            if args.scorer == "neural":
                scores.append(neural_tuple_score(t.head, t.relation, t.tail, backends.cskb, comp))
            else:
                tails = query_tails(t.head, t.relation, backends.cskb, comp)
                scores.append(compatibility_score(t.tail, tails, backends.embedder, comp))
    pairs = list(zip(triples, scores))
    metrics = {"auc_all": grouped_auc(pairs)}
    try:
        metrics["auc_subset"] = grouped_auc(pairs, SUBSET_RELATIONS)
    except AccentError:
        metrics["auc_subset"] = None
    per_relation = {}
    for rel in sorted({t.relation for t in triples}):
        try:
            per_relation[rel] = grouped_auc(pairs, {rel})
        except AccentError:
            per_relation[rel] = None
    metrics["auc_per_relation"] = per_relation
    rels = sorted(per_relation)
    fmt = lambda v: "" if v is None else f"{v:.4f}"  # noqa: E731
    rows = [["method", "all", "subset"] + rels,
            [args.label, fmt(metrics["auc_all"]), fmt(metrics["auc_subset"])] + [fmt(per_relation[r]) for r in rels]]
    figures = {"setup3_roc.png": lambda p: plotting.roc_curve(scores, [t.label for t in triples], p,
                                                            metrics["auc_all"])}
    _write_report(args, cfg, "eval-compat", 3, metrics, len(triples), rows, figures)
    return EXIT_OK


def cmd_prepare_train(args, cfg):
    dialogues = load_dialogues(args.dialogues)
    gold = load_gold_tuples(args.gold)
    samples = [(d, gold.get(d.id, [])) for d in dialogues]
    locality = {"both": LocalityFilter.Both, "single": LocalityFilter.SingleOnly,
                "pair": LocalityFilter.PairOnly}[args.locality]
    result = prepare_training_examples(samples, cfg.pipeline_config().extraction, args.negatives, locality, cfg.seed)
    header = cfg.header("prepare-train")
    header.update(negatives_per_relation=args.negatives, locality=args.locality,
                  shortfall={r.value: n for r, n in result.shortfall.items() if n})
    _write_jsonl(args.out, header, (dumps(ex.to_json()) for ex in result.examples))
    if result.warnings:
        log.warning("%d relations had fewer negatives than requested", result.warnings)
    return EXIT_OK


def cmd_search_baseline(args, cfg):
    kb = load_kb(args.kb)
    dialogues = load_dialogues(args.dialogues)
    lines, counts = [], {}
    for d in dialogues:
        utterances = [d.response.text] + ([d.previous.text] if d.previous else [])
        found = search_tuples(kb, build_concept_set(utterances))
        counts[d.id] = len(found)
        lines.extend(dumps(tuple_to_json(t, d.id)) for t in found)
    _write_jsonl(args.out, cfg.header("search-baseline"), lines)
    counts_path = args.counts or (f"{args.out}.counts.json" if args.out not in (None, "-") else None)
    if counts_path:
        Path(counts_path).write_text(dumps({"header": cfg.header("search-baseline"), "counts": counts}) + "\n",
                                     encoding="utf-8")
    return EXIT_OK


def _common(p):
    p.add_argument("--config", help="JSON run configuration; flags override its values")
    p.add_argument("--seed", type=int)
    p.add_argument("--parallelism", type=int)
    p.add_argument("--backend", choices=("real", "mock", "endpoint"))
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--extractor", help="extractor model path or endpoint URL")
    p.add_argument("--cskb", help="dynamic knowledge-base model path or endpoint URL")
    p.add_argument("--embedder", help="sentence embedder path/name or endpoint URL")
    p.add_argument("--mock-script", dest="mock_script", help="JSON script for the mock backends")
    p.add_argument("--device")
    p.add_argument("-v", "--verbose", action="store_true")


def _report_flags(p, label):
    p.add_argument("--csv", help="also write a CSV table")
    p.add_argument("--figures", help="directory for PNG figures")
    p.add_argument("--label", default=label, help="row label in the CSV table")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="accent", description="Event commonsense scoring for dialogue responses.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score responses end to end")
    p.add_argument("dialogues")
    p.add_argument("--filter", action="store_true", help="apply the corpus filtering rules first")
    p.add_argument("--summary", help="write the summary JSON here as well")
    p.add_argument("--beam-size", dest="beam_size", type=int)
    p.add_argument("--max-history", dest="max_history", type=int)
    p.add_argument("--fallback-score", dest="fallback_score", type=float)
    p.add_argument("--locality-policy", dest="locality_policy", choices=[x.value for x in LocalityPolicy])
    _common(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("extract", help="extract event-relation tuples only")
    p.add_argument("dialogues")
    p.add_argument("--filter", action="store_true")
    p.add_argument("--max-history", dest="max_history", type=int)
    _common(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("eval-metric", help="correlation with human judgments")
    p.add_argument("--scores", required=True)
    p.add_argument("--annotations", required=True)
    _report_flags(p, "ACCENT")
    _common(p)
    p.set_defaults(func=cmd_eval_metric)

    p = sub.add_parser("eval-extraction", help="tuple extraction quality")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--similarity-file", help="externally computed per-cell similarities (e.g. BERTScore)")
    _report_flags(p, "ACCENT")
    _common(p)
    p.set_defaults(func=cmd_eval_extraction)

    p = sub.add_parser("eval-compat", help="tuple compatibility AUC")
    p.add_argument("--triples", required=True)
    p.add_argument("--scores", help="precomputed scores, one per triple")
    p.add_argument("--scorer", choices=("symbolic", "neural"), default="symbolic")
    p.add_argument("--beam-size", dest="beam_size", type=int)
    _report_flags(p, "ACCENT")
    _common(p)
    p.set_defaults(func=cmd_eval_compat)

    p = sub.add_parser("prepare-train", help="build extractor fine-tuning data")
    p.add_argument("--dialogues", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--locality", choices=("both", "single", "pair"), default="both")
    p.add_argument("--max-history", dest="max_history", type=int)
    _common(p)
    p.set_defaults(func=cmd_prepare_train)

    p = sub.add_parser("search-baseline", help="keyword search over a static knowledge base")
    p.add_argument("--kb", required=True)
    p.add_argument("--dialogues", required=True)
    p.add_argument("--counts", help="per-sample match counts (default: <out>.counts.json)")
    _common(p)
    p.set_defaults(func=cmd_search_baseline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return args.func(args, cfg)
    except (UsageError, LoadError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AccentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
