"""Command-line pipeline: ingest -> chunk -> parse-citations -> build-queries
-> index -> search -> eval, plus the generation-set and quote-retrieval
paths.  Every subcommand writes a manifest recording its config hash, input
hashes, and counts, so identical runs produce byte-identical artifacts.

Exit codes: 0 success, 1 usage or config error, 2 data error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import citations, corpus, genset, metrics, queries, retrieval

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


# Config file keys (TOML-like "key = value" lines); flags override these.
CONFIG_KEYS = {
    "window": int,
    "stride": int,
    "query_window": int,
    "bm25_k1": float,
    "bm25_b": float,
    "ngram_n": int,
    "seed": int,
    "salient_k": int,
    "word_budget": int,
    "per_doc": int,
    "threads": int,
    "shards": int,
    "include_references_in_substring_check": bool,
}


def load_config_file(path) -> dict:
    """Parse flat "key = value" lines; '#' starts a comment.  Unknown keys
    and unparseable values are configuration errors."""
    out = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip().strip('"')
            if key not in CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            caster = CONFIG_KEYS[key]
            try:
                if caster is bool:
                    if value.lower() not in ("true", "false", "1", "0"):
                        raise ValueError(value)
                    out[key] = value.lower() in ("true", "1")
                else:
                    out[key] = caster(value)
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {value!r}")
    _validate_config(out)
    return out


def _validate_config(cfg: dict) -> None:
    for key, value in cfg.items():
        if isinstance(value, bool):
            continue
        if key == "seed":
            if value < 0:
                raise ConfigError(f"config key 'seed' must be non-negative, got {value}")
            continue
        if isinstance(value, (int, float)) and value <= 0:
            raise ConfigError(f"config key {key!r} must be positive, got {value}")


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(out_path, command: str, config: dict, inputs: list, counts: dict) -> None:
    manifest = {
        "command": command,
        "config": {k: config[k] for k in sorted(config)},
        "config_hash": hashlib.sha256(
            json.dumps(config, sort_keys=True).encode("utf-8")
        ).hexdigest(),
        "inputs": {Path(p).name: _sha256(p) for p in inputs},
        "counts": {k: counts[k] for k in sorted(counts)},
    }
    with open(out_path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


class OutputSet:
    """Declared output files, removed as a group if the command fails."""

    def __init__(self):
        self.paths: list[Path] = []

    def declare(self, path) -> Path:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        self.paths.append(p)
        return p

    def discard_all(self) -> None:
        for p in self.paths:
            try:
                p.unlink()
            except FileNotFoundError:
                pass


def _load_corpus_file(path) -> list[corpus.CaseDocument]:
    try:
        return corpus.read_corpus_jsonl(path)
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"cannot read corpus {path}: {exc}")


def _reporters(args) -> citations.ReporterTable:
    return citations.load_reporter_table(getattr(args, "reporters", None))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_ingest(args, cfg, out: OutputSet) -> dict:
    docs, diagnostics = corpus.load_corpus_jsonl(args.input)
    if not docs:
        raise DataError(f"no loadable records in {args.input}")
    n = corpus.write_corpus_jsonl(docs, out.declare(args.output))
    for d in diagnostics:
        print(f"rejected: {d}", file=sys.stderr)
    return {"documents": n, "rejected": len(diagnostics)}


def cmd_chunk(args, cfg, out: OutputSet) -> dict:
    docs = _load_corpus_file(args.input)
    window = cfg.get("window", corpus.DEFAULT_WINDOW)
    stride = cfg.get("stride", corpus.DEFAULT_STRIDE)
    passages = []
    for doc in docs:
        passages.extend(corpus.chunk_document(doc, window, stride))
    n = corpus.write_passages_jsonl(passages, out.declare(args.output))
    return {"documents": len(docs), "passages": n, "window": window, "stride": stride}


def cmd_parse_citations(args, cfg, out: OutputSet) -> dict:
    docs = _load_corpus_file(args.input)
    table = _reporters(args)
    rows = []
    quote_rows = []
    counts = {"case": 0, "statute": 0, "short-form": 0, "quotes": 0}
    for doc in docs:
        spans = citations.find_citations(doc.text, table)
        for span in spans:
            rows.append((doc.doc_id, span))
            counts[span.kind] += 1
        if args.quotes_out:
            for i, quote in enumerate(citations.extract_direct_quotes(doc.text, spans, table)):
                paired = quote.paired_citation
                quote_rows.append(
                    {
                        "query_id": f"{doc.doc_id}:q{i}",
                        "doc_id": doc.doc_id,
                        "quote": quote.text,
                        "paired_key": str(paired.key) if paired and paired.key else None,
                    }
                )
                counts["quotes"] += 1
    citations.write_citations_jsonl(rows, out.declare(args.output))
    if args.quotes_out:
        with open(out.declare(args.quotes_out), "w", encoding="utf-8") as f:
            for row in quote_rows:
                f.write(json.dumps(row, ensure_ascii=False) + "\n")
    if args.labeled_sample:
        samples = [obj for _, obj in corpus.iter_jsonl(args.labeled_sample)]
        accuracy, n = citations.sentence_extraction_accuracy(samples, table)
        counts["labeled_samples"] = n
        counts["sentence_extraction_accuracy"] = round(accuracy, 4)
        print(f"sentence extraction accuracy: {accuracy:.3f} on {n} labeled samples")
    return counts


def _parse_views(value: str) -> list[str]:
    views = [v.strip() for v in value.split(",") if v.strip()]
    for v in views:
        if v not in (queries.VIEW_SINGLE_REMOVED, queries.VIEW_ALL_REMOVED):
            raise ConfigError(f"unknown view {v!r}")
    return views


def cmd_build_queries(args, cfg, out: OutputSet) -> dict:
    docs = _load_corpus_file(args.input)
    table = _reporters(args)
    views = _parse_views(args.view)
    kinds = None
    if args.kind != "both":
        kinds = [args.kind]
    window = cfg.get("query_window", queries.DEFAULT_QUERY_WINDOW)
    built, qrels, report = queries.build_queries(
        docs, views=views, kinds=kinds, window_words=window, reporters=table
    )
    queries.write_queries_jsonl(built, out.declare(args.output))
    queries.write_qrels(qrels, out.declare(args.qrels))
    counts = dict(report.to_dict())
    if args.passage_qrels:
        passages_by_doc: dict[str, list[str]] = {}
        window_w = cfg.get("window", corpus.DEFAULT_WINDOW)
        stride_w = cfg.get("stride", corpus.DEFAULT_STRIDE)
        for doc in docs:
            passages_by_doc[doc.doc_id] = [
                p.passage_id for p in corpus.chunk_document(doc, window_w, stride_w)
            ]
        pq = queries.passage_qrels(qrels, passages_by_doc)
        queries.write_qrels(pq, out.declare(args.passage_qrels))
        counts["passage_qrels"] = len(pq)
    counts["queries"] = len(built)
    counts["window_words"] = window
    return counts


def cmd_sweep_lengths(args, cfg, out: OutputSet) -> dict:
    docs = _load_corpus_file(args.input)
    table = _reporters(args)
    lengths = [int(x) for x in args.lengths.split(",")]
    if any(n <= 0 for n in lengths):
        raise ConfigError("lengths must be positive")
    key_index, _ = queries.build_corpus_key_index(docs, table)
    all_queries = []
    qrels = []
    for doc in docs:
        spans = citations.find_citations(doc.text, table)
        for central in spans:
            if central.key is None or central.kind == citations.KIND_STATUTE:
                continue
            swept = queries.sweep_query_length(doc, central, lengths, reporters=table)
            for q in swept:
                target = queries.resolve_target(q.target_keys, key_index)
                if target is None or target == doc.doc_id:
                    continue
                all_queries.append(q)
                qrels.append(queries.QrelsEntry(q.query_id, target, 1))
    queries.write_queries_jsonl(all_queries, out.declare(args.output))
    queries.write_qrels(qrels, out.declare(args.qrels))
    return {"queries": len(all_queries), "lengths": len(lengths)}


def cmd_build_genset(args, cfg, out: OutputSet) -> dict:
    docs = _load_corpus_file(args.input)
    table = _reporters(args)
    instances, diagnostics = genset.build_genset(
        docs,
        seed=cfg.get("seed", 0),
        per_doc=cfg.get("per_doc", 1),
        salient_k=cfg.get("salient_k", genset.DEFAULT_SALIENT_K),
        word_budget=cfg.get("word_budget", genset.DEFAULT_WORD_BUDGET),
        reporters=table,
    )
    genset.write_genset_jsonl(instances, out.declare(args.output))
    for d in diagnostics:
        print(f"skipped: {d}", file=sys.stderr)
    return {"instances": len(instances), "skipped": len(diagnostics)}


def cmd_index(args, cfg, out: OutputSet) -> dict:
    if args.unit == "passage":
        units = retrieval.passages_to_units(corpus.read_passages_jsonl(args.input))
    else:
        units = retrieval.documents_to_units(_load_corpus_file(args.input))
    if not units:
        raise DataError(f"no units in {args.input}")
    index = retrieval.build_index(units, unit_kind=args.unit, shards=cfg.get("shards", 1))
    retrieval.save_index(index, out.declare(args.output))
    return {"units": index.n_units, "vocabulary": index.vocabulary_size, "unit_kind": args.unit}


def cmd_search(args, cfg, out: OutputSet) -> dict:
    try:
        index = retrieval.load_index(args.index)
    except retrieval.IndexFormatError as exc:
        raise DataError(str(exc))
    rows = queries.read_queries_jsonl(args.queries)
    k1 = cfg.get("bm25_k1", retrieval.BM25_K1)
    b = cfg.get("bm25_b", retrieval.BM25_B)
    runs = []
    for row in rows:
        ranked = retrieval.bm25_search(
            index, row["masked_text"], args.k, k1=k1, b=b, query_id=row["query_id"]
        )
        if args.maxp:
            ranked = retrieval.aggregate_maxp(ranked, k=args.k)
        runs.append(ranked)
    tag = "bm25-maxp" if args.maxp else "bm25"
    n = retrieval.write_trec_run(runs, out.declare(args.output), tag=tag)
    return {"queries": len(runs), "rows": n, "k": args.k, "tag": tag}


def cmd_search_quotes(args, cfg, out: OutputSet) -> dict:
    if args.unit == "passage":
        units = retrieval.passages_to_units(corpus.read_passages_jsonl(args.corpus))
    else:
        units = retrieval.documents_to_units(_load_corpus_file(args.corpus))
    rows = [obj for _, obj in corpus.iter_jsonl(args.quotes)]
    n = cfg.get("ngram_n", args.n)
    runs = []
    empty = 0
    if args.mode == "ngram":
        ngram_index = retrieval.NgramIndex(units, n)
        for row in rows:
            runs.append(
                retrieval.ngram_search(ngram_index, row["quote"], n, args.k, query_id=row["query_id"])
            )
    else:
        for row in rows:
            try:
                hits = retrieval.exact_match_search(units, row["quote"])
            except ValueError:
                empty += 1
                continue
            entries = tuple(
                retrieval.RankedEntry(unit_id=u, score=1.0, rank=r)
                for r, u in enumerate(hits[: args.k], 1)
            )
            runs.append(retrieval.RankedList(query_id=row["query_id"], entries=entries, k=args.k))
    rows_written = retrieval.write_trec_run(runs, out.declare(args.output), tag=f"{args.mode}-{n}")
    return {"quotes": len(rows), "rows": rows_written, "rejected_empty": empty, "mode": args.mode}


def cmd_eval_retrieval(args, cfg, out: OutputSet) -> dict:
    run = retrieval.read_trec_run(args.run)
    qrels = queries.read_qrels(args.qrels)
    if not qrels:
        raise DataError(f"no positive judgments in {args.qrels}")
    ks = [int(x) for x in args.k.split(",")]
    ranked = {qid: [unit for unit, _, _ in rows] for qid, rows in run.items()}
    report = metrics.evaluate_run(ranked, qrels, ks=ks)
    with open(out.declare(args.output), "w", encoding="utf-8") as f:
        f.write(report.to_json(indent=2) + "\n")
    print(_format_table(report.macro))
    return {
        "queries_scored": len(report.per_query),
        **{k: round(v, 6) for k, v in report.macro.items()},
        **report.skipped,
    }


def cmd_eval_generation(args, cfg, out: OutputSet) -> dict:
    table = _reporters(args)
    instances = genset.read_genset_jsonl(args.genset, table)
    gens = [obj for _, obj in corpus.iter_jsonl(args.generations)]
    include_refs = cfg.get("include_references_in_substring_check", False)
    report = metrics.score_generation_run(
        instances, gens, include_references_in_substring_check=include_refs, reporters=table
    )
    result = report.to_dict()
    if args.compare:
        other = [obj for _, obj in corpus.iter_jsonl(args.compare)]
        other_report = metrics.score_generation_run(
            instances, other, include_references_in_substring_check=include_refs, reporters=table
        )
        result["gain_over_compare"] = metrics.compare_runs(report, other_report)
    with open(out.declare(args.output), "w", encoding="utf-8") as f:
        json.dump(result, f, indent=2, sort_keys=True)
        f.write("\n")
    print(_format_table(report.macro))
    return {
        "instances_scored": len(report.per_query),
        **{k: round(v, 6) for k, v in report.macro.items()},
        **report.skipped,
    }


def cmd_density(args, cfg, out: OutputSet) -> dict:
    docs = _load_corpus_file(args.input)
    table = _reporters(args)
    profile = genset.citation_density_profile(docs, table)
    payload = {
        "decile_densities": list(profile.decile_densities),
        "decile_words": list(profile.decile_words),
        "decile_citations": list(profile.decile_citations),
    }
    with open(out.declare(args.output), "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")
    return {"documents": len(docs), "total_words": sum(profile.decile_words)}


def cmd_stats(args, cfg, out: OutputSet) -> dict:
    docs = _load_corpus_file(args.input)
    rows = [("documents", len(docs), _avg(d.word_count() for d in docs))]
    if args.passages:
        passages = corpus.read_passages_jsonl(args.passages)
        rows.append(("passages", len(passages), _avg(p.word_end - p.word_start for p in passages)))
    if args.queries:
        qrows = queries.read_queries_jsonl(args.queries)
        rows.append(
            ("queries", len(qrows), _avg(len(corpus.tokenize_words(r["masked_text"])) for r in qrows))
        )
    if args.genset:
        insts = genset.read_genset_jsonl(args.genset)
        rows.append(
            ("generation", len(insts), _avg(len(corpus.tokenize_words(i.prompt_with_refs)) for i in insts))
        )
    print(f"{'collection':<12} {'count':>10} {'avg words':>10}")
    for name, count, avg in rows:
        print(f"{name:<12} {count:>10} {avg:>10.1f}")
    return {name: count for name, count, _ in rows}


def _avg(values) -> float:
    values = list(values)
    return sum(values) / len(values) if values else 0.0


def _format_table(macro: dict) -> str:
    keys = sorted(macro)
    header = "  ".join(f"{k:>12}" for k in keys)
    values = "  ".join(f"{macro[k]:>12.4f}" for k in keys)
    return header + "\n" + values


# ---------------------------------------------------------------------------
# Parser wiring
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="casebench",
        description="Corpus-to-benchmark toolkit for case-law retrieval and generation evaluation.",
    )
    parser.add_argument("--config", help="TOML-like key=value config file")
    parser.add_argument("--seed", type=int, help="seed for sampled artifacts")
    parser.add_argument("--threads", type=int, default=1, help="accepted for compatibility; work is deterministic")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="normalize raw case records into a corpus file")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("chunk", help="split documents into overlapping passages")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--window", type=int, dest="window")
    p.add_argument("--stride", type=int, dest="stride")
    p.set_defaults(func=cmd_chunk)

    p = sub.add_parser("parse-citations", help="dump citation spans per document")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--reporters", help="reporter table JSON")
    p.add_argument("--quotes-out", help="also dump paired direct quotes")
    p.add_argument("--labeled-sample", help="labeled sentence-bounds JSONL; reports accuracy")
    p.set_defaults(func=cmd_parse_citations)

    p = sub.add_parser("build-queries", help="construct masked queries and qrels")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("qrels")
    p.add_argument("--view", default="single-removed", help="comma list: single-removed,all-removed")
    p.add_argument("--kind", default="both", choices=["direct", "indirect", "both"])
    p.add_argument("--window-words", type=int, dest="query_window")
    p.add_argument("--passage-qrels", help="also derive passage-level qrels")
    p.add_argument("--reporters")
    p.set_defaults(func=cmd_build_queries)

    p = sub.add_parser("sweep-lengths", help="build queries across window lengths")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("qrels")
    p.add_argument("--lengths", default=",".join(str(n) for n in queries.SWEEP_LENGTHS))
    p.add_argument("--reporters")
    p.set_defaults(func=cmd_sweep_lengths)

    p = sub.add_parser("build-genset", help="build generation instances with prompts")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--seed", type=int, dest="seed")
    p.add_argument("--per-doc", type=int, dest="per_doc")
    p.add_argument("--salient-k", type=int, dest="salient_k")
    p.add_argument("--word-budget", type=int, dest="word_budget")
    p.add_argument("--reporters")
    p.set_defaults(func=cmd_build_genset)

    p = sub.add_parser("index", help="build a BM25 inverted index")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--unit", default="passage", choices=["passage", "document"])
    p.add_argument("--shards", type=int, dest="shards")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("search", help="BM25 search over an index, TREC run output")
    p.add_argument("index")
    p.add_argument("queries")
    p.add_argument("output")
    p.add_argument("--k", type=int, default=1000)
    p.add_argument("--maxp", action="store_true", help="aggregate passage scores to documents")
    p.add_argument("--bm25-k1", type=float, dest="bm25_k1")
    p.add_argument("--bm25-b", type=float, dest="bm25_b")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("search-quotes", help="n-gram or exact retrieval with quotes")
    p.add_argument("corpus")
    p.add_argument("quotes")
    p.add_argument("output")
    p.add_argument("--unit", default="passage", choices=["passage", "document"])
    p.add_argument("--mode", default="ngram", choices=["ngram", "exact"])
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--k", type=int, default=1000)
    p.set_defaults(func=cmd_search_quotes)

    p = sub.add_parser("eval-retrieval", help="Recall@k / nDCG@k on a TREC run")
    p.add_argument("run")
    p.add_argument("qrels")
    p.add_argument("--k", default="10,100,1000")
    p.add_argument("--output", default="retrieval_report.json")
    p.set_defaults(func=cmd_eval_retrieval)

    p = sub.add_parser("eval-generation", help="ROUGE and citation metrics on generations")
    p.add_argument("genset")
    p.add_argument("generations")
    p.add_argument("--compare", help="second generations file for paired gains")
    p.add_argument("--output", default="generation_report.json")
    p.add_argument("--include-references-in-substring-check", action="store_true",
                   dest="include_references_in_substring_check")
    p.add_argument("--reporters")
    p.set_defaults(func=cmd_eval_generation)

    p = sub.add_parser("density", help="citation density per paragraph decile")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--reporters")
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("stats", help="collection counts and average lengths")
    p.add_argument("input")
    p.add_argument("--passages")
    p.add_argument("--queries")
    p.add_argument("--genset")
    p.set_defaults(func=cmd_stats)

    return parser


def _gather_config(args) -> dict:
    cfg: dict = {}
    if args.config:
        cfg.update(load_config_file(args.config))
    # Flags override the config file.
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if args.seed is not None:
        cfg["seed"] = args.seed
    if getattr(args, "include_references_in_substring_check", False):
        cfg["include_references_in_substring_check"] = True
    _validate_config(cfg)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = OutputSet()
    try:
        cfg = _gather_config(args)
        counts = args.func(args, cfg, out)
    except ConfigError as exc:
        out.discard_all()
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        out.discard_all()
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, ValueError, KeyError) as exc:
        out.discard_all()
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    if out.paths:
        manifest_path = out.paths[0].with_suffix(out.paths[0].suffix + ".manifest.json")
        inputs = [
            p
            for p in (
                getattr(args, "input", None),
                getattr(args, "index", None),
                getattr(args, "queries", None),
                getattr(args, "corpus", None),
                getattr(args, "quotes", None),
                getattr(args, "run", None),
                getattr(args, "qrels", None) if args.command == "eval-retrieval" else None,
                getattr(args, "genset", None) if args.command == "eval-generation" else None,
                getattr(args, "generations", None),
            )
            if p is not None and Path(p).exists()
        ]
        write_manifest(manifest_path, args.command, cfg, inputs, counts)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
