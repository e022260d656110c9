"""Bundled mini-corpus: three dozen hand-written synthetic cases covering
the citation forms the toolkit must handle (parallel reporters, pincite
ranges, Id./supra/at-page short forms, statutes, curly-quoted extracts,
spacing variants).  Used by the test suite and the docs walkthrough."""

from __future__ import annotations

from importlib import resources

from .corpus import CaseDocument, load_corpus
import json


def mini_corpus_path():
    return resources.files("casebench.data").joinpath("mini_corpus.jsonl")


def load_mini_corpus() -> list[CaseDocument]:
    raw = mini_corpus_path().read_text("utf-8")
    records = [json.loads(line) for line in raw.splitlines() if line.strip()]
    docs, diagnostics = load_corpus(records)
    if diagnostics:
        raise RuntimeError(f"bundled corpus failed to load cleanly: {diagnostics}")
    return docs
