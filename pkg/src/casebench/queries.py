"""Build retrieval queries from documents: a context window centered on a
case citation whose sentence is masked, in two data views.

single-removed masks only the central citation sentence; all-removed
additionally strips every other case citation and short form from the
window.  Statute citations always stay.  The cited document is the query's
relevance target.
"""

from __future__ import annotations

import re
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .citations import (
    KIND_CASE,
    KIND_SHORT_FORM,
    CitationKey,
    CitationSpan,
    ReporterTable,
    citation_sentence_bounds,
    default_reporter_table,
    extract_direct_quotes,
    find_citations,
)
from .corpus import CaseDocument, tokenize_words

VIEW_SINGLE_REMOVED = "single-removed"
VIEW_ALL_REMOVED = "all-removed"
KIND_DIRECT = "direct"
KIND_INDIRECT = "indirect"

DEFAULT_QUERY_WINDOW = 300
SWEEP_LENGTHS = tuple(range(100, 1001, 100))

_VIEW_CODES = {VIEW_SINGLE_REMOVED: "sr", VIEW_ALL_REMOVED: "ar"}
_GAP_RE = re.compile(r"^[\s,]*$")


@dataclass(frozen=True)
class RetrievalQuery:
    """A masked context window with central-citation metadata.

    ``left_context`` + ``central_sentence`` + ``right_context`` reassemble
    the pre-mask window text; ``masked_text`` is the retrieval input and
    ``display_text`` shows a REDACTED marker where the sentence stood.
    """

    query_id: str
    doc_id: str
    left_context: str
    central_sentence: str
    right_context: str
    view: str
    kind: str
    masked_text: str
    display_text: str
    target_keys: tuple[CitationKey, ...]
    window_words: int


@dataclass(frozen=True)
class QrelsEntry:
    query_id: str
    unit_id: str
    relevance: int = 1


@dataclass
class QueryConstructionReport:
    """Tallies from a query-construction pass over a corpus."""

    centrals_considered: int = 0
    built: int = 0
    skipped_no_bounds: int = 0
    skipped_unresolvable: int = 0
    # single-removed queries whose window still carries short forms that may
    # refer to the masked case (Id., supra, at-page cites).
    residual_short_form_queries: int = 0

    @property
    def sentence_failure_rate(self) -> float:
        if self.centrals_considered == 0:
            return 0.0
        return self.skipped_no_bounds / self.centrals_considered

    def to_dict(self) -> dict:
        return {
            "centrals_considered": self.centrals_considered,
            "built": self.built,
            "skipped_no_bounds": self.skipped_no_bounds,
            "skipped_unresolvable": self.skipped_unresolvable,
            "residual_short_form_queries": self.residual_short_form_queries,
            "sentence_failure_rate": self.sentence_failure_rate,
        }


def _seam_join(*parts: str) -> str:
    pieces = [p.strip() for p in parts if p.strip()]
    return " ".join(pieces)


def _remove_spans(text: str, spans: Sequence[tuple[int, int]]) -> str:
    """Drop the given spans, collapsing each removal site to one space."""
    if not spans:
        return text
    out = []
    pos = 0
    for start, end in sorted(spans):
        out.append(text[pos:start])
        out.append("\x00")
        pos = end
    out.append(text[pos:])
    return re.sub(r"[ \t]*\x00[ \t]*", " ", "".join(out)).strip()


def _parallel_group(citations: Sequence[CitationSpan], central: CitationSpan, text: str) -> list[CitationSpan]:
    """The run of case citations joined to ``central`` by bare ", " gaps:
    parallel reporters for the same decision."""
    cases = [c for c in citations if c.kind == KIND_CASE]
    try:
        idx = next(i for i, c in enumerate(cases) if c.start == central.start and c.end == central.end)
    except StopIteration:
        return [central]
    lo = idx
    while lo > 0 and _GAP_RE.match(text[cases[lo - 1].end : cases[lo].start]) and "\n" not in text[cases[lo - 1].end : cases[lo].start]:
        lo -= 1
    hi = idx
    while (
        hi + 1 < len(cases)
        and _GAP_RE.match(text[cases[hi].end : cases[hi + 1].start])
        and "\n" not in text[cases[hi].end : cases[hi + 1].start]
    ):
        hi += 1
    return cases[lo : hi + 1]


def _word_index_at(word_starts: list[int], char_pos: int) -> int:
    """Index of the word containing or following char_pos."""
    return max(0, bisect_right(word_starts, char_pos) - 1)


def build_query(
    doc: CaseDocument,
    central: CitationSpan,
    window_words: int = DEFAULT_QUERY_WINDOW,
    view: str = VIEW_SINGLE_REMOVED,
    reporters: ReporterTable | None = None,
    doc_citations: Sequence[CitationSpan] | None = None,
) -> RetrievalQuery | None:
    """Build one query around ``central``; None when its sentence bounds
    cannot be found.

    The window takes window_words//2 words on each side of the citation
    start, truncated at document edges without rebalancing, then extends to
    cover the whole central sentence.
    """
    if view not in _VIEW_CODES:
        raise ValueError(f"unknown view {view!r}")
    if central.key is None:
        raise ValueError("central citation must carry a resolvable key")
    table = reporters or default_reporter_table()
    bounds = citation_sentence_bounds(doc.text, central)
    if bounds is None:
        return None
    sent_start, sent_end = bounds

    words = tokenize_words(doc.text)
    if not words:
        return None
    starts = [w.start for w in words]
    total = len(words)
    half = window_words // 2
    anchor = _word_index_at(starts, central.start)
    sw_start = _word_index_at(starts, sent_start)
    if words[sw_start].end <= sent_start and sw_start + 1 < total:
        sw_start += 1
    sw_end = _word_index_at(starts, max(sent_start, sent_end - 1)) + 1

    lo_w = min(max(0, anchor - half), sw_start)
    hi_w = max(min(total, anchor + half), sw_end)
    lo_c = words[lo_w].start
    hi_c = words[hi_w - 1].end

    left = doc.text[lo_c:sent_start]
    sentence = doc.text[sent_start:sent_end]
    right = doc.text[sent_end:hi_c]

    if doc_citations is None:
        doc_citations = find_citations(doc.text, table)
    if central.kind == KIND_CASE:
        group = _parallel_group(doc_citations, central, doc.text)
    else:
        # A short-form central targets its antecedent's parallel run, so a
        # qrels target can resolve through any of the antecedent's reporters.
        antecedent = next(
            (
                c
                for c in reversed(doc_citations)
                if c.kind == KIND_CASE and c.end <= central.start and c.key == central.key
            ),
            None,
        )
        group = _parallel_group(doc_citations, antecedent, doc.text) if antecedent else [central]
    target_keys: list[CitationKey] = []
    for span in group:
        if span.key is not None and span.key not in target_keys:
            target_keys.append(span.key)
    if central.key not in target_keys:
        target_keys.insert(0, central.key)

    window_citations = [
        c
        for c in doc_citations
        if lo_c <= c.start and c.end <= hi_c
    ]
    kind = _classify(doc.text, lo_c, hi_c, central, tuple(target_keys), window_citations, table)

    masked, display = _mask(
        doc.text, lo_c, hi_c, sent_start, sent_end, view, tuple(target_keys), window_citations
    )
    query_id = f"{doc.doc_id}:{central.start}:{_VIEW_CODES[view]}"
    return RetrievalQuery(
        query_id=query_id,
        doc_id=doc.doc_id,
        left_context=left,
        central_sentence=sentence,
        right_context=right,
        view=view,
        kind=kind,
        masked_text=masked,
        display_text=display,
        target_keys=tuple(target_keys),
        window_words=window_words,
    )


def _classify(
    text: str,
    lo_c: int,
    hi_c: int,
    central: CitationSpan,
    target_keys: tuple[CitationKey, ...],
    window_citations: Sequence[CitationSpan],
    table: ReporterTable,
) -> str:
    """direct iff some quote in the window pairs with the central citation
    (or a short form resolving to it)."""
    window_text = text[lo_c:hi_c]
    shifted = [
        CitationSpan(c.start - lo_c, c.end - lo_c, c.kind, c.raw, c.key) for c in window_citations
    ]
    for quote in extract_direct_quotes(window_text, citations=shifted, reporters=table):
        paired = quote.paired_citation
        if paired is None:
            continue
        if paired.start + lo_c == central.start and paired.end + lo_c == central.end:
            return KIND_DIRECT
        if paired.key is not None and paired.key in target_keys:
            return KIND_DIRECT
    return KIND_INDIRECT


def _mask(
    text: str,
    lo_c: int,
    hi_c: int,
    sent_start: int,
    sent_end: int,
    view: str,
    target_keys: tuple[CitationKey, ...],
    window_citations: Sequence[CitationSpan],
) -> tuple[str, str]:
    left = text[lo_c:sent_start]
    right = text[sent_end:hi_c]

    def spans_in(part_lo: int, part_hi: int) -> list[tuple[int, int]]:
        if view == VIEW_ALL_REMOVED:
            doomed = (KIND_CASE, KIND_SHORT_FORM)
            victims = [
                c for c in window_citations if c.kind in doomed and part_lo <= c.start and c.end <= part_hi
            ]
        else:
            # Residual full citations of the central case leak the target;
            # they go too, even in the single-removed view.
            victims = [
                c
                for c in window_citations
                if c.kind == KIND_CASE
                and c.key in target_keys
                and part_lo <= c.start
                and c.end <= part_hi
            ]
        return [(c.start - part_lo, c.end - part_lo) for c in victims]

    left_clean = _remove_spans(left, spans_in(lo_c, sent_start))
    right_clean = _remove_spans(right, spans_in(sent_end, hi_c))
    masked = _seam_join(left_clean, right_clean)
    display = _seam_join(left_clean, "REDACTED", right_clean)
    return masked, display


def apply_view(query: RetrievalQuery, view: str) -> str:
    """Masked text of an already-built query under the given view."""
    rebuilt = with_view(query, view)
    return rebuilt.masked_text


def with_view(query: RetrievalQuery, view: str) -> RetrievalQuery:
    """Re-derive a query variant under another data view."""
    if view not in _VIEW_CODES:
        raise ValueError(f"unknown view {view!r}")
    text = query.left_context + query.central_sentence + query.right_context
    sent_start = len(query.left_context)
    sent_end = sent_start + len(query.central_sentence)
    window_citations = find_citations(text)
    masked, display = _mask(
        text, 0, len(text), sent_start, sent_end, view, query.target_keys, window_citations
    )
    base_id = query.query_id.rsplit(":", 1)[0]
    return RetrievalQuery(
        query_id=f"{base_id}:{_VIEW_CODES[view]}",
        doc_id=query.doc_id,
        left_context=query.left_context,
        central_sentence=query.central_sentence,
        right_context=query.right_context,
        view=view,
        kind=query.kind,
        masked_text=masked,
        display_text=display,
        target_keys=query.target_keys,
        window_words=query.window_words,
    )


def classify_query(query: RetrievalQuery, reporters: ReporterTable | None = None) -> str:
    """direct | indirect from the query's pre-mask window text."""
    table = reporters or default_reporter_table()
    text = query.left_context + query.central_sentence + query.right_context
    citations = find_citations(text, table)
    for quote in extract_direct_quotes(text, citations=citations, reporters=table):
        paired = quote.paired_citation
        if paired is not None and paired.key is not None and paired.key in query.target_keys:
            return KIND_DIRECT
    return KIND_INDIRECT


# ---------------------------------------------------------------------------
# Corpus-level construction
# ---------------------------------------------------------------------------

def build_corpus_key_index(docs: Iterable[CaseDocument], reporters: ReporterTable | None = None) -> tuple[dict[CitationKey, str], list[str]]:
    """Map each document's own reporter citation to its doc id.

    Duplicate reporter cites keep the first-indexed document; conflicts are
    reported for the construction log.
    """
    from .citations import parse_citation_key, CitationError

    table = reporters or default_reporter_table()
    index: dict[CitationKey, str] = {}
    conflicts: list[str] = []
    for doc in docs:
        if not doc.reporter_cite:
            continue
        try:
            key = parse_citation_key(doc.reporter_cite, table)
        except CitationError:
            conflicts.append(f"{doc.doc_id}: unparseable reporter_cite {doc.reporter_cite!r}")
            continue
        if key in index:
            conflicts.append(f"{doc.doc_id}: reporter_cite {key} already maps to {index[key]}")
            continue
        index[key] = doc.doc_id
    return index, conflicts


def resolve_target(query_target_keys: Sequence[CitationKey], key_index: Mapping[CitationKey, str]) -> str | None:
    """First resolvable parallel key wins (recorded policy for qrels)."""
    for key in query_target_keys:
        if key in key_index:
            return key_index[key]
    return None


def emit_qrels(
    queries: Iterable[RetrievalQuery], key_index: Mapping[CitationKey, str]
) -> list[QrelsEntry]:
    """Doc-level qrels: one positive row per query, the document its central
    citation cites to.  Parallel keys resolving to the same document dedup
    to a single row; unresolvable queries emit nothing."""
    out = []
    for q in queries:
        target = resolve_target(q.target_keys, key_index)
        if target is not None:
            out.append(QrelsEntry(q.query_id, target, 1))
    return out


def build_queries(
    docs: Sequence[CaseDocument],
    views: Sequence[str] = (VIEW_SINGLE_REMOVED,),
    kinds: Sequence[str] | None = None,
    window_words: int = DEFAULT_QUERY_WINDOW,
    reporters: ReporterTable | None = None,
    key_index: Mapping[CitationKey, str] | None = None,
) -> tuple[list[RetrievalQuery], list[QrelsEntry], QueryConstructionReport]:
    """Construct all queries over a corpus, with doc-level qrels.

    Central candidates are full case citations plus short forms that
    resolve to a key; a query is emitted only when some parallel key
    resolves to a corpus document.
    """
    table = reporters or default_reporter_table()
    if key_index is None:
        key_index, _ = build_corpus_key_index(docs, table)
    report = QueryConstructionReport()
    queries: list[RetrievalQuery] = []
    qrels: list[QrelsEntry] = []
    for doc in docs:
        doc_citations = find_citations(doc.text, table)
        centrals = [
            c for c in doc_citations if c.key is not None and c.kind in (KIND_CASE, KIND_SHORT_FORM)
        ]
        for central in centrals:
            report.centrals_considered += 1
            base = build_query(
                doc, central, window_words, VIEW_SINGLE_REMOVED, table, doc_citations
            )
            if base is None:
                report.skipped_no_bounds += 1
                continue
            target_doc = resolve_target(base.target_keys, key_index)
            if target_doc is None or target_doc == doc.doc_id:
                report.skipped_unresolvable += 1
                continue
            leftover_shorts = [
                s for s in find_citations(base.masked_text, table) if s.kind == KIND_SHORT_FORM
            ]
            if leftover_shorts:
                report.residual_short_form_queries += 1
            for view in views:
                q = base if view == VIEW_SINGLE_REMOVED else with_view(base, view)
                if kinds is not None and q.kind not in kinds:
                    continue
                queries.append(q)
                qrels.append(QrelsEntry(q.query_id, target_doc, 1))
                report.built += 1
    return queries, qrels, report


def sweep_query_length(
    doc: CaseDocument,
    central: CitationSpan,
    lengths: Sequence[int] = SWEEP_LENGTHS,
    view: str = VIEW_SINGLE_REMOVED,
    reporters: ReporterTable | None = None,
) -> list[RetrievalQuery]:
    """One query per window length over the same central citation."""
    out = []
    doc_citations = find_citations(doc.text, reporters)
    for length in lengths:
        q = build_query(doc, central, length, view, reporters, doc_citations)
        if q is not None:
            q = RetrievalQuery(
                query_id=f"{q.query_id}:w{length}",
                doc_id=q.doc_id,
                left_context=q.left_context,
                central_sentence=q.central_sentence,
                right_context=q.right_context,
                view=q.view,
                kind=q.kind,
                masked_text=q.masked_text,
                display_text=q.display_text,
                target_keys=q.target_keys,
                window_words=length,
            )
            out.append(q)
    return out


def passage_qrels(
    doc_qrels: Sequence[QrelsEntry], passages_by_doc: Mapping[str, Sequence[str]]
) -> list[QrelsEntry]:
    """Doc-level positives inherited by every passage of the cited document."""
    out = []
    for entry in doc_qrels:
        for passage_id in passages_by_doc.get(entry.unit_id, ()):
            out.append(QrelsEntry(entry.query_id, passage_id, entry.relevance))
    return out


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def write_queries_jsonl(queries: Iterable[RetrievalQuery], path) -> int:
    import json

    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for q in queries:
            f.write(
                json.dumps(
                    {
                        "query_id": q.query_id,
                        "doc_id": q.doc_id,
                        "view": q.view,
                        "kind": q.kind,
                        "window_words": q.window_words,
                        "masked_text": q.masked_text,
                        "display_text": q.display_text,
                        "target_keys": [str(k) for k in q.target_keys],
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
            n += 1
    return n


def read_queries_jsonl(path) -> list[dict]:
    from .corpus import iter_jsonl

    return [obj for _, obj in iter_jsonl(path)]


def write_qrels(entries: Iterable[QrelsEntry], path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for e in entries:
            f.write(f"{e.query_id} 0 {e.unit_id} {e.relevance}\n")
            n += 1
    return n


def read_qrels(path) -> dict[str, set[str]]:
    qrels: dict[str, set[str]] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: malformed qrels line")
            qid, _, unit_id, rel = parts
            if int(rel) > 0:
                qrels.setdefault(qid, set()).add(unit_id)
    return qrels
