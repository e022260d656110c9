"""Recognize case and statute citations, locate citation sentences, extract
direct quotes, and normalize citations into comparable keys.

The recognizer targets Bluebook-style federal citations: ``<volume>
<reporter> <page>`` with optional pincite and court-year parenthetical,
parallel citation runs, ``Id.``/``supra``/at-page short forms, and the two
statute families ``<title> U.S.C. § <section>`` and ``Fed.R.Civ.P. <rule>``.
Reporter surface variants ("U. S.", "F. 3d") come from a JSON table and are
canonicalized before keys are compared.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterable, Sequence

KIND_CASE = "case"
KIND_STATUTE = "statute"
KIND_SHORT_FORM = "short-form"

# How far (in characters) a quote may sit from a citation and still pair
# with it.  Bluebook puts the citation right after the quoted sentence;
# the cap stops pairings across unrelated sections.
QUOTE_PAIR_WINDOW = 300

OPEN_QUOTE = "“"   # U+201C
CLOSE_QUOTE = "”"  # U+201D


class CitationError(ValueError):
    """A span could not be normalized into a volume/reporter/page key."""


@dataclass(frozen=True, order=True)
class CitationKey:
    """Canonical citation identity: two keys are equal iff all fields are."""

    volume: int
    reporter: str
    page: int

    def __str__(self) -> str:
        return f"{self.volume} {self.reporter} {self.page}"


@dataclass(frozen=True)
class CitationSpan:
    start: int
    end: int
    kind: str
    raw: str
    key: CitationKey | None = None


@dataclass(frozen=True)
class QuoteSpan:
    """A curly-quoted extract, offsets exclusive of the quotation marks."""

    start: int
    end: int
    text: str
    paired_citation: CitationSpan | None = None


_WS_RUN_RE = re.compile(r"\s+")
# (?!\d) forbids backtracking into a partial page number, which would
# otherwise split "218" into pincite "21" plus an orphaned "8".
_PIN_TAIL = r"\d{1,5}(?!\d)(?:[ \t]*[-–][ \t]*\d{1,5}(?!\d))?"


class ReporterTable:
    """Maps reporter surface variants to canonical abbreviations.

    Also owns the compiled citation regexes, which depend on the variant
    list.  The table is immutable after construction and safe to share.
    """

    def __init__(self, variants: dict[str, str]):
        if not variants:
            raise ValueError("reporter table must not be empty")
        self.variants = {_WS_RUN_RE.sub(" ", k.strip()): v for k, v in variants.items()}
        alts = sorted(self.variants, key=len, reverse=True)
        alt = "|".join(
            r"[ \t]".join(re.escape(part) for part in v.split(" ")) for v in alts
        )
        # Volume may carry one stray leading letter (OCR noise like "P51").
        # The pincite lookahead keeps ", 106" out of the pincite slot when
        # "106" is really the volume of the next parallel citation.
        self.case_re = re.compile(
            rf"(?<![\w.§])(?P<vol>[A-Za-z]?\d{{1,4}})[ \t]+(?P<rep>{alt})[ \t]+(?P<page>\d{{1,5}})(?!\d)"
            rf"(?P<pin>,[ \t]+{_PIN_TAIL}(?![ \t]+(?:{alt})[ \t]+(?:\d|at\b)))?"
            rf"(?P<paren>[ \t]*\([^()\n]*\d{{4}}\))?"
        )
        self.at_cite_re = re.compile(
            rf"(?<![\w.§])(?P<vol>\d{{1,4}})[ \t]+(?P<rep>{alt})[ \t]+at[ \t]+{_PIN_TAIL}"
        )

    def canonical(self, surface: str) -> str | None:
        return self.variants.get(_WS_RUN_RE.sub(" ", surface.strip()))


@lru_cache(maxsize=1)
def default_reporter_table() -> ReporterTable:
    data = resources.files("casebench.data").joinpath("reporters.json").read_text("utf-8")
    return ReporterTable(json.loads(data))


def load_reporter_table(path=None) -> ReporterTable:
    if path is None:
        return default_reporter_table()
    with open(path, "r", encoding="utf-8") as f:
        return ReporterTable(json.load(f))


def _key_from_match(m: re.Match, table: ReporterTable) -> CitationKey:
    vol_digits = re.sub(r"\D", "", m.group("vol"))
    reporter = table.canonical(m.group("rep"))
    if not vol_digits or reporter is None:
        raise CitationError(f"cannot normalize {m.group(0)!r}")
    return CitationKey(volume=int(vol_digits), reporter=reporter, page=int(m.group("page")))


def find_case_citations(text: str, reporters: ReporterTable | None = None) -> list[CitationSpan]:
    """Full case citations, non-overlapping, ordered by start offset."""
    table = reporters or default_reporter_table()
    spans = []
    for m in table.case_re.finditer(text):
        spans.append(
            CitationSpan(
                start=m.start(),
                end=m.end(),
                kind=KIND_CASE,
                raw=m.group(0),
                key=_key_from_match(m, table),
            )
        )
    return spans


_USC_RE = re.compile(
    r"(?<![\w.])\d{1,3}[ \t]+U\.[ \t]?S\.[ \t]?C\.(?:A\.)?[ \t]*§{1,2}[ \t]*\d+[A-Za-z0-9().–-]*"
)
_FRCP_RE = re.compile(r"Fed\.[ \t]?R\.[ \t]?Civ\.[ \t]?P\.[ \t]*\d+[A-Za-z0-9().]*")


def find_statute_citations(text: str) -> list[CitationSpan]:
    """Statute citations of the U.S.C. and Fed.R.Civ.P. pattern families."""
    spans = []
    for pattern in (_USC_RE, _FRCP_RE):
        for m in pattern.finditer(text):
            end = m.end()
            while end > m.start() and text[end - 1] in ".,;":
                end -= 1  # sentence punctuation is not part of the section
            spans.append(CitationSpan(m.start(), end, KIND_STATUTE, text[m.start() : end]))
    spans.sort(key=lambda s: (s.start, -s.end))
    out: list[CitationSpan] = []
    for s in spans:
        if out and s.start < out[-1].end:
            continue
        out.append(s)
    return out


_ID_RE = re.compile(rf"(?<![A-Za-z])[Ii]d\.(?:[ \t]+at[ \t]+{_PIN_TAIL})?")
_SUPRA_RE = re.compile(
    rf"(?<![A-Za-z])supra(?:,?[ \t]+(?:at[ \t]+{_PIN_TAIL}|note[ \t]+\d+))?", re.IGNORECASE
)


def _overlaps(start: int, end: int, spans: Sequence[CitationSpan]) -> bool:
    return any(start < s.end and end > s.start for s in spans)


def find_citations(text: str, reporters: ReporterTable | None = None) -> list[CitationSpan]:
    """All citation spans (case, statute, short-form), ordered by start.

    Short forms are resolved where possible: ``Id.`` takes the key of the
    immediately preceding case citation in the same paragraph (unless a
    statute intervenes); an at-page cite ("449 U.S. at 10") takes the key
    of the nearest preceding full citation with the same volume and
    reporter.  Unresolvable short forms keep ``key=None``.
    """
    table = reporters or default_reporter_table()
    statutes = find_statute_citations(text)
    cases = [s for s in find_case_citations(text, table) if not _overlaps(s.start, s.end, statutes)]
    blocked = statutes + cases

    shorts: list[CitationSpan] = []
    for m in _ID_RE.finditer(text):
        if not _overlaps(m.start(), m.end(), blocked):
            shorts.append(CitationSpan(m.start(), m.end(), KIND_SHORT_FORM, m.group(0)))
    for m in _SUPRA_RE.finditer(text):
        if not _overlaps(m.start(), m.end(), blocked):
            shorts.append(CitationSpan(m.start(), m.end(), KIND_SHORT_FORM, m.group(0)))
    for m in table.at_cite_re.finditer(text):
        if _overlaps(m.start(), m.end(), blocked):
            continue
        vol = int(m.group("vol"))
        rep = table.canonical(m.group("rep"))
        key = None
        for prior in reversed(cases):
            if prior.end > m.start():
                continue
            if prior.key and prior.key.volume == vol and prior.key.reporter == rep:
                key = prior.key
                break
        shorts.append(CitationSpan(m.start(), m.end(), KIND_SHORT_FORM, m.group(0), key))

    spans = sorted(statutes + cases + shorts, key=lambda s: s.start)

    # Resolve Id. forms against the running context.
    resolved: list[CitationSpan] = []
    last_case: CitationSpan | None = None
    last_was_statute = False
    for span in spans:
        if span.kind == KIND_CASE:
            last_case = span
            last_was_statute = False
        elif span.kind == KIND_STATUTE:
            last_was_statute = True
        elif span.key is None and span.raw.lstrip()[:2].lower() == "id":
            if (
                last_case is not None
                and not last_was_statute
                and "\n" not in text[last_case.end : span.start]
            ):
                span = CitationSpan(span.start, span.end, span.kind, span.raw, last_case.key)
        resolved.append(span)
    return resolved


def normalize_citation(span: CitationSpan, reporters: ReporterTable | None = None) -> CitationKey:
    """Canonical key for a case span: spacing/period variants folded, pincites
    dropped, stray leading letters on the volume stripped."""
    if span.kind != KIND_CASE:
        raise CitationError(f"cannot normalize a {span.kind} span")
    if span.key is not None:
        return span.key
    table = reporters or default_reporter_table()
    m = table.case_re.search(span.raw)
    if m is None:
        raise CitationError(f"unparseable citation {span.raw!r}")
    return _key_from_match(m, table)


def parse_citation_key(s: str, reporters: ReporterTable | None = None) -> CitationKey:
    """Parse a citation string like ``"477 U.S. 317"`` into a key."""
    table = reporters or default_reporter_table()
    m = table.case_re.search(s)
    if m is None:
        raise CitationError(f"unparseable citation key {s!r}")
    return _key_from_match(m, table)


# ---------------------------------------------------------------------------
# Citation sentence boundaries
# ---------------------------------------------------------------------------

# Tokens whose trailing period never ends a sentence.  Bluebook citations
# are dense with abbreviation periods; single letters (initials, reporter
# fragments) are always treated as abbreviations.
_ABBREVIATIONS = frozenset(
    """
    v vs corp inc co ltd llc bros cir supp no nos st mr mrs ms dr jr sr
    jan feb mar apr jun jul aug sep sept oct nov dec id al seq cert stat
    ct cl fed civ crim proc app rev reins fin ins com nat order dept
    dep't nat'l int'l ass'n mech indus am gen distrib mfg
    """.split()
)


def _token_before(text: str, i: int) -> str:
    j = i
    while j > 0 and (text[j - 1].isalnum() or text[j - 1] in "'’"):
        j -= 1
    return text[j:i]


def _is_abbreviation(token: str) -> bool:
    if not token:
        return False
    if len(token) == 1 and token.isalpha():
        return True
    return token.lower() in _ABBREVIATIONS


_CLOSERS = "”’\"'"


def _iter_terminals(
    text: str,
    lo: int,
    hi: int,
    closing_paren_ends: bool = False,
    skip_spans: Sequence[tuple[int, int]] = (),
):
    """Yield positions just past each sentence terminal in [lo, hi).

    Terminals: a period at parenthesis depth <= 0 whose preceding token is
    not an abbreviation (trailing close-quotes absorbed); a semicolon at
    depth <= 0; and, when ``closing_paren_ends``, a closing parenthesis
    returning to depth <= 0 (the end of a parenthetical explanation).
    ``skip_spans`` (sorted, disjoint) are jumped over: punctuation inside a
    recognized citation never ends a sentence.
    """
    depth = 0
    i = lo
    skips = iter(skip_spans)
    current_skip = next(skips, None)
    while i < hi:
        while current_skip is not None and current_skip[1] <= i:
            current_skip = next(skips, None)
        if current_skip is not None and current_skip[0] <= i < current_skip[1]:
            i = current_skip[1]
            continue
        ch = text[i]
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if closing_paren_ends and depth <= 0:
                j = i + 1
                if j < hi and text[j] == ".":
                    j += 1
                yield j
        elif ch == ";" and depth <= 0:
            yield i + 1
        elif ch == "." and depth <= 0:
            nxt = text[i + 1] if i + 1 < len(text) else ""
            if nxt == "" or nxt.isspace() or nxt in _CLOSERS:
                if not _is_abbreviation(_token_before(text, i)):
                    j = i + 1
                    while j < hi and text[j] in _CLOSERS:
                        j += 1
                    yield j
        i += 1


# Sentence-starter forms that may open a citation sentence.
_STARTER_RE = re.compile(
    r"(?<![A-Za-z])(?:See,?[ \t]+e\.g\.,?|See\b|Cf\.|E\.g\.,?|Accord\b|In[ \t]+re\b|Id\.)"
)
_VERSUS_RE = re.compile(r"(?<![\w.])vs?\.[ \t]")
_CAPTION_CONNECTORS = frozenset(
    {"of", "the", "and", "in", "for", "ex", "rel.", "de", "la", "van", "von", "d'", "&", "et"}
)
# Citation signal words preceding a caption are their own starters, never
# part of the party name.
_CAPTION_STOPWORDS = frozenset({"see", "cf", "e.g", "accord", "compare", "contra", "but", "id"})


def _caption_start(text: str, lo: int, v_pos: int) -> int | None:
    """Walk left from an " v. " to the start of the party caption."""
    words = [(m.start(), m.group(0)) for m in re.finditer(r"\S+", text[lo:v_pos])]
    start = None
    taken = 0
    for offset, token in reversed(words):
        stripped = token.rstrip(",")
        if not stripped:
            break
        if stripped.rstrip(".,").lower() in _CAPTION_STOPWORDS:
            break
        ok = stripped[0].isupper() or stripped[0].isdigit() or stripped.lower() in _CAPTION_CONNECTORS
        if stripped[0] in "()“”\"":
            ok = False
        if not ok or taken >= 12:
            break
        start = lo + offset
        taken += 1
        if stripped.lower() in _CAPTION_CONNECTORS:
            continue
    if start is None:
        return None
    # Trim leading lowercase connectors: sentences do not start with "of".
    while True:
        m = re.match(r"\S+", text[start:v_pos])
        if m and m.group(0).rstrip(",") in _CAPTION_CONNECTORS:
            nxt = re.search(r"\S", text[start + m.end() : v_pos])
            if nxt is None:
                break
            start = start + m.end() + nxt.start()
        else:
            break
    return start


def citation_sentence_bounds(
    text: str, citation: CitationSpan, reporters: ReporterTable | None = None
) -> tuple[int, int] | None:
    """Character span of the sentence containing ``citation``.

    The start is the nearest preceding sentence starter (party caption,
    Id., See, In re, ...) or sentence-terminal boundary, falling back to
    the start of the enclosing paragraph.  The end is the first terminal
    at or after the citation.  Returns None (failure) when no terminal
    exists within the enclosing paragraph.
    """
    if not (0 <= citation.start < citation.end <= len(text)):
        raise ValueError("citation span outside text")
    para_lo = text.rfind("\n", 0, citation.start) + 1
    nl = text.find("\n", citation.end)
    para_hi = len(text) if nl == -1 else nl

    # Other citations in the paragraph are opaque: their periods and
    # year parentheticals never terminate the sentence.
    skip_spans = [
        (s.start, s.end)
        for s in find_case_citations(text[para_lo:para_hi], reporters)
    ]
    skip_spans = [(para_lo + a, para_lo + b) for a, b in skip_spans]

    end = next(
        _iter_terminals(
            text, citation.end, para_hi, closing_paren_ends=True, skip_spans=skip_spans
        ),
        None,
    )
    if end is None:
        return None

    candidates = [para_lo]
    last_terminal = None
    for pos in _iter_terminals(text, para_lo, citation.start, skip_spans=skip_spans):
        last_terminal = pos
    if last_terminal is not None:
        m = re.search(r"\S", text[last_terminal : citation.start])
        # Whitespace only up to the citation: the sentence starts at it.
        candidates.append(last_terminal + m.start() if m else citation.start)
    for m in _STARTER_RE.finditer(text, para_lo, citation.start):
        candidates.append(m.start())
    for m in _VERSUS_RE.finditer(text, para_lo, citation.start):
        cap = _caption_start(text, para_lo, m.start())
        if cap is not None:
            candidates.append(cap)
    start = max(c for c in candidates if c <= citation.start)
    return start, end


def sentence_extraction_accuracy(
    samples: Iterable[dict], reporters: ReporterTable | None = None
) -> tuple[float, int]:
    """Exact-match accuracy of sentence-bound extraction on labeled samples.

    Each sample carries ``text``, ``citation_start``, ``citation_end`` and the
    gold ``sentence_start``/``sentence_end``.  Returns (accuracy, n).
    """
    table = reporters or default_reporter_table()
    correct = 0
    n = 0
    for sample in samples:
        n += 1
        span = CitationSpan(
            int(sample["citation_start"]), int(sample["citation_end"]), KIND_CASE, ""
        )
        got = citation_sentence_bounds(sample["text"], span)
        want = (int(sample["sentence_start"]), int(sample["sentence_end"]))
        if got == want:
            correct += 1
    return (correct / n if n else 0.0), n


# ---------------------------------------------------------------------------
# Direct quotes
# ---------------------------------------------------------------------------

def _balanced_quote_spans(text: str) -> list[tuple[int, int]]:
    """Innermost balanced U+201C...U+201D pairs; unmatched marks are skipped."""
    stack: list[int] = []
    spans: list[tuple[int, int]] = []
    for i, ch in enumerate(text):
        if ch == OPEN_QUOTE:
            stack.append(i)
        elif ch == CLOSE_QUOTE and stack:
            opener = stack.pop()
            spans.append((opener + 1, i))
    spans.sort()
    return spans


def _same_sentence(text: str, a: int, b: int) -> bool:
    if "\n" in text[a:b]:
        return False
    return next(_iter_terminals(text, a, b), None) is None


def extract_direct_quotes(
    text: str,
    citations: Sequence[CitationSpan] | None = None,
    reporters: ReporterTable | None = None,
    max_pair_distance: int = QUOTE_PAIR_WINDOW,
) -> list[QuoteSpan]:
    """Curly-quoted extracts paired with their nearest case citation.

    A following citation in the same sentence wins; otherwise the nearest
    citation by distance between quote end and citation start, ties toward
    the following one.  No citation within ``max_pair_distance`` characters
    leaves the quote unpaired.
    """
    if citations is None:
        citations = find_citations(text, reporters)
    candidates = [c for c in citations if c.kind in (KIND_CASE, KIND_SHORT_FORM)]

    quotes: list[QuoteSpan] = []
    for start, end in _balanced_quote_spans(text):
        following = [
            (c.start - end, c) for c in candidates if c.start >= end and c.start - end <= max_pair_distance
        ]
        same_sentence = [(d, c) for d, c in following if _same_sentence(text, end, c.start)]
        paired: CitationSpan | None = None
        if same_sentence:
            paired = min(same_sentence, key=lambda dc: dc[0])[1]
        else:
            best = None
            for c in candidates:
                dist = abs(c.start - end)
                if dist > max_pair_distance:
                    continue
                rank = (dist, 0 if c.start >= end else 1, c.start)
                if best is None or rank < best[0]:
                    best = (rank, c)
            if best is not None:
                paired = best[1]
        quotes.append(QuoteSpan(start=start, end=end, text=text[start:end], paired_citation=paired))
    return quotes


# ---------------------------------------------------------------------------
# Citation dump serialization
# ---------------------------------------------------------------------------

def write_citations_jsonl(rows: Iterable[tuple[str, CitationSpan]], path) -> int:
    """Write (doc_id, span) rows as {doc_id, start, end, kind, key} JSONL."""
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for doc_id, span in rows:
            f.write(
                json.dumps(
                    {
                        "doc_id": doc_id,
                        "start": span.start,
                        "end": span.end,
                        "kind": span.kind,
                        "key": str(span.key) if span.key else None,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
            n += 1
    return n
