from __future__ import annotations

import random

import pytest

from casebench.citations import (
    CitationError,
    CitationKey,
    citation_sentence_bounds,
    extract_direct_quotes,
    find_case_citations,
    find_citations,
    find_statute_citations,
    normalize_citation,
    parse_citation_key,
    sentence_extraction_accuracy,
)

# A summary-judgment passage in the Bluebook style the parser targets.
PASSAGE = (
    "Summary judgment should be granted where “the pleadings, depositions, answers "
    "to interrogatories and admissions on file, together with the affidavits, if any, "
    "show there is no genuine issue as to any material fact and that the moving party "
    "is entitled to judgment as a matter of law.” Fed.R.Civ.P. 56(c). The moving party "
    "has the responsibility of informing the Court of portions of the record or "
    "affidavits that demonstrate the absence of a triable issue. Celotex Corp. v. "
    "Catrett, 477 U.S. 317, 322, 106 S.Ct. 2548, 91 L.Ed.2d 265 (1986). The moving "
    "party may meet its burden of showing an absence of disputed material facts by "
    "demonstrating “that there is an absence of evidence to support the non-moving "
    "party’s case.” Id. at 325, 106 S.Ct. 2548. Any doubt as to the existence of a "
    "genuine issue for trial is resolved against the moving party. Anderson v. "
    "Liberty Lobby, Inc., 477 U.S. 242, 255, 106 S.Ct. 2505, 91 L.Ed.2d 202 (1986); "
    "accord Smith v. Jones, 1 F.3d 1 (1st Cir.1993)."
)


class TestFindCaseCitations:
    def test_parallel_run_yields_three_spans(self):
        text = "Celotex Corp. v. Catrett, 477 U.S. 317, 322, 106 S.Ct. 2548, 91 L.Ed.2d 265 (1986)"
        spans = find_case_citations(text)
        assert [str(s.key) for s in spans] == ["477 U.S. 317", "106 S.Ct. 2548", "91 L.Ed.2d 265"]

    def test_no_citations(self):
        assert find_case_citations("no citations here") == []

    def test_pincite_and_court_year_absorbed(self):
        spans = find_case_citations("51 F.3d 1449, 1459 (9th Cir.1995)")
        assert len(spans) == 1
        assert spans[0].raw == "51 F.3d 1449, 1459 (9th Cir.1995)"
        assert str(spans[0].key) == "51 F.3d 1449"

    def test_pincite_range(self):
        spans = find_case_citations("404 U.S. 519, 520-21 (1972)")
        assert len(spans) == 1
        assert str(spans[0].key) == "404 U.S. 519"

    def test_en_dash_pincite_range(self):
        spans = find_case_citations("404 U.S. 519, 520–21 (1972)")
        assert len(spans) == 1
        assert spans[0].raw.endswith("(1972)")

    def test_parallel_volume_not_swallowed_as_pincite(self):
        spans = find_case_citations("477 U.S. 317, 106 S.Ct. 2548")
        assert [str(s.key) for s in spans] == ["477 U.S. 317", "106 S.Ct. 2548"]

    def test_adjacent_number_does_not_split(self):
        spans = find_case_citations("144 S.Ct. 901, 218 L.Ed.2d 44 (2023)")
        assert [str(s.key) for s in spans] == ["144 S.Ct. 901", "218 L.Ed.2d 44"]

    def test_spaced_reporter_variants(self):
        spans = find_case_citations("See 404 U. S. 519, 520 (1972) and 627 F. 2d 83, 86 (CA7 1980).")
        assert [str(s.key) for s in spans] == ["404 U.S. 519", "627 F.2d 83"]

    def test_ordered_and_nonoverlapping(self, mini_corpus):
        for doc in mini_corpus:
            spans = find_case_citations(doc.text)
            for a, b in zip(spans, spans[1:]):
                assert a.end <= b.start
            for s in spans:
                assert doc.text[s.start : s.end] == s.raw


class TestFindStatuteCitations:
    def test_frcp(self):
        spans = find_statute_citations("Fed.R.Civ.P. 56(c)")
        assert len(spans) == 1 and spans[0].kind == "statute"

    def test_usc(self):
        spans = find_statute_citations("29 U.S.C. § 1002(5)")
        assert len(spans) == 1
        assert spans[0].raw == "29 U.S.C. § 1002(5)"

    def test_prose_reference_is_not_a_citation(self):
        assert find_statute_citations("section 3(5) of ERISA") == []

    def test_usc_not_matched_as_case(self):
        assert find_case_citations("29 U.S.C. § 1002(5)") == []


class TestShortForms:
    def test_id_resolves_to_preceding_case(self):
        spans = find_citations("See 477 U.S. 317, 322 (1986). Id. at 325.")
        id_span = [s for s in spans if s.raw.startswith("Id.")][0]
        assert str(id_span.key) == "477 U.S. 317"

    def test_id_unresolved_across_paragraphs(self):
        spans = find_citations("See 477 U.S. 317 (1986).\nId. at 325.")
        id_span = [s for s in spans if s.raw.startswith("Id.")][0]
        assert id_span.key is None

    def test_statute_blocks_id_resolution(self):
        spans = find_citations("See 477 U.S. 317 (1986). And 29 U.S.C. § 1002(5). Id.")
        id_span = [s for s in spans if s.raw.startswith("Id.")][0]
        assert id_span.key is None

    def test_at_cite_resolves_by_volume_and_reporter(self):
        spans = find_citations("Hughes v. Rowe, 449 U.S. 5, 9 (1980). Later, 449 U.S. at 10.")
        at_span = [s for s in spans if " at " in s.raw][-1]
        assert at_span.kind == "short-form"
        assert str(at_span.key) == "449 U.S. 5"


class TestNormalize:
    def test_spacing_variant_and_pincite_dropped(self):
        span = find_case_citations("477 U. S. 317, 322")[0]
        assert normalize_citation(span) == CitationKey(477, "U.S.", 317)

    def test_court_year_parenthetical_dropped(self):
        span = find_case_citations("953 F.2d 1073, 1078 (7th Cir.1992)")[0]
        assert str(normalize_citation(span)) == "953 F.2d 1073"

    def test_stray_leading_letter_stripped(self):
        span = find_case_citations("P51 F.3d 1449, 1459 (9th Cir.1995)")[0]
        assert str(normalize_citation(span)) == "51 F.3d 1449"

    def test_round_trip_on_canonical_keys(self):
        rng = random.Random(99)
        reporters = ["U.S.", "S.Ct.", "L.Ed.2d", "F.2d", "F.3d", "F. Supp. 2d", "F.R.D.", "F."]
        for _ in range(200):
            key = CitationKey(rng.randint(1, 999), rng.choice(reporters), rng.randint(1, 9999))
            assert parse_citation_key(str(key)) == key

    def test_statute_span_rejected(self):
        span = find_statute_citations("Fed.R.Civ.P. 56(c)")[0]
        with pytest.raises(CitationError):
            normalize_citation(span)


def central_span(text, key_str):
    return next(s for s in find_case_citations(text) if str(s.key) == key_str)


class TestSentenceBounds:
    def test_caption_through_year_parenthetical(self):
        span = central_span(PASSAGE, "477 U.S. 317")
        start, end = citation_sentence_bounds(PASSAGE, span)
        assert PASSAGE[start:end] == (
            "Celotex Corp. v. Catrett, 477 U.S. 317, 322, 106 S.Ct. 2548, 91 L.Ed.2d 265 (1986)."
        )

    def test_short_form_sentence_is_whole_string(self):
        span = central_span(PASSAGE, "106 S.Ct. 2548")
        # The parallel S.Ct. cite inside the Celotex sentence comes first;
        # the one in the Id. sentence is the second occurrence.
        spans = [s for s in find_case_citations(PASSAGE) if str(s.key) == "106 S.Ct. 2548"]
        start, end = citation_sentence_bounds(PASSAGE, spans[1])
        assert PASSAGE[start:end] == "Id. at 325, 106 S.Ct. 2548."

    def test_semicolon_terminates(self):
        span = central_span(PASSAGE, "477 U.S. 242")
        start, end = citation_sentence_bounds(PASSAGE, span)
        got = PASSAGE[start:end]
        assert got.startswith("Anderson v. Liberty Lobby")
        assert got.endswith("91 L.Ed.2d 202 (1986);")

    def test_explanatory_parenthetical_closes_sentence(self):
        text = (
            "Officers are not exempt. See Kayes v. Pacific Lumber Co., 51 F.3d 1449, 1459 "
            "(9th Cir.1995) (“This court has held corporate officers to be liable as "
            "fiduciaries.”). Rather, he is liable."
        )
        span = find_case_citations(text)[0]
        start, end = citation_sentence_bounds(text, span)
        got = text[start:end]
        assert got.startswith("Kayes")
        assert got.endswith("fiduciaries.”).")

    def test_no_terminal_in_paragraph_fails(self):
        text = "some words 477 U.S. 317 and more words with no end"
        span = find_case_citations(text)[0]
        assert citation_sentence_bounds(text, span) is None

    def test_subsequent_history_absorbed(self):
        text = (
            "Control makes a fiduciary. IT Corp. v. General Am. Life Ins. Co., 107 F.3d "
            "1415, 1421 (9th Cir.1997), cert. denied, 522 U.S. 1068, 118 S.Ct. 738, 139 "
            "L.Ed.2d 675 (1998). Thus it is."
        )
        span = central_span(text, "107 F.3d 1415")
        start, end = citation_sentence_bounds(text, span)
        assert text[start:end].endswith("(1998).")
        assert text[start:end].startswith("IT Corp.")

    def test_accuracy_metric(self):
        samples = []
        for text in [PASSAGE]:
            span = central_span(text, "477 U.S. 317")
            start, end = citation_sentence_bounds(text, span)
            samples.append(
                {
                    "text": text,
                    "citation_start": span.start,
                    "citation_end": span.end,
                    "sentence_start": start,
                    "sentence_end": end,
                }
            )
        # One deliberately wrong label.
        samples.append(dict(samples[0], sentence_start=0, sentence_end=5))
        accuracy, n = sentence_extraction_accuracy(samples)
        assert n == 2
        assert accuracy == 0.5


class TestDirectQuotes:
    def test_quote_pairs_with_following_id(self):
        quotes = extract_direct_quotes(PASSAGE)
        target = [q for q in quotes if q.text.startswith("that there is an absence")]
        assert len(target) == 1
        paired = target[0].paired_citation
        assert paired is not None
        assert paired.raw.startswith("Id.")
        assert str(paired.key) == "91 L.Ed.2d 265"  # Id. resolves to the last parallel cite

    def test_ascii_quotes_ignored(self):
        assert extract_direct_quotes('he said "hello" to 477 U.S. 317') == []

    def test_nearer_of_two_following_citations_wins(self):
        text = "“quoted words” 1 F.3d 1 (1st Cir.1993) and later 2 F.3d 2 (1st Cir.1994)."
        quotes = extract_direct_quotes(text)
        assert str(quotes[0].paired_citation.key) == "1 F.3d 1"

    def test_unpaired_when_farther_than_cap(self):
        text = "“quote”" + " filler" * 60 + " 1 F.3d 1 (1st Cir.1993)."
        quotes = extract_direct_quotes(text)
        assert quotes[0].paired_citation is None

    def test_unbalanced_opener_skipped(self):
        text = "“outer “inner” tail"
        quotes = extract_direct_quotes(text)
        assert [q.text for q in quotes] == ["inner"]

    def test_no_unmatched_marks_inside_spans(self, mini_corpus):
        for doc in mini_corpus:
            for q in extract_direct_quotes(doc.text):
                assert q.text.count("“") == q.text.count("”")

    def test_preceding_citation_pairs_for_explanatory_quote(self):
        text = "See Kayes v. Pacific Co., 51 F.3d 1449 (9th Cir.1995) (“officers are liable”)."
        quotes = extract_direct_quotes(text)
        assert str(quotes[0].paired_citation.key) == "51 F.3d 1449"
