from __future__ import annotations

import pytest

import fixtures
from casebench.citations import find_case_citations
from casebench.corpus import tokenize_words
from casebench.genset import (
    GensetError,
    build_generation_instance,
    build_genset,
    citation_density_profile,
    read_genset_jsonl,
    render_prompt,
    select_reference_paragraphs,
    write_genset_jsonl,
)
from conftest import make_doc

CITED_PARA = (
    "The rule is settled. Tilden v. Marsh Chemical Corp., 601 U.S. 101, 105 (2023); "
    "Orton v. Delmar Packing Co., 602 U.S. 555, 560 (2024); Carden v. Wexford "
    "Mills, Inc., 710 F.2d 880, 884 (7th Cir.1983)."
)


def twelve_para_doc():
    paragraphs = [f"Paragraph number {i} with plain words only." for i in range(1, 13)]
    paragraphs[9] = CITED_PARA  # paragraph 10, 1-based
    return make_doc("g12", paragraphs, cite="5 F.3d 500")


class TestSelectReferenceParagraphs:
    def test_twelve_paragraphs_citations_only_in_tenth(self):
        # N=12: floor(24/3)=8 <= t <= 10; only paragraph 10 has >= 2 citations.
        assert select_reference_paragraphs(twelve_para_doc()) == [10]

    def test_three_paragraphs_never_eligible(self):
        doc = make_doc("g3", [CITED_PARA] * 3)
        assert select_reference_paragraphs(doc) == []

    def test_one_citation_not_enough(self):
        paragraphs = [f"Words {i}." for i in range(1, 13)]
        paragraphs[9] = "Single cite. Tilden v. Marsh Chemical Corp., 601 U.S. 101 (2023)."
        doc = make_doc("g1c", paragraphs)
        assert select_reference_paragraphs(doc) == []

    def test_bounds_formula_on_mini_corpus(self, mini_corpus):
        for doc in mini_corpus:
            n = len(doc.paragraphs)
            for t in select_reference_paragraphs(doc):
                assert (2 * n) // 3 <= t <= n - 2
                assert len(find_case_citations(doc.paragraph_text(t - 1))) >= 2


class TestBuildInstance:
    def corpus_with_authorities(self):
        authority1 = make_doc(
            "auth1",
            ["Authority one text about movant burden.", "More authority one analysis."],
            cite="601 U.S. 101",
        )
        authority2 = make_doc(
            "auth2",
            ["Authority two text about genuine dispute.", "More authority two analysis."],
            cite="602 U.S. 555",
        )
        doc = twelve_para_doc()
        return doc, {d.doc_id: d for d in (doc, authority1, authority2)}

    def test_instance_fields_and_contiguity(self):
        doc, corpus = self.corpus_with_authorities()
        inst = build_generation_instance(doc, 10, corpus)
        assert inst.t == 10
        assert inst.gold == CITED_PARA
        assert (inst.prefix + "\n" + inst.gold) in doc.text
        assert doc.text.startswith(inst.prefix)
        assert [str(k) for k in inst.cited_keys] == [
            "601 U.S. 101", "602 U.S. 555", "710 F.2d 880",
        ]
        # Only two keys resolve; references keep first-mention order.
        assert [str(r.key) for r in inst.references] == ["601 U.S. 101", "602 U.S. 555"]

    def test_short_cited_case_contributes_whole_text(self):
        doc, corpus = self.corpus_with_authorities()
        inst = build_generation_instance(doc, 10, corpus)
        assert inst.references[0].text == corpus["auth1"].text

    def test_word_budget_truncates(self):
        doc, corpus = self.corpus_with_authorities()
        inst = build_generation_instance(doc, 10, corpus, word_budget=10)
        total = sum(len(tokenize_words(r.text)) for r in inst.references)
        assert total <= 10

    def test_no_resolvable_keys_raises(self):
        doc = twelve_para_doc()
        with pytest.raises(GensetError):
            build_generation_instance(doc, 10, {doc.doc_id: doc})

    def test_prompt_invariants(self):
        doc, corpus = self.corpus_with_authorities()
        inst = build_generation_instance(doc, 10, corpus)
        instruction_line = inst.prompt_with_refs.rsplit("\n", 1)[-1]
        for ref in inst.references:
            assert f"# Reference case {ref.key}\n" in inst.prompt_with_refs
            assert str(ref.key) in instruction_line
        assert "# Reference case" not in inst.prompt_without_refs
        for prompt in (inst.prompt_with_refs, inst.prompt_without_refs):
            assert "# Paragrah\n" in prompt
            assert "<answer></answer>" in prompt


class TestGoldenPrompts:
    WITH_REFS = fixtures.GOLDEN_PROMPT_WITH_REFS
    WITHOUT_REFS = fixtures.GOLDEN_PROMPT_WITHOUT_REFS

    def test_byte_exact_rendering(self, mini_corpus):
        instances, _ = build_genset(mini_corpus, seed=0)
        inst = next(i for i in instances if i.instance_id == "f2d-469-902:p3")
        assert inst.prompt_with_refs == self.WITH_REFS
        assert inst.prompt_without_refs == self.WITHOUT_REFS
        assert render_prompt(inst, with_refs=True) == self.WITH_REFS
        assert render_prompt(inst, with_refs=False) == self.WITHOUT_REFS


class TestBuildGenset:
    def test_deterministic_under_seed(self, mini_corpus):
        a, _ = build_genset(mini_corpus, seed=3)
        b, _ = build_genset(mini_corpus, seed=3)
        assert [i.instance_id for i in a] == [i.instance_id for i in b]

    def test_instances_satisfy_type_invariants(self, mini_corpus):
        instances, diagnostics = build_genset(mini_corpus, seed=0)
        assert instances
        by_id = {d.doc_id: d for d in mini_corpus}
        for inst in instances:
            n = len(by_id[inst.doc_id].paragraphs)
            assert (2 * n) // 3 <= inst.t <= n - 2
            assert len(find_case_citations(inst.gold)) >= 2
            assert len(inst.references) >= 2

    def test_round_trip(self, mini_corpus, tmp_path):
        instances, _ = build_genset(mini_corpus, seed=0)
        path = tmp_path / "genset.jsonl"
        write_genset_jsonl(instances, path)
        back = read_genset_jsonl(path)
        assert [i.instance_id for i in back] == [i.instance_id for i in instances]
        assert back[0].prompt_with_refs == instances[0].prompt_with_refs
        assert back[0].cited_keys == instances[0].cited_keys


class TestDensityProfile:
    def test_citations_only_in_last_decile(self):
        paragraphs = ["Plain filler words here."] * 9
        paragraphs.append("See Tilden v. Marsh Chemical Corp., 601 U.S. 101 (2023).")
        doc = make_doc("dens", paragraphs)
        profile = citation_density_profile([doc])
        assert all(d == 0.0 for d in profile.decile_densities[:9])
        assert profile.decile_densities[9] > 0

    def test_uniform_density(self):
        # One citation per paragraph, each paragraph exactly 100 words.
        cite = "1 F.3d 1"
        body = " ".join(f"w{i}" for i in range(96))
        paragraphs = [f"{body} see {cite}." for _ in range(10)]
        doc = make_doc("unif", paragraphs)
        profile = citation_density_profile([doc])
        assert all(d == pytest.approx(1.0) for d in profile.decile_densities)

    def test_bucket_words_partition_corpus(self, mini_corpus):
        profile = citation_density_profile(mini_corpus)
        assert sum(profile.decile_words) == sum(d.word_count() for d in mini_corpus)
        assert len(profile.decile_densities) == 10

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            citation_density_profile([])
