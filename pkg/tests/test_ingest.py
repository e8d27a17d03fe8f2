import re

import pytest
from hypothesis import given, settings as hyp_settings, strategies as st

from kgrag.config import Settings
from kgrag.corpus import Document, TagSet
from kgrag.errors import DataError, TaggingError
from kgrag.ingest import (
    chunk_document,
    fallback_tag,
    ingest_corpus,
    split_sentences,
    tag_text,
)
from kgrag.provider import MockProvider


def _doc(text, doc_id="doc-a", company="Acme", year=2022):
    return Document(doc_id, company, year, "title", text)


def _norm_ws(text):
    return re.sub(r"\s+", " ", text).strip()


class TestChunkDocument:
    def test_single_sentence_single_chunk(self):
        doc = _doc("Revenue grew strongly this year.")
        chunks = chunk_document(doc, 512, 64)
        assert len(chunks) == 1
        assert chunks[0].text == doc.text
        assert chunks[0].chunk_id == "doc-a#0"
        assert chunks[0].seq_no == 0

    def test_packing_and_overlap(self):
        # 10 sentences of ~50 tokens; target 200, overlap 50.
        sentences = [
            " ".join(f"w{i}x{j}" for j in range(49)) + f" s{i}." for i in range(10)
        ]
        doc = _doc(" ".join(sentences))
        chunks = chunk_document(doc, 200, 50)
        assert len(chunks) > 1
        for c in chunks:
            assert c.approx_tokens <= 200
        for prev, nxt in zip(chunks, chunks[1:]):
            prev_sents = set(split_sentences(prev.text))
            nxt_sents = set(split_sentences(nxt.text))
            assert prev_sents & nxt_sents, "consecutive chunks share no sentence"

    def test_seq_no_consecutive(self):
        doc = _doc(" ".join(f"Sentence number {i} has several words in it." for i in range(40)))
        chunks = chunk_document(doc, 64, 16)
        assert [c.seq_no for c in chunks] == list(range(len(chunks)))

    def test_overlap_must_be_less_than_target(self):
        with pytest.raises(DataError, match="overlap"):
            chunk_document(_doc("One. Two."), 64, 64)

    def test_target_minimum(self):
        with pytest.raises(DataError, match="target_tokens"):
            chunk_document(_doc("One. Two."), 32, 0)

    def test_empty_document_rejected(self):
        with pytest.raises(DataError):
            _doc("   ")

    @given(
        st.lists(
            st.integers(min_value=1, max_value=30), min_size=1, max_size=40
        ),
        st.integers(min_value=64, max_value=120),
        st.integers(min_value=0, max_value=63),
    )
    @hyp_settings(max_examples=60, deadline=None)
    def test_lossless_reconstruction(self, lengths, target, overlap):
        # Distinct sentences make de-overlap by sentence identity unambiguous.
        sentences = [
            " ".join(f"s{i}w{j}" for j in range(n)) + "." for i, n in enumerate(lengths)
        ]
        doc = _doc(" ".join(sentences))
        chunks = chunk_document(doc, target, overlap)
        seen: list[str] = []
        for chunk in chunks:
            for sentence in split_sentences(chunk.text):
                if not seen or sentence not in seen:
                    seen.append(sentence)
        assert _norm_ws(" ".join(seen)) == _norm_ws(doc.text)


class TestTagText:
    def test_directive_payload_normalized(self, mock_provider):
        text = 'About Apple. TAGS_JSON:{"organizations":["Apple"],"dates":["2022"]}'
        tags = tag_text(text, mock_provider)
        assert tags.get("organizations") == ("apple",)
        assert tags.get("dates") == ("2022",)

    def test_empty_object_empty_tagset(self, mock_provider):
        assert tag_text("No entities here. TAGS_JSON:{}", mock_provider) == TagSet.empty()

    def test_unknown_categories_dropped(self, mock_provider):
        text = 'x TAGS_JSON:{"organizations":["a"],"colors":["red"]}'
        tags = tag_text(text, mock_provider)
        assert tags.get("organizations") == ("a",)
        assert tags.as_dict() == {"organizations": ["a"]}

    def test_malformed_twice_raises(self, mock_provider):
        with pytest.raises(TaggingError):
            tag_text("ECHO:not json at all", mock_provider)

    def test_malformed_then_repaired(self):
        class FlakyTagger:
            def __init__(self):
                self.calls = 0

            def chat(self, request):
                self.calls += 1
                if self.calls == 1:
                    return "sorry, here are your tags!"
                return '{"organizations": ["acme"]}'

        provider = FlakyTagger()
        tags = tag_text("plain text with no directive", provider)
        assert provider.calls == 2
        assert tags.get("organizations") == ("acme",)


class TestFallbackTag:
    def test_gazetteer_and_year(self):
        gaz = {"organizations": ["apple inc", "apple"]}
        tags = fallback_tag("Apple revenue grew in 2022", gaz)
        assert tags.get("organizations") == ("apple",)
        assert tags.get("dates") == ("2022",)

    def test_empty_gazetteer_no_years(self):
        assert fallback_tag("Nothing to see here", {}) == TagSet.empty()

    def test_word_boundary_required(self):
        assert fallback_tag("apples are fruit", {"organizations": ["apple"]}) == TagSet.empty()

    def test_multiword_terms_match(self):
        gaz = {"organizations": ["zenimax media"]}
        tags = fallback_tag("the ZeniMax Media deal closed", gaz)
        assert tags.get("organizations") == ("zenimax media",)

    def test_year_not_matched_inside_longer_number(self):
        assert fallback_tag("serial 120225 shipped", {}) == TagSet.empty()


class TestIngestCorpus:
    def _docs(self):
        return [
            _doc(
                f"{name} revenue grew in {year}. Margins in {name} improved. "
                f"The outlook for {name} stayed firm.",
                doc_id=f"{name.lower()}-{year}",
                company=name,
                year=year,
            )
            for name, year in (
                ("Acme", 2021),
                ("Beta", 2021),
                ("Ceres", 2022),
                ("Delta", 2022),
                ("Eos", 2023),
                ("Fenix", 2023),
            )
        ]

    def test_fixture_counts_ids_and_tag_monotonicity(self, settings, mock_provider):
        docs = self._docs()
        gaz = {"organizations": [d.company.lower() for d in docs]}
        result = ingest_corpus(docs, settings, mock_provider, gazetteer=gaz)
        assert not result.failures
        by_doc = {}
        for chunk in result.chunks:
            by_doc.setdefault(chunk.doc_id, []).append(chunk)
        assert set(by_doc) == {d.doc_id for d in docs}
        for doc in docs:
            chunks = by_doc[doc.doc_id]
            assert len(chunks) > 0
            doc_seed = {("organizations", doc.company.lower()), ("dates", str(doc.fiscal_year))}
            for chunk in chunks:
                assert doc_seed <= set(chunk.tags.pairs())
        ids = [c.chunk_id for c in result.chunks]
        assert len(ids) == len(set(ids))

    def test_deterministic_output_bytes(self, settings, mock_provider, tmp_path):
        docs = self._docs()
        gaz = {"organizations": ["acme"]}
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        ingest_corpus(docs, settings, mock_provider, gazetteer=gaz, out_path=a)
        ingest_corpus(docs, settings, MockProvider(seed=0), gazetteer=gaz, out_path=b)
        assert a.read_bytes() == b.read_bytes()

    def test_failures_reported_per_document(self, settings):
        # Tagging via provider: first doc carries a valid directive, second
        # returns prose twice and must fail without sinking the run.
        docs = [
            _doc('Good doc. TAGS_JSON:{"organizations":["acme"]}', doc_id="good"),
            _doc("Bad doc with no directive at all.", doc_id="bad"),
        ]
        result = ingest_corpus(docs, Settings(), MockProvider())
        assert [f[0] for f in result.failures] == ["bad"]
        assert {c.doc_id for c in result.chunks} == {"good"}

    def test_duplicate_doc_ids_rejected(self, settings, mock_provider):
        docs = [_doc("One."), _doc("Two.")]
        with pytest.raises(DataError, match="duplicate doc_id"):
            ingest_corpus(docs, settings, mock_provider, gazetteer={})
