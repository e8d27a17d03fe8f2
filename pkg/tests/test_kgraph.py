import random
import re

import networkx as nx
import pytest

from kgrag.corpus import TagSet
from kgrag.errors import DataError, ExtractionError
from kgrag.kgraph import (
    build_graph,
    expand_neighborhood,
    export_dot,
    extract_triples,
    match_nodes,
    render_triples,
)

from conftest import make_chunk, make_triple


class TestExtractTriples:
    def test_directive_payload_normalized(self, mock_provider):
        chunk = make_chunk(
            "m-2021#0",
            'The deal closed. TRIPLES_JSON:[{"subject":"Microsoft","predicate":"Acquired","object":"ZenimaxMedia"}]',
            doc_id="m-2021",
        )
        triples = extract_triples(chunk, mock_provider)
        assert len(triples) == 1
        t = triples[0]
        assert (t.subject, t.predicate, t.object) == ("microsoft", "acquired", "zenimaxmedia")
        assert t.doc_id == "m-2021"
        assert t.chunk_id == "m-2021#0"

    def test_empty_array_empty_list(self, mock_provider):
        chunk = make_chunk("d#0", "Nothing here. TRIPLES_JSON:[]")
        assert extract_triples(chunk, mock_provider) == []

    def test_duplicates_collapse(self, mock_provider):
        payload = (
            '[{"subject":"A","predicate":"Owns","object":"B"},'
            '{"subject":"a","predicate":"owns","object":"b"}]'
        )
        chunk = make_chunk("d#0", f"x TRIPLES_JSON:{payload}")
        assert len(extract_triples(chunk, mock_provider)) == 1

    def test_empty_field_dropped(self, mock_provider):
        payload = '[{"subject":"A","predicate":"","object":"B"}]'
        chunk = make_chunk("d#0", f"x TRIPLES_JSON:{payload}")
        assert extract_triples(chunk, mock_provider) == []

    def test_malformed_twice_raises(self, mock_provider):
        chunk = make_chunk("d#0", "prose without any machine payload")
        with pytest.raises(ExtractionError):
            extract_triples(chunk, mock_provider)

    def test_deterministic_ids(self, mock_provider):
        chunk = make_chunk("d#0", 'x TRIPLES_JSON:[{"subject":"A","predicate":"R","object":"B"}]')
        first = extract_triples(chunk, mock_provider)
        second = extract_triples(chunk, mock_provider)
        assert [t.triple_id for t in first] == [t.triple_id for t in second]


class TestBuildGraph:
    def test_acquisition_fixture_counts(self, acquisition_store):
        # 4 triples; nodes are subjects and objects only:
        # googlecloud, $1.7b, alphabet, $45b, microsoft, zenimaxmedia, 25%decrease
        assert len(acquisition_store) == 4
        assert len(acquisition_store.nodes) == 7
        assert set(acquisition_store.nodes) == {
            "googlecloud", "$1.7b", "alphabet", "$45b",
            "microsoft", "zenimaxmedia", "25%decrease",
        }

    def test_empty_store(self):
        store = build_graph([])
        assert len(store) == 0
        assert store.nodes == ()

    def test_every_triple_reachable_from_both_endpoints(self, acquisition_store):
        for tid, t in acquisition_store.triples.items():
            assert tid in acquisition_store.incident(t.subject)
            assert tid in acquisition_store.incident(t.object)

    def test_adjacency_invariant_random_graphs(self):
        rng = random.Random(42)
        for _ in range(25):
            names = [f"n{i}" for i in range(rng.randint(1, 12))]
            triples = [
                make_triple(rng.choice(names), f"r{j}", rng.choice(names), chunk_id=f"c#{j}")
                for j in range(rng.randint(0, 20))
            ]
            store = build_graph(triples)
            store.check_invariants()


class TestMatchNodes:
    def test_question_and_tags_match_fixture(self, acquisition_store):
        tags = TagSet.from_raw({"organizations": ["microsoft", "zenimax"]})
        nodes = match_nodes(acquisition_store, "Did Microsoft acquire ZeniMax?", tags)
        assert nodes == {"microsoft", "zenimaxmedia"}

    def test_spaced_tag_matches_concatenated_node(self, acquisition_store):
        tags = TagSet.from_raw({"organizations": ["zenimax media"]})
        nodes = match_nodes(acquisition_store, "Tell me about the studios deal", tags)
        assert nodes == {"zenimaxmedia"}

    def test_no_shared_terms_empty(self, acquisition_store):
        nodes = match_nodes(acquisition_store, "How is the weather today?", TagSet.empty())
        assert nodes == set()

    def test_exact_tag_node_match(self, acquisition_store):
        tags = TagSet.from_raw({"organizations": ["alphabet"]})
        nodes = match_nodes(acquisition_store, "irrelevant words only here", tags)
        assert nodes == {"alphabet"}

    def test_node_found_in_question_text(self, acquisition_store):
        nodes = match_nodes(
            acquisition_store, "Any update on zenimaxmedia integration?", TagSet.empty()
        )
        assert "zenimaxmedia" in nodes

    def test_spaced_question_reaches_concatenated_node(self, acquisition_store):
        nodes = match_nodes(
            acquisition_store, "How went the Zenimax Media integration?", TagSet.empty()
        )
        assert "zenimaxmedia" in nodes


def bfs_oracle(triples, seeds, hops):
    """Independent expansion oracle built on networkx shortest paths."""
    graph = nx.Graph()
    for t in triples:
        graph.add_edge(t.subject, t.object)
    distances = {}
    for seed in seeds:
        if seed in graph:
            for node, dist in nx.single_source_shortest_path_length(graph, seed).items():
                if node not in distances or dist < distances[node]:
                    distances[node] = dist
    keep = {
        t.triple_id
        for t in triples
        if min(
            (distances.get(end, hops + 1) for end in (t.subject, t.object)),
            default=hops + 1,
        )
        <= hops
    }
    return keep


class TestExpandNeighborhood:
    def test_hops_zero_only_seed_incident(self, acquisition_store):
        triples = expand_neighborhood(acquisition_store, {"microsoft"}, hops=0)
        assert len(triples) == 2
        assert all(t.subject == "microsoft" for t in triples)

    def test_empty_seeds_empty_result(self, acquisition_store):
        assert expand_neighborhood(acquisition_store, set(), hops=1) == []

    def test_chain_one_hop(self):
        chain = [
            make_triple("a", "r", "b", chunk_id="c#0"),
            make_triple("b", "r", "c", chunk_id="c#1"),
            make_triple("c", "r", "d", chunk_id="c#2"),
        ]
        store = build_graph(chain)
        got = expand_neighborhood(store, {"a"}, hops=1)
        pairs = {(t.subject, t.object) for t in got}
        assert pairs == {("a", "b"), ("b", "c")}

    def test_ordering_by_hop_then_id(self):
        chain = [
            make_triple("a", "r", "b", chunk_id="c#0"),
            make_triple("b", "r", "c", chunk_id="c#1"),
        ]
        store = build_graph(chain)
        got = expand_neighborhood(store, {"a"}, hops=1)
        assert [(t.subject, t.object) for t in got] == [("a", "b"), ("b", "c")]

    def test_matches_bfs_oracle_random_graphs(self):
        rng = random.Random(7)
        for _ in range(30):
            names = [f"n{i}" for i in range(rng.randint(2, 25))]
            triples = [
                make_triple(rng.choice(names), f"r{j}", rng.choice(names), chunk_id=f"c#{j}")
                for j in range(rng.randint(1, 40))
            ]
            store = build_graph(triples)
            seeds = set(rng.sample(names, rng.randint(1, 3)))
            hops = rng.randint(0, 3)
            got = {t.triple_id for t in expand_neighborhood(store, seeds, hops)}
            assert got == bfs_oracle(triples, seeds, hops)

    def test_monotone_in_hops(self, acquisition_store):
        previous = set()
        for hops in range(4):
            current = {
                t.triple_id
                for t in expand_neighborhood(acquisition_store, {"microsoft"}, hops)
            }
            assert previous <= current
            previous = current

    def test_negative_hops_rejected(self, acquisition_store):
        with pytest.raises(DataError, match="hops"):
            expand_neighborhood(acquisition_store, {"microsoft"}, hops=-1)


class TestRenderTriples:
    def test_single_line(self):
        t = make_triple("a", "r", "b", doc_id="doc-a")
        rendered = render_triples([t], 10_000)
        assert rendered.text == "a | r | b (source: doc-a)"
        assert rendered.included_ids == (t.triple_id,)
        assert rendered.dropped == 0

    def test_budget_below_first_line_drops_all(self):
        t = make_triple("a", "r", "b")
        rendered = render_triples([t], 5)
        assert rendered.text == ""
        assert rendered.dropped == 1

    def test_fixed_width_truncation(self):
        # 10 identical-length lines; budget for exactly 7.
        triples = [
            make_triple(f"s{i}", "rr", f"o{i}", chunk_id=f"c#{i}", doc_id="dd")
            for i in range(10)
        ]
        line_len = len("s0 | rr | o0 (source: dd)")
        budget = 7 * line_len + 6  # six newline separators
        rendered = render_triples(triples, budget)
        assert len(rendered.text.splitlines()) == 7
        assert rendered.dropped == 3


class TestExportDot:
    def test_fixture_has_four_labeled_edges(self, acquisition_store, tmp_path):
        path = tmp_path / "graph.dot"
        export_dot(acquisition_store, path)
        text = path.read_text()
        edges = re.findall(r'"[^"]+" -> "[^"]+" \[label="[^"]+"\];', text)
        assert len(edges) == 4
        assert text.startswith("digraph G {")
        assert text.rstrip().endswith("}")

    def test_empty_store_skeleton(self, tmp_path):
        path = tmp_path / "empty.dot"
        export_dot(build_graph([]), path)
        assert path.read_text() == "digraph G {\n}\n"

    def test_quotes_escaped(self, tmp_path):
        t = make_triple('say "hi"', "rel", "other")
        path = tmp_path / "q.dot"
        export_dot(build_graph([t]), path)
        assert '\\"hi\\"' in path.read_text()
