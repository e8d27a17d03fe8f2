import pytest

from kgrag.config import Settings
from kgrag.corpus import Chunk, TagSet, Triple
from kgrag.kgraph import build_graph, triple_id_for
from kgrag.provider import MockProvider


@pytest.fixture
def mock_provider():
    return MockProvider(seed=0, dim=32)


@pytest.fixture
def settings():
    return Settings(offline=True)


def make_triple(subject, predicate, obj, chunk_id="doc-a#0", doc_id="doc-a"):
    return Triple(
        triple_id=triple_id_for(subject, predicate, obj, chunk_id),
        subject=subject,
        predicate=predicate,
        object=obj,
        doc_id=doc_id,
        chunk_id=chunk_id,
    )


# The four-fact fixture used across graph tests: two subjects share a node,
# objects include value strings, 7 distinct nodes in total.
ACQUISITION_TRIPLES = (
    ("googlecloud", "operatingincome", "$1.7b"),
    ("alphabet", "r&dinvestments", "$45b"),
    ("microsoft", "acquired", "zenimaxmedia"),
    ("microsoft", "windowsoemrevenue", "25%decrease"),
)


@pytest.fixture
def acquisition_store():
    triples = [make_triple(s, p, o) for s, p, o in ACQUISITION_TRIPLES]
    return build_graph(triples)


def make_chunk(chunk_id, text, tags=None, doc_id=None, seq_no=0):
    return Chunk(
        chunk_id=chunk_id,
        doc_id=doc_id or chunk_id.split("#")[0],
        seq_no=seq_no,
        text=text,
        approx_tokens=max(1, len(text.split())),
        tags=TagSet.from_raw(tags or {}),
    )
