"""Multi-document financial question answering.

Three pipelines over a filing corpus: plain retrieval (RAG), tag-filtered
retrieval (RAG_SEM), and tag-filtered retrieval with knowledge-graph context
(KG_RAG), plus a nine-metric evaluation harness and an offline deterministic
provider for reproducible runs.
"""

__version__ = "0.1.0"
