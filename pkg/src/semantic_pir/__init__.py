"""Semantic private information retrieval over replicated databases.

Messages of different lengths and popularities are retrieved from ``N``
non-colluding replicas without revealing which one is wanted.
"""
from .analysis import (
    CapacityReport,
    capacity_report,
    classical_capacity,
    gain_condition,
    semantic_capacity,
    zero_pad_rate,
)
from .core import (
    Answer,
    Catalog,
    MessageMeta,
    MessageStore,
    Query,
    QueryEntry,
    Segment,
    Transcript,
    answer_query,
    expected_length,
    make_catalog,
    realized_download,
    validate_catalog,
)

__version__ = "0.1.0"

__all__ = [
    "Answer",
    "CapacityReport",
    "Catalog",
    "MessageMeta",
    "MessageStore",
    "Query",
    "QueryEntry",
    "Segment",
    "Transcript",
    "answer_query",
    "capacity_report",
    "classical_capacity",
    "expected_length",
    "gain_condition",
    "make_catalog",
    "realized_download",
    "semantic_capacity",
    "validate_catalog",
    "zero_pad_rate",
]
