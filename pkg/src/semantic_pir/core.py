"""Domain types, catalog validation and the database answer function.

Bit-strings are represented as Python integers read most-significant-bit
first, paired with an explicit bit length.  Bit ``0`` of a message is its
most significant bit.  XOR of integers right-aligns its operands, which is
exactly "zero-pad the shorter summand on the left".
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Hashable, Iterable, NamedTuple, Sequence

import numpy as np


class SemanticPIRError(Exception):
    """Base class for all errors raised by this package."""


class CatalogError(SemanticPIRError, ValueError):
    pass


class EmptyCatalog(CatalogError):
    pass


class NonPositivePrior(CatalogError):
    pass


class PriorsDoNotSumToOne(CatalogError):
    pass


class TooFewDatabases(CatalogError):
    pass


class InvalidLength(CatalogError):
    pass


class SegmentOutOfRange(SemanticPIRError, IndexError):
    pass


class MalformedAnswer(SemanticPIRError, ValueError):
    pass


class MissingAnswer(SemanticPIRError, ValueError):
    pass


@dataclass(frozen=True)
class MessageMeta:
    id: Hashable
    length_bits: int
    prior: Fraction

    def __post_init__(self):
        if not isinstance(self.prior, Fraction):
            object.__setattr__(self, "prior", Fraction(self.prior))
        if int(self.length_bits) != self.length_bits or self.length_bits < 1:
            raise InvalidLength(f"message {self.id!r}: length must be a positive integer, got {self.length_bits}")
        if self.prior <= 0:
            raise NonPositivePrior(f"message {self.id!r}: prior must be > 0, got {self.prior}")


@dataclass(frozen=True)
class Catalog:
    """Messages sorted by non-increasing length, indexed 1..K in that order."""

    n_databases: int
    messages: tuple[MessageMeta, ...]

    @property
    def K(self) -> int:
        return len(self.messages)

    @property
    def N(self) -> int:
        return self.n_databases

    @property
    def lengths(self) -> tuple[int, ...]:
        return tuple(m.length_bits for m in self.messages)

    @property
    def priors(self) -> tuple[Fraction, ...]:
        return tuple(m.prior for m in self.messages)

    @property
    def ids(self) -> tuple:
        return tuple(m.id for m in self.messages)

    def length(self, index: int) -> int:
        """Length of message ``index`` (1-based)."""
        return self.messages[index - 1].length_bits

    def index_of(self, message_id) -> int:
        """1-based catalog index of the message with identifier ``message_id``."""
        for i, m in enumerate(self.messages, start=1):
            if m.id == message_id:
                return i
        # ids given on the command line arrive as strings
        for i, m in enumerate(self.messages, start=1):
            if str(m.id) == str(message_id):
                return i
        raise KeyError(message_id)


def validate_catalog(raw: Iterable[MessageMeta], n_databases: int) -> Catalog:
    """Check priors and database count, and sort messages by decreasing length.

    The sort is stable, so equal-length messages keep their input order.
    Use :meth:`Catalog.index_of` to map caller identifiers to catalog indices.
    """
    raw = list(raw.messages if isinstance(raw, Catalog) else raw)
    if not raw:
        raise EmptyCatalog("catalog must contain at least one message")
    if n_databases < 2:
        raise TooFewDatabases(f"need at least 2 databases, got {n_databases}")
    for m in raw:
        if m.prior <= 0:
            raise NonPositivePrior(f"message {m.id!r}: prior must be > 0, got {m.prior}")
    total = sum((m.prior for m in raw), Fraction(0))
    if total != 1:
        raise PriorsDoNotSumToOne(f"priors sum to {total}, expected 1")
    ordered = sorted(raw, key=lambda m: -m.length_bits)
    return Catalog(int(n_databases), tuple(ordered))


def make_catalog(lengths: Sequence[int], priors: Sequence, n_databases: int, ids=None) -> Catalog:
    """Convenience constructor; ``ids`` default to 1..K in input order."""
    if ids is None:
        ids = range(1, len(lengths) + 1)
    metas = [MessageMeta(i, int(L), Fraction(p)) for i, L, p in zip(ids, lengths, priors)]
    return validate_catalog(metas, n_databases)


def uniform_priors(k: int) -> list[Fraction]:
    return [Fraction(1, k)] * k


def expected_length(catalog: Catalog) -> Fraction:
    return sum((m.prior * m.length_bits for m in catalog.messages), Fraction(0))


class Segment(NamedTuple):
    """A contiguous run of bits ``[start_bit, start_bit + length_bits)`` of one message."""

    message_index: int
    start_bit: int
    length_bits: int = 1


@dataclass(frozen=True, slots=True)
class QueryEntry:
    """XOR of its segments, each right-aligned to the longest one."""

    segments: tuple[Segment, ...]

    def __post_init__(self):
        if not self.segments:
            raise ValueError("a query entry needs at least one segment")
        idx = [s[0] for s in self.segments]
        if len(set(idx)) != len(idx):
            raise ValueError(f"entry repeats a message index: {idx}")

    @property
    def answer_len(self) -> int:
        return max(s[2] for s in self.segments)

    @property
    def message_indices(self) -> tuple[int, ...]:
        return tuple(sorted(s[0] for s in self.segments))

    def sort_key(self):
        segs = sorted(self.segments)
        return (len(segs), tuple(s[0] for s in segs), tuple(s[1] for s in segs), tuple(s[2] for s in segs))


def entry(*segments) -> QueryEntry:
    """Build an entry from ``Segment`` objects or ``(message, start, length)`` tuples."""
    return QueryEntry(tuple(sorted(Segment(*s) for s in segments)))


def canonical_order(entries: Iterable[QueryEntry]) -> list[QueryEntry]:
    """Structural order: segment count, message-index tuple, then start offsets."""
    return sorted(entries, key=QueryEntry.sort_key)


@dataclass(frozen=True)
class Query:
    database_index: int
    entries: tuple[QueryEntry, ...] = ()

    @property
    def download_bits(self) -> int:
        return sum(e.answer_len for e in self.entries)


@dataclass(frozen=True)
class Answer:
    """One value per query entry; ``values[e]`` fits in ``lengths[e]`` bits."""

    lengths: tuple[int, ...]
    values: tuple[int, ...]

    def __post_init__(self):
        if len(self.lengths) != len(self.values):
            raise MalformedAnswer("answer lengths and values differ in count")

    @property
    def bits(self) -> int:
        return sum(self.lengths)


@dataclass(frozen=True)
class MessageStore:
    """The K messages held (identically) by every database."""

    lengths: tuple[int, ...]
    values: tuple[int, ...]

    def __post_init__(self):
        if len(self.lengths) != len(self.values):
            raise ValueError("store lengths and values differ in count")
        for i, (L, v) in enumerate(zip(self.lengths, self.values), start=1):
            if L < 1 or v < 0 or v.bit_length() > L:
                raise ValueError(f"message {i}: value does not fit in {L} bits")

    @property
    def K(self) -> int:
        return len(self.lengths)

    @classmethod
    def from_bits(cls, messages: Sequence[Sequence[int]]) -> "MessageStore":
        return cls(tuple(len(m) for m in messages), tuple(bits_to_int(m) for m in messages))

    @classmethod
    def random(cls, lengths: Sequence[int], seed=None) -> "MessageStore":
        rng = np.random.default_rng(seed)
        return cls.from_bits([rng.integers(0, 2, size=int(L), dtype=np.uint8) for L in lengths])

    def message(self, index: int) -> int:
        return self.values[index - 1]

    def bits(self, index: int) -> np.ndarray:
        return int_to_bits(self.values[index - 1], self.lengths[index - 1])

    @cached_property
    def _bit_bytes(self) -> tuple[bytes, ...]:
        return tuple(int_to_bits(v, L).tobytes() for v, L in zip(self.values, self.lengths))

    def matches(self, catalog: Catalog) -> bool:
        return self.lengths == catalog.lengths


def bits_to_int(bits: Sequence[int]) -> int:
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size == 0:
        return 0
    pad = (-bits.size) % 8
    packed = np.packbits(bits).tobytes()
    return int.from_bytes(packed, "big") >> pad


def int_to_bits(value: int, length: int) -> np.ndarray:
    nbytes = (length + 7) // 8
    pad = nbytes * 8 - length
    raw = np.frombuffer((value << pad).to_bytes(nbytes, "big"), dtype=np.uint8)
    return np.unpackbits(raw)[:length]


def extract(store: MessageStore, seg: Segment) -> int:
    m, start, length = seg
    if not 1 <= m <= store.K:
        raise SegmentOutOfRange(f"message index {m} outside 1..{store.K}")
    L = store.lengths[m - 1]
    if start < 0 or length < 1 or start + length > L:
        raise SegmentOutOfRange(f"segment [{start}, {start + length}) outside message {m} of {L} bits")
    if length == 1:
        return store._bit_bytes[m - 1][start]
    return (store.values[m - 1] >> (L - start - length)) & ((1 << length) - 1)


def answer_entry(store: MessageStore, e: QueryEntry) -> int:
    acc = 0
    for seg in e.segments:
        acc ^= extract(store, seg)
    return acc


def answer_query(store: MessageStore, query: Query) -> Answer:
    """Answer every entry of ``query`` from ``store``.  Pure: no state is touched."""
    return Answer(
        tuple(e.answer_len for e in query.entries),
        tuple(answer_entry(store, e) for e in query.entries),
    )


@dataclass(frozen=True)
class Transcript:
    desired_index: int
    queries: tuple[Query, ...]
    answers: tuple[Answer, ...]
    downloaded_bits: int
    useful_bits: int
    extra: dict = field(default_factory=dict, compare=False)


def realized_download(transcript: Transcript) -> int:
    return sum(q.download_bits for q in transcript.queries)


def check_answers(queries: Sequence[Query], answers: Sequence[Answer | None]) -> None:
    """Raise if any answer is missing or does not fit its query."""
    if len(answers) != len(queries):
        raise MissingAnswer(f"expected {len(queries)} answers, got {len(answers)}")
    for q, a in zip(queries, answers):
        if a is None:
            raise MissingAnswer(f"no answer from database {q.database_index}")
        if len(a.values) != len(q.entries):
            raise MalformedAnswer(
                f"database {q.database_index}: {len(a.values)} answers for {len(q.entries)} entries"
            )
        for e, L, v in zip(q.entries, a.lengths, a.values):
            if L != e.answer_len or v < 0 or v.bit_length() > L:
                raise MalformedAnswer(f"database {q.database_index}: answer does not fit entry length {e.answer_len}")


def padding_report(catalog: Catalog, multiple: int) -> dict:
    """Bits of padding each message would need to become a multiple of ``multiple``."""
    return {m.id: (-m.length_bits) % multiple for m in catalog.messages}
