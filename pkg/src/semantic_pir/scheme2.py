"""Stochastic block retrieval: one of N**K structural query sets, chosen uniformly.

Every message is cut into ``N - 1`` equal blocks.  An option fixes a cyclic
shift and, for every undesired message, either nothing or one of its
blocks.  The chosen undesired blocks add up to a side sum ``s``; ``N - 1``
databases return ``W_desired^m + s`` and the remaining one returns ``s``.

Option indices are mixed-radix numbers: the shift is the most significant
digit, followed by one base-``N`` digit per undesired message in ascending
message order (``0`` = absent, ``b`` = block ``b``).
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

import numpy as np

from .core import (
    Catalog,
    MalformedAnswer,
    MissingAnswer,
    Query,
    QueryEntry,
    Segment,
    SemanticPIRError,
    check_answers,
    padding_report,
)


class LengthNotMultipleOfNMinus1(SemanticPIRError, ValueError):
    def __init__(self, message_id, length, multiple):
        self.message_id = message_id
        self.length = length
        self.multiple = multiple
        super().__init__(f"message {message_id!r} has {length} bits, not a multiple of N-1 = {multiple}")


@dataclass(frozen=True)
class QueryOption:
    index: int
    shift: int
    side_combo: tuple[tuple[int, int], ...]  # (message, block) for every present side block

    @property
    def side_size(self) -> int:
        return len(self.side_combo)


def check_divisibility(catalog: Catalog) -> None:
    q = catalog.N - 1
    for m in catalog.messages:
        if m.length_bits % q:
            raise LengthNotMultipleOfNMinus1(m.id, m.length_bits, q)


def padding_needed(catalog: Catalog) -> dict:
    return padding_report(catalog, catalog.N - 1)


def block_len(catalog: Catalog, message: int) -> int:
    return catalog.length(message) // (catalog.N - 1)


def block_segment(catalog: Catalog, message: int, block: int) -> Segment:
    """Block ``block`` (1-based) of ``message``."""
    b = block_len(catalog, message)
    return Segment(message, (block - 1) * b, b)


def option_count(catalog: Catalog) -> int:
    return catalog.N**catalog.K


def option_from_index(catalog: Catalog, desired: int, index: int) -> QueryOption:
    N, K = catalog.N, catalog.K
    if not 0 <= index < N**K:
        raise IndexError(f"option index {index} outside 0..{N**K - 1}")
    others = [m for m in range(1, K + 1) if m != desired]
    digits = []
    rest = index
    for _ in others:
        rest, d = divmod(rest, N)
        digits.append(d)
    digits.reverse()
    combo = tuple((m, d) for m, d in zip(others, digits) if d)
    return QueryOption(index, rest, combo)


def enumerate_options(catalog: Catalog, desired: int) -> list[QueryOption]:
    """All N**K options, shift-major then side blocks in lexicographic order."""
    check_divisibility(catalog)
    return list(iter_options(catalog, desired))


def iter_options(catalog: Catalog, desired: int) -> Iterator[QueryOption]:
    for i in range(option_count(catalog)):
        yield option_from_index(catalog, desired, i)


def sample_option(catalog: Catalog, desired: int, seed=None) -> QueryOption:
    """Uniform draw over the N**K options: one uniform base-N digit per position."""
    return option_from_index(catalog, desired, sample_option_indices(catalog, 1, seed)[0])


def sample_option_indices(catalog: Catalog, size: int, seed=None) -> list[int]:
    N, K = catalog.N, catalog.K
    rng = np.random.default_rng(seed)
    digits = rng.integers(0, N, size=(size, K))
    out = []
    for row in digits.tolist():
        idx = 0
        for d in row:
            idx = idx * N + d
        out.append(idx)
    return out


@dataclass(frozen=True)
class BlockPlan:
    """Database holding each desired block, and the one holding the bare side sum."""

    desired: int
    block_bits: int
    block_dbs: tuple[int, ...]
    side_db: int | None


def _db(shift: int, m: int, N: int) -> int:
    return (shift + m - 1) % N + 1


def build_queries_for_option(catalog: Catalog, desired: int, option: QueryOption):
    """Return ``(queries, plan)`` for one structural option."""
    N = catalog.N
    side = tuple(block_segment(catalog, m, b) for m, b in option.side_combo)
    per_db: dict[int, tuple[QueryEntry, ...]] = {}
    block_dbs = []
    for m in range(1, N):
        n = _db(option.shift, m, N)
        segs = tuple(sorted(side + (block_segment(catalog, desired, m),)))
        per_db[n] = (QueryEntry(segs),)
        block_dbs.append(n)
    side_db = _db(option.shift, N, N)
    per_db[side_db] = (QueryEntry(tuple(sorted(side))),) if side else ()
    queries = [Query(n, per_db[n]) for n in range(1, N + 1)]
    plan = BlockPlan(desired, block_len(catalog, desired), tuple(block_dbs), side_db if side else None)
    return queries, plan


def reconstruct(plan: BlockPlan, answers, queries=None) -> int:
    """Recover the desired message by XOR-cancelling the side sum from each block."""
    answers = list(answers)
    if queries is not None:
        check_answers(queries, answers)

    def single(n):
        if n > len(answers) or answers[n - 1] is None:
            raise MissingAnswer(f"no answer from database {n}")
        a = answers[n - 1]
        if len(a.values) != 1:
            raise MalformedAnswer(f"database {n} returned {len(a.values)} values, expected 1")
        return a.lengths[0], a.values[0]

    s = 0
    if plan.side_db is not None:
        _, s = single(plan.side_db)
    b = plan.block_bits
    out = 0
    for n in plan.block_dbs:
        length, v = single(n)
        if length < b:
            raise MalformedAnswer(f"database {n} answered {length} bits for a {b}-bit block")
        blk = v ^ s
        if blk.bit_length() > b:
            raise MalformedAnswer(f"database {n}: side sum does not cancel")
        out = (out << b) | blk
    return out


def expected_download(catalog: Catalog) -> Fraction:
    """Mean download over the uniform option draw, the same for every desired message."""
    N = catalog.N
    return sum((Fraction(L, N ** (i - 1)) for i, L in enumerate(catalog.lengths, start=1)), Fraction(0))


def option_download(catalog: Catalog, desired: int, option: QueryOption) -> int:
    queries, _ = build_queries_for_option(catalog, desired, option)
    return sum(q.download_bits for q in queries)
