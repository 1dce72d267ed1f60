"""Deterministic k-sum retrieval with per-message subpacketization.

Each subpacket repetition downloads, from every database, ``upsilon[k]``
single bits of every message ``k`` and ``(N-1)**(t-1) * upsilon[max(S)]``
XOR sums over every message subset ``S`` of size ``t >= 2``.  Sums that
include the desired message pair one fresh desired bit with a sum of the
other messages that was downloaded on its own from a different database.
The whole message is covered after ``alpha`` repetitions.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import (
    Catalog,
    MalformedAnswer,
    MissingAnswer,
    Query,
    QueryEntry,
    Segment,
    SemanticPIRError,
    bits_to_int,
    check_answers,
    padding_report,
)


class LengthNotMultipleOfNK(SemanticPIRError, ValueError):
    def __init__(self, message_id, length, multiple):
        self.message_id = message_id
        self.length = length
        self.multiple = multiple
        super().__init__(f"message {message_id!r} has {length} bits, not a multiple of N^K = {multiple}")


class ExhaustedBitPool(SemanticPIRError, AssertionError):
    pass


@dataclass(frozen=True)
class RetrievalParams:
    n_databases: int
    upsilon: tuple[int, ...]
    alpha: int
    subpacketizations: tuple[int, ...]
    d_sub: int

    @property
    def K(self) -> int:
        return len(self.upsilon)


def required_multiple(catalog: Catalog) -> int:
    return catalog.N ** catalog.K


def padding_needed(catalog: Catalog) -> dict:
    """Per message id, the bits of padding needed to reach a multiple of N^K."""
    return padding_report(catalog, required_multiple(catalog))


def _subpacketization(N: int, upsilon, j: int) -> int:
    # j is 1-based
    K = len(upsilon)
    return N**j * upsilon[j - 1] + (N - 1) * sum(N ** (i - 1) * upsilon[i - 1] for i in range(j + 1, K + 1))


def compute_params(catalog: Catalog) -> RetrievalParams:
    """Solve the upper-triangular length system for the stage counts and alpha."""
    N, K, L = catalog.N, catalog.K, catalog.lengths
    mult = N**K
    for m in catalog.messages:
        if m.length_bits % mult:
            raise LengthNotMultipleOfNK(m.id, m.length_bits, mult)
    raw = []
    for i in range(1, K + 1):
        tail = sum(L[j - 1] // N**j for j in range(i + 1, K + 1))
        raw.append(L[i - 1] // N**i - (N - 1) * tail)
    alpha = math.gcd(*raw)
    upsilon = tuple(v // alpha for v in raw)
    subs = tuple(_subpacketization(N, upsilon, j) for j in range(1, K + 1))
    d_sub = sum(v * N**i for i, v in enumerate(upsilon, start=1))
    params = RetrievalParams(N, upsilon, alpha, subs, d_sub)
    assert all(a >= b for a, b in zip(upsilon, upsilon[1:])) and upsilon[-1] >= 1
    assert all(alpha * U == Lj for U, Lj in zip(subs, L))
    assert alpha * d_sub == sum(Fraction(Lj, N ** (i - 1)) for i, Lj in enumerate(L, start=1))
    return params


def useful_bits(params: RetrievalParams, j: int) -> int:
    """Desired bits recovered per subpacket when message ``j`` (1-based) is wanted."""
    return _subpacketization(params.n_databases, params.upsilon, j)


def download_cost(params: RetrievalParams) -> int:
    """Bits downloaded per subpacket; the full retrieval costs ``alpha`` times this."""
    return params.d_sub


def entry_counts(params: RetrievalParams) -> dict[tuple[int, ...], int]:
    """Entries of each message subset that every database receives per subpacket."""
    N, K = params.n_databases, params.K
    counts = {}
    for t in range(1, K + 1):
        for S in itertools.combinations(range(1, K + 1), t):
            counts[S] = (N - 1) ** (t - 1) * params.upsilon[S[-1] - 1]
    return counts


@dataclass(frozen=True)
class ReconstructionPlan:
    """Where each desired bit can be read off the answers.

    ``positions[k]`` is recovered as the XOR of answer ``main_idx[k]`` of
    database ``main_db[k]`` and, if ``side_db[k] > 0``, answer
    ``side_idx[k]`` of database ``side_db[k]``.
    """

    desired: int
    length_bits: int
    positions: np.ndarray
    main_db: np.ndarray
    main_idx: np.ndarray
    side_db: np.ndarray
    side_idx: np.ndarray


class _Pool:
    """Consumes a permuted list of bit positions front to back."""

    def __init__(self, perm: np.ndarray, message: int):
        self.perm = perm.tolist()
        self.cursor = 0
        self.message = message

    def take(self) -> int:
        if self.cursor >= len(self.perm):
            raise ExhaustedBitPool(f"ran out of fresh bits of message {self.message}")
        p = self.perm[self.cursor]
        self.cursor += 1
        return p


def build_queries(catalog: Catalog, params: RetrievalParams, desired: int, seed=None):
    """Build the N queries retrieving message ``desired`` (1-based).

    Returns ``(queries, plan)``.  All randomness (one uniform permutation of
    the bit positions of every message) comes from ``seed``.
    """
    N, K = catalog.N, catalog.K
    if not 1 <= desired <= K:
        raise IndexError(f"desired index {desired} outside 1..{K}")
    rng = np.random.default_rng(seed)
    pools = {m: _Pool(rng.permutation(catalog.length(m)), m) for m in range(1, K + 1)}
    counts = entry_counts(params)
    subsets = list(counts)

    # per database: list of (segments, desired_position or -1, side_ref or None)
    raw = [[] for _ in range(N)]
    for _ in range(params.alpha):
        # entries not involving the desired message, all fresh bits;
        # produced[S][n] keeps them in emission order for side-information use
        produced = {}
        for S in subsets:
            if desired in S:
                continue
            per_db = []
            for n in range(N):
                made = []
                for _ in range(counts[S]):
                    segs = tuple(Segment(m, pools[m].take(), 1) for m in S)
                    raw[n].append((segs, -1, None))
                    made.append(len(raw[n]) - 1)
                per_db.append(made)
            produced[S] = per_db
        for S in subsets:
            if desired not in S:
                continue
            rest = tuple(m for m in S if m != desired)
            need = counts[S]
            for n in range(N):
                if not rest:
                    for _ in range(need):
                        p = pools[desired].take()
                        raw[n].append(((Segment(desired, p, 1),), p, None))
                    continue
                # side information cycles through databases n+1, n+2, ...
                per_other = need // (N - 1)
                for step in range(1, N):
                    m_db = (n + step) % N
                    source = produced[rest][m_db]
                    if per_other > len(source):
                        raise ExhaustedBitPool(f"not enough side information of type {rest}")
                    for src in source[:per_other]:
                        side_segs = raw[m_db][src][0]
                        p = pools[desired].take()
                        segs = tuple(sorted(side_segs + (Segment(desired, p, 1),)))
                        raw[n].append((segs, p, (m_db, src)))

    queries = []
    new_index = []
    for n in range(N):
        order = sorted(range(len(raw[n])), key=lambda k, r=raw[n]: _key(r[k][0]))
        inverse = [0] * len(order)
        for new, old in enumerate(order):
            inverse[old] = new
        new_index.append(inverse)
        queries.append(Query(n + 1, tuple(QueryEntry(raw[n][k][0]) for k in order)))

    Lj = catalog.length(desired)
    positions, main_db, main_idx, side_db, side_idx = ([] for _ in range(5))
    for n in range(N):
        for old, (segs, p, side) in enumerate(raw[n]):
            if p < 0:
                continue
            positions.append(p)
            main_db.append(n + 1)
            main_idx.append(new_index[n][old])
            if side is None:
                side_db.append(0)
                side_idx.append(0)
            else:
                side_db.append(side[0] + 1)
                side_idx.append(new_index[side[0]][side[1]])
    if len(positions) != Lj:
        raise ExhaustedBitPool(f"plan covers {len(positions)} of {Lj} desired bits")
    plan = ReconstructionPlan(
        desired, Lj, *(np.asarray(a, dtype=np.int64) for a in (positions, main_db, main_idx, side_db, side_idx))
    )
    return queries, plan


def _key(segs):
    return (len(segs), tuple(s[0] for s in segs), tuple(s[1] for s in segs), tuple(s[2] for s in segs))


def reconstruct(plan: ReconstructionPlan, answers, queries=None) -> int:
    """Recover the desired message as an integer of ``plan.length_bits`` bits."""
    answers = list(answers)
    if queries is not None:
        check_answers(queries, answers)
    for n, a in enumerate(answers, start=1):
        if a is None:
            raise MissingAnswer(f"no answer from database {n}")
    N = int(max(plan.main_db.max(initial=0), plan.side_db.max(initial=0)))
    if len(answers) < N:
        raise MissingAnswer(f"no answer from database {len(answers) + 1}")
    offsets = np.zeros(len(answers) + 1, dtype=np.int64)
    flat = []
    for n, a in enumerate(answers):
        if any(L != 1 for L in a.lengths):
            raise MalformedAnswer(f"database {n + 1} returned a multi-bit answer to a single-bit entry")
        offsets[n + 1] = offsets[n] + len(a.values)
        flat.extend(a.values)
    flat = np.asarray(flat, dtype=np.uint8)
    if flat.size and flat.max() > 1:
        raise MalformedAnswer("answer value does not fit in one bit")
    main = plan.main_idx + offsets[plan.main_db - 1]
    if main.size and (np.any(plan.main_idx >= offsets[plan.main_db] - offsets[plan.main_db - 1])):
        raise MalformedAnswer("answer shorter than its query")
    bits = flat[main]
    has_side = plan.side_db > 0
    side = plan.side_idx[has_side] + offsets[plan.side_db[has_side] - 1]
    bits[has_side] ^= flat[side]
    out = np.zeros(plan.length_bits, dtype=np.uint8)
    out[plan.positions] = bits
    return bits_to_int(out)

