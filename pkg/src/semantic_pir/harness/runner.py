"""End-to-end retrievals: build queries, dispatch, reconstruct, account."""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .. import scheme1, scheme2
from ..analysis import capacity_report, semantic_capacity
from ..core import Catalog, MessageStore, Transcript, check_answers, realized_download
from . import wire
from .transport import dispatch


class ReconstructionMismatch(AssertionError):
    pass


@dataclass
class RetrievalResult:
    transcript: Transcript
    recovered: int
    option_index: int | None = None


def retrieve(
    catalog: Catalog,
    databases,
    desired: int,
    scheme: str = "det",
    seed=None,
    option: scheme2.QueryOption | None = None,
    params: scheme1.RetrievalParams | None = None,
    verify_store: MessageStore | None = None,
    timeout: float | None = None,
) -> RetrievalResult:
    """Run one retrieval of message ``desired`` (1-based catalog index)."""
    option_index = None
    if scheme == "det":
        params = params or scheme1.compute_params(catalog)
        queries, plan = scheme1.build_queries(catalog, params, desired, seed)
    elif scheme == "stoch":
        scheme2.check_divisibility(catalog)
        if option is None:
            option = scheme2.sample_option(catalog, desired, seed)
        option_index = option.index
        queries, plan = scheme2.build_queries_for_option(catalog, desired, option)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")

    answers = dispatch(databases, queries, timeout)
    check_answers(queries, answers)
    if scheme == "det":
        recovered = scheme1.reconstruct(plan, answers)
    else:
        recovered = scheme2.reconstruct(plan, answers)

    down = sum(a.bits for a in answers)
    t = Transcript(desired, tuple(queries), tuple(answers), down, catalog.length(desired))
    assert realized_download(t) == down
    if verify_store is not None and recovered != verify_store.message(desired):
        raise ReconstructionMismatch(f"message {desired} was not recovered exactly")
    return RetrievalResult(t, recovered, option_index)


def encode_transcript(t: Transcript) -> bytes:
    """Byte serialisation used to compare transcripts across transports."""
    parts = [struct.pack(">IQQI", t.desired_index, t.downloaded_bits, t.useful_bits, len(t.queries))]
    for q, a in zip(t.queries, t.answers):
        parts.append(struct.pack(">I", q.database_index))
        parts.append(wire.encode_frame(wire.QUERY, wire.encode_query(q.entries)))
        parts.append(wire.encode_frame(wire.ANSWER, wire.encode_answer(a)))
    return b"".join(parts)


def transcript_digest(t: Transcript) -> str:
    return hashlib.sha256(encode_transcript(t)).hexdigest()


def transcript_summary(catalog: Catalog, result: RetrievalResult) -> dict:
    t = result.transcript
    out = {
        "desired": catalog.messages[t.desired_index - 1].id,
        "desired_index": t.desired_index,
        "downloaded_bits": t.downloaded_bits,
        "useful_bits": t.useful_bits,
        "upload_entries": sum(len(q.entries) for q in t.queries),
    }
    if result.option_index is not None:
        out["option_index"] = result.option_index
    return out


def exhaustive_stochastic(catalog: Catalog, databases, desired: int, verify_store=None, timeout=None):
    """Retrieve through every one of the N**K options; returns the list of results."""
    return [
        retrieve(catalog, databases, desired, "stoch", option=opt, verify_store=verify_store, timeout=timeout)
        for opt in scheme2.enumerate_options(catalog, desired)
    ]


@dataclass
class BenchResult:
    trials: int
    useful_bits: int
    downloaded_bits: int
    summaries: list[dict]
    capacity: Fraction

    @property
    def empirical_rate(self) -> Fraction:
        return Fraction(self.useful_bits, self.downloaded_bits)


def bench(
    catalog: Catalog,
    databases,
    scheme: str,
    trials: int,
    seed=0,
    verify_store: MessageStore | None = None,
    timeout: float | None = None,
) -> BenchResult:
    """Draw desired messages from the priors and retrieve each one.

    Returns total useful over total downloaded bits, an estimate of the
    expected rate, alongside the exact capacity.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    ss = np.random.SeedSequence(seed)
    pick_seq, retr_seq = ss.spawn(2)
    priors = np.array([float(p) for p in catalog.priors])
    desired = np.random.default_rng(pick_seq).choice(catalog.K, size=trials, p=priors / priors.sum()) + 1
    retrieval_rng = np.random.default_rng(retr_seq)
    params = scheme1.compute_params(catalog) if scheme == "det" else None
    useful = down = 0
    summaries = []
    for d in desired.tolist():
        r = retrieve(
            catalog,
            databases,
            d,
            scheme,
            seed=retrieval_rng,
            params=params,
            verify_store=verify_store,
            timeout=timeout,
        )
        useful += r.transcript.useful_bits
        down += r.transcript.downloaded_bits
        summaries.append(transcript_summary(catalog, r))
    return BenchResult(trials, useful, down, summaries, semantic_capacity(catalog))


def analytic_rate(catalog: Catalog, desired: int) -> Fraction:
    return capacity_report(catalog).per_message_rates[desired - 1]
