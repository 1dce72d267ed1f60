"""Exact-rational capacity formulas and the comparisons built on them."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .core import Catalog, expected_length


@dataclass(frozen=True)
class CapacityReport:
    semantic_capacity: Fraction
    classical_capacity: Fraction
    zero_pad_rate: Fraction
    gain_lhs: Fraction
    gain: bool
    per_message_rates: tuple[Fraction, ...]
    expected_download: Fraction


def weighted_length_sum(lengths: Sequence[int], N: int) -> Fraction:
    """``L_1 + L_2/N + ... + L_K/N**(K-1)`` for lengths in the given order."""
    return sum((Fraction(L, N**i) for i, L in enumerate(lengths)), Fraction(0))


def semantic_capacity(catalog: Catalog) -> Fraction:
    return expected_length(catalog) / weighted_length_sum(catalog.lengths, catalog.N)


def rate_bound(catalog: Catalog, order: Sequence[int]) -> Fraction:
    """Upper bound on the rate obtained from one ordering (1-based indices) of the messages.

    The tightest bound over all orderings is the descending-length one,
    which is :func:`semantic_capacity`.
    """
    lengths = [catalog.length(i) for i in order]
    return expected_length(catalog) / weighted_length_sum(lengths, catalog.N)


def classical_capacity(N: int, K: int) -> Fraction:
    return 1 / sum((Fraction(1, N**i) for i in range(K)), Fraction(0))


def gain_condition(catalog: Catalog) -> tuple[Fraction, bool]:
    """``sum_i N**-(i-1) (L_i - E[L])`` and whether it is strictly negative.

    The equivalent double-sum form is evaluated as a cross-check.
    """
    N, L, p = catalog.N, catalog.lengths, catalog.priors
    EL = expected_length(catalog)
    lhs = sum((Fraction(Li - EL) / N**i for i, Li in enumerate(L)), Fraction(0))
    double = sum(
        (pj * Fraction(Li - Lj, N**i) for i, Li in enumerate(L) for pj, Lj in zip(p, L)),
        Fraction(0),
    )
    assert (lhs < 0) == (double < 0) and lhs == double
    return lhs, lhs < 0


def zero_pad_rate(catalog: Catalog) -> Fraction:
    """Rate of classical PIR after padding every message to the longest length."""
    N, K = catalog.N, catalog.K
    return expected_length(catalog) / (max(catalog.lengths) * weighted_length_sum([1] * K, N))


def capacity_report(catalog: Catalog) -> CapacityReport:
    C = semantic_capacity(catalog)
    ED = weighted_length_sum(catalog.lengths, catalog.N)
    rates = tuple(Fraction(L) / ED for L in catalog.lengths)
    lhs, gain = gain_condition(catalog)
    report = CapacityReport(
        semantic_capacity=C,
        classical_capacity=classical_capacity(catalog.N, catalog.K),
        zero_pad_rate=zero_pad_rate(catalog),
        gain_lhs=lhs,
        gain=gain,
        per_message_rates=rates,
        expected_download=ED,
    )
    assert report.zero_pad_rate <= C
    assert sum(p * r for p, r in zip(catalog.priors, rates)) == C
    assert gain == (C > report.classical_capacity)
    return report
