"""Privacy checks: exact structural comparisons and seeded empirical tests.

A database sees one query.  Privacy holds when the distribution of what it
sees does not depend on the desired index.  Structurally that means equal
query signatures (deterministic scheme) or equal signature multisets over
all equiprobable options (stochastic scheme).
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from itertools import combinations

import numpy as np
from scipy import stats

from . import scheme1, scheme2
from .core import Catalog, Query, SemanticPIRError


class InsufficientSamples(SemanticPIRError, ValueError):
    pass


def signature(query: Query, blocks: bool = False) -> tuple:
    """Canonical descriptor of a query with bit positions erased.

    Each entry becomes ``(message indices, segment lengths)``.  With
    ``blocks=True`` the block number of every segment is kept as well, which
    is what distinguishes stochastic-scheme queries.  The result is the
    sorted multiset of entry descriptors as ``((descriptor, count), ...)``.
    """
    counts = Counter()
    for e in query.entries:
        segs = sorted(e.segments)
        if blocks:
            desc = tuple((s.message_index, s.start_bit // s.length_bits + 1, s.length_bits) for s in segs)
        else:
            desc = (tuple(s.message_index for s in segs), tuple(s.length_bits for s in segs))
        counts[desc] += 1
    return tuple(sorted(counts.items()))


@dataclass
class AuditReport:
    mode: str
    scheme: str
    passed: bool
    per_database: list[bool]
    samples: int | None = None
    tv_threshold: float | None = None
    chi2_alpha: float | None = None
    tv_distances: list[float] = field(default_factory=list)
    chi2: list[dict] = field(default_factory=list)
    detail: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def audit_scheme1_structural(catalog: Catalog, seed=0, build=scheme1.build_queries) -> AuditReport:
    """Compare every database's query signature across all desired indices."""
    params = scheme1.compute_params(catalog)
    sigs = []
    for d in range(1, catalog.K + 1):
        queries, _ = build(catalog, params, d, seed)
        sigs.append([signature(q) for q in queries])
    per_db = [all(s[n] == sigs[0][n] for s in sigs) for n in range(catalog.N)]
    return AuditReport("structural", "det", all(per_db), per_db)


def option_signatures(catalog: Catalog, desired: int, build=scheme2.build_queries_for_option, options=None):
    """Per database, the multiset of block signatures over all options."""
    if options is None:
        options = scheme2.enumerate_options(catalog, desired)
    per_db = [Counter() for _ in range(catalog.N)]
    for opt in options:
        queries, _ = build(catalog, desired, opt)
        for n, q in enumerate(queries):
            per_db[n][signature(q, blocks=True)] += 1
    return per_db


def audit_scheme2_structural(
    catalog: Catalog, build=scheme2.build_queries_for_option, enumerate_options=scheme2.enumerate_options
) -> AuditReport:
    scheme2.check_divisibility(catalog)
    multisets = [
        option_signatures(catalog, d, build, enumerate_options(catalog, d)) for d in range(1, catalog.K + 1)
    ]
    per_db = [all(m[n] == multisets[0][n] for m in multisets) for n in range(catalog.N)]
    return AuditReport("structural", "stoch", all(per_db), per_db)


def honest_sampler(catalog: Catalog, desired: int, size: int, seed) -> list[int]:
    return scheme2.sample_option_indices(catalog, size, seed)


def default_tv_threshold(samples: int) -> float:
    return 4 * math.sqrt(samples / 2) / samples


def total_variation(p: Counter, q: Counter) -> float:
    np_, nq = sum(p.values()), sum(q.values())
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p[k] / np_ - q[k] / nq) for k in keys)


def _chi2_uniform(counts: np.ndarray) -> tuple[float, float]:
    if counts.size < 2 or np.all(counts == counts[0]):
        return 0.0, 1.0
    res = stats.chisquare(counts)
    return float(res.statistic), float(res.pvalue)


def audit_empirical(
    catalog: Catalog,
    scheme: str,
    samples: int,
    seed=0,
    tv_threshold: float | None = None,
    chi2_alpha: float = 0.01,
    sampler=honest_sampler,
    build1=scheme1.build_queries,
) -> AuditReport:
    """Seeded retrievals for every desired index, compared per database.

    Each desired index draws from its own child stream of ``seed``.  The
    chi-square tests are Bonferroni-corrected over the number of tests run.
    For the stochastic scheme the tested quantity is the option index; for
    the deterministic scheme it is how often each bit position of each
    message appears in the queries.
    """
    if samples < 1000:
        raise InsufficientSamples(f"need at least 1000 samples per desired index, got {samples}")
    if tv_threshold is None:
        tv_threshold = default_tv_threshold(samples)
    K, N = catalog.K, catalog.N
    streams = np.random.SeedSequence(seed).spawn(K)
    dists = [[Counter() for _ in range(N)] for _ in range(K)]
    chi = []

    if scheme in ("stoch", "stochastic"):
        cache = {}
        for d in range(1, K + 1):
            idx = sampler(catalog, d, samples, streams[d - 1])
            freq = Counter(idx)
            for i, c in freq.items():
                if (d, i) not in cache:
                    opt = scheme2.option_from_index(catalog, d, i)
                    queries, _ = scheme2.build_queries_for_option(catalog, d, opt)
                    cache[d, i] = [signature(q, blocks=True) for q in queries]
                for n, sig in enumerate(cache[d, i]):
                    dists[d - 1][n][sig] += c
            counts = np.array([freq.get(i, 0) for i in range(scheme2.option_count(catalog))], dtype=float)
            stat, p = _chi2_uniform(counts)
            chi.append({"desired": d, "quantity": "option", "statistic": stat, "pvalue": p})
        name = "stoch"
    elif scheme in ("det", "deterministic"):
        params = scheme1.compute_params(catalog)
        positions = {(d, m): np.zeros(catalog.length(m)) for d in range(1, K + 1) for m in range(1, K + 1)}
        for d in range(1, K + 1):
            child = np.random.default_rng(streams[d - 1])
            for _ in range(samples):
                queries, _ = build1(catalog, params, d, child)
                for n, q in enumerate(queries):
                    dists[d - 1][n][signature(q)] += 1
                    for e in q.entries:
                        for s in e.segments:
                            positions[d, s.message_index][s.start_bit] += 1
        for (d, m), counts in positions.items():
            stat, p = _chi2_uniform(counts)
            chi.append({"desired": d, "message": m, "quantity": "bit_position", "statistic": stat, "pvalue": p})
        name = "det"
    else:
        raise ValueError(f"unknown scheme {scheme!r}")

    tvs = []
    for n in range(N):
        worst = max((total_variation(dists[a][n], dists[b][n]) for a, b in combinations(range(K), 2)), default=0.0)
        tvs.append(worst)
    per_db = [tv <= tv_threshold for tv in tvs]
    level = chi2_alpha / max(len(chi), 1)
    chi_ok = all(c["pvalue"] >= level for c in chi)
    return AuditReport(
        "empirical",
        name,
        all(per_db) and chi_ok,
        per_db,
        samples=samples,
        tv_threshold=tv_threshold,
        chi2_alpha=chi2_alpha,
        tv_distances=tvs,
        chi2=chi,
    )
