from collections import Counter

import numpy as np
import pytest

from semantic_pir import audit, scheme1, scheme2
from semantic_pir.core import Query, entry, make_catalog

from .conftest import example1, example3, example4


# mutants: each leaks the desired index in a different way

def extra_desired_bit(catalog, params, desired, seed=None):
    """Scheme 1 plus one more singleton of the desired message at database 1."""
    queries, plan = scheme1.build_queries(catalog, params, desired, seed)
    q0 = queries[0]
    queries[0] = Query(q0.database_index, q0.entries + (entry((desired, 0, 1)),))
    return queries, plan


def never_empty_at_db1(catalog, desired, option):
    """Scheme 2, except database 1 never gets the bare side query when message 1 is wanted."""
    queries, plan = scheme2.build_queries_for_option(catalog, desired, option)
    side = (option.shift + catalog.N - 1) % catalog.N
    if desired == 1 and side == 0:
        a, b = queries[0], queries[1]
        queries[0], queries[1] = Query(1, b.entries), Query(2, a.entries)
    return queries, plan


def desired_never_at_db1(catalog, desired, option):
    """Scheme 2, except database 1 never holds a block of message 1 when message 1 is wanted."""
    queries, plan = scheme2.build_queries_for_option(catalog, desired, option)
    if desired == 1:
        side = (option.shift + catalog.N - 1) % catalog.N
        a, b = queries[0], queries[side]
        queries[0], queries[side] = Query(1, b.entries), Query(side + 1, a.entries)
    return queries, plan


def biased_sampler(catalog, desired, size, seed):
    """Option 0 with probability 1/2 when message 1 is wanted, otherwise uniform."""
    if desired != 1:
        return audit.honest_sampler(catalog, desired, size, seed)
    rng = np.random.default_rng(seed)
    total = scheme2.option_count(catalog)
    others = rng.integers(1, total, size=size)
    return np.where(rng.random(size) < 0.5, 0, others).tolist()


def test_signature_erases_positions():
    q1 = Query(1, (entry((1, 3, 1)), entry((1, 9, 1), (2, 0, 1))))
    q2 = Query(1, (entry((1, 8, 1), (2, 5, 1)), entry((1, 0, 1))))
    assert audit.signature(q1) == audit.signature(q2)
    assert audit.signature(q1) != audit.signature(Query(1, (entry((1, 3, 1)),)))


def test_block_signature_keeps_block_numbers():
    a = Query(1, (entry((1, 0, 100)),))
    b = Query(1, (entry((1, 100, 100)),))
    assert audit.signature(a) == audit.signature(b)
    assert audit.signature(a, blocks=True) != audit.signature(b, blocks=True)


@pytest.mark.parametrize("factory", [example1, example3])
def test_structural_audits_pass(factory):
    c = factory()
    if scheme1.padding_needed(c) == {m: 0 for m in c.ids}:
        assert audit.audit_scheme1_structural(c).passed
    assert audit.audit_scheme2_structural(c).passed


def test_structural_scheme1_mutant_fails():
    r = audit.audit_scheme1_structural(example1(), build=extra_desired_bit)
    assert not r.passed
    assert r.per_database == [False, True]


@pytest.mark.parametrize("mutant", [never_empty_at_db1, desired_never_at_db1])
def test_structural_scheme2_mutant_fails(mutant):
    for c in (example3(), example4()):
        r = audit.audit_scheme2_structural(c, build=mutant)
        assert not r.passed
        assert not r.per_database[0]


def test_structural_scheme2_partial_option_set_fails():
    # dropping the options whose side query sits at the last database skews that database
    def partial(catalog, desired):
        opts = scheme2.enumerate_options(catalog, desired)
        return opts if desired != 1 else [o for o in opts if o.shift != 0]

    assert not audit.audit_scheme2_structural(example3(), enumerate_options=partial).passed


def expected_tv(categories, samples):
    # two independent empirical draws from one uniform distribution over `categories` points
    return (categories / (np.pi * samples)) ** 0.5


def test_empirical_stochastic_passes():
    # 27 equiprobable signatures per database: the expected TV alone is close to the default threshold
    r = audit.audit_empirical(example4(), "stoch", 20_000, seed=0, tv_threshold=2 * expected_tv(27, 20_000))
    assert r.passed
    assert len(r.tv_distances) == 3
    assert all(tv <= r.tv_threshold for tv in r.tv_distances)


def test_empirical_biased_sampler_fails():
    r = audit.audit_empirical(example3(), "stoch", 20_000, seed=0, sampler=biased_sampler)
    assert not r.passed
    # option 0 at 1/2 instead of 1/16; every database sees a distinct signature per option
    assert max(r.tv_distances) == pytest.approx(0.5 - 1 / 16, abs=0.02)
    assert min(c["pvalue"] for c in r.chi2) < 1e-12


def test_empirical_deterministic():
    c = make_catalog((8, 4), ["1/2", "1/2"], 2)
    r = audit.audit_empirical(c, "det", 1000, seed=0)
    assert r.passed
    assert r.tv_distances == [0.0, 0.0]
    bad = audit.audit_empirical(c, "det", 1000, seed=0, build1=extra_desired_bit)
    assert not bad.passed


def test_tv_shrinks_with_samples():
    tvs = [max(audit.audit_empirical(example3(), "stoch", s, seed=0).tv_distances) for s in (1000, 10_000, 100_000)]
    assert tvs[0] > tvs[2] and tvs[1] > tvs[2]


def test_too_few_samples():
    with pytest.raises(audit.InsufficientSamples):
        audit.audit_empirical(example3(), "stoch", 999)


def test_default_threshold():
    assert audit.default_tv_threshold(100_000) == pytest.approx(0.00894, abs=1e-5)


def test_total_variation():
    assert audit.total_variation(Counter(a=1, b=1), Counter(a=2)) == 0.5
    assert audit.total_variation(Counter(a=3), Counter(a=7)) == 0.0


def test_report_to_dict():
    d = audit.audit_scheme2_structural(example3()).to_dict()
    assert d["passed"] is True and d["mode"] == "structural"
