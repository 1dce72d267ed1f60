from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semantic_pir import scheme1, scheme2
from semantic_pir.core import (
    EmptyCatalog,
    MessageMeta,
    MessageStore,
    NonPositivePrior,
    PriorsDoNotSumToOne,
    Query,
    QueryEntry,
    Segment,
    SegmentOutOfRange,
    TooFewDatabases,
    Transcript,
    answer_query,
    bits_to_int,
    canonical_order,
    entry,
    expected_length,
    int_to_bits,
    make_catalog,
    realized_download,
    validate_catalog,
)

from .conftest import example1, example3


def metas(lengths, priors):
    return [MessageMeta(f"m{i}", L, Fraction(p)) for i, (L, p) in enumerate(zip(lengths, priors))]


def test_catalog_sorted_descending():
    c = validate_catalog(metas((256, 1024), ("1/2", "1/2")), 2)
    assert c.lengths == (1024, 256)
    assert c.index_of("m0") == 2
    assert c.index_of("m1") == 1


def test_catalog_priors_must_sum_to_one():
    with pytest.raises(PriorsDoNotSumToOne):
        validate_catalog(metas((1024, 256), ("1/3", "1/3")), 2)


def test_example2_catalog_accepted():
    c = validate_catalog(metas((8192, 2048, 512), ("1/2", "1/3", "1/6")), 4)
    assert c.K == 3 and c.N == 4


def test_catalog_errors():
    with pytest.raises(TooFewDatabases):
        validate_catalog(metas((8,), (1,)), 1)
    with pytest.raises(EmptyCatalog):
        validate_catalog([], 2)
    with pytest.raises(NonPositivePrior):
        MessageMeta("x", 8, Fraction(0))


def test_catalog_ties_keep_input_order():
    c = validate_catalog(metas((8, 16, 8, 16), ("1/4",) * 4), 2)
    assert c.ids == ("m1", "m3", "m0", "m2")


def test_validate_is_idempotent():
    c = example1()
    assert validate_catalog(c, c.N) == c


def test_expected_length():
    assert expected_length(example1()) == 640
    L2 = 7
    c = make_catalog((4 * L2, L2), (Fraction(4, 5), Fraction(1, 5)), 2)
    assert expected_length(c) == Fraction(17, 5) * L2
    assert expected_length(make_catalog((400, 300, 100), ["1/3"] * 3, 3)) == Fraction(800, 3)


def test_bits_int_round_trip():
    rng = np.random.default_rng(1)
    for L in (1, 7, 8, 9, 100):
        bits = rng.integers(0, 2, size=L, dtype=np.uint8)
        assert np.array_equal(int_to_bits(bits_to_int(bits), L), bits)


@pytest.fixture
def store():
    return MessageStore.random((1024, 600), seed=3)


def test_single_segment_returns_message(store):
    ans = answer_query(store, Query(1, (entry((1, 0, 1024)),)))
    assert ans.lengths == (1024,)
    assert ans.values[0] == store.message(1)


def test_single_bits_xor(store):
    b1, b2 = store.bits(1), store.bits(2)
    ans = answer_query(store, Query(1, (entry((1, 15, 1), (2, 3, 1)),)))
    assert ans.values == (int(b1[15] ^ b2[3]),)


def _padded_xor_oracle(store, segs):
    # explicit lists: pad every summand on the left to the longest, XOR positionwise
    width = max(length for _, _, length in segs)
    out = [0] * width
    for m, start, length in segs:
        bits = [int(b) for b in store.bits(m)[start : start + length]]
        bits = [0] * (width - length) + bits
        out = [a ^ b for a, b in zip(out, bits)]
    return out


def test_block_xor_left_padding(store):
    segs = [(1, 0, 1000), (2, 0, 600)]
    ans = answer_query(store, Query(1, (entry(*segs),)))
    got = list(int_to_bits(ans.values[0], ans.lengths[0]))
    expected = _padded_xor_oracle(store, segs)
    assert ans.lengths == (1000,)
    assert got == expected
    # the first 400 bits are the unpadded prefix of the longer block
    assert got[:400] == [int(b) for b in store.bits(1)[:400]]


def test_answer_query_is_deterministic(store):
    q = Query(2, (entry((1, 5, 20), (2, 100, 7)), entry((2, 599, 1))))
    assert answer_query(store, q) == answer_query(store, q)


def test_segment_out_of_range(store):
    for seg in [(2, 600, 1), (1, 1020, 5), (3, 0, 1), (0, 0, 1), (1, -1, 2)]:
        with pytest.raises(SegmentOutOfRange):
            answer_query(store, Query(1, (entry(seg),)))


def test_entry_rejects_repeated_message():
    with pytest.raises(ValueError):
        QueryEntry((Segment(1, 0, 1), Segment(1, 4, 1)))
    with pytest.raises(ValueError):
        QueryEntry(())


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_xor_linearity(data):
    lengths = data.draw(st.lists(st.integers(1, 70), min_size=1, max_size=5))
    seed = data.draw(st.integers(0, 2**32 - 1))
    store = MessageStore.random(lengths, seed)
    chosen = data.draw(st.lists(st.integers(1, len(lengths)), min_size=1, max_size=len(lengths), unique=True))
    segs = []
    for m in chosen:
        L = lengths[m - 1]
        start = data.draw(st.integers(0, L - 1))
        length = data.draw(st.integers(1, L - start))
        segs.append((m, start, length))
    whole = answer_query(store, Query(1, (entry(*segs),)))
    parts = answer_query(store, Query(1, tuple(entry(s) for s in segs)))
    acc = 0
    for v in parts.values:
        acc ^= v
    assert whole.values == (acc,)
    assert whole.values[0] == bits_to_int(_padded_xor_oracle(store, segs))


def test_canonical_order_is_structural():
    es = [entry((1, 9, 1), (2, 1, 1)), entry((2, 4, 1)), entry((1, 3, 1)), entry((1, 2, 1), (2, 0, 1))]
    ordered = canonical_order(es)
    assert [e.message_indices for e in ordered] == [(1,), (2,), (1, 2), (1, 2)]
    assert ordered[2].segments[0].start_bit == 2


def _transcript(queries, answers, desired, useful):
    return Transcript(desired, tuple(queries), tuple(answers), sum(a.bits for a in answers), useful)


def test_realized_download_example1_same_for_all_desired():
    c = example1()
    store = MessageStore.random(c.lengths, 0)
    p = scheme1.compute_params(c)
    downloads = set()
    for d in (1, 2):
        qs, _ = scheme1.build_queries(c, p, d, seed=11)
        t = _transcript(qs, [answer_query(store, q) for q in qs], d, c.length(d))
        downloads.add(realized_download(t))
        assert realized_download(t) == t.downloaded_bits
    assert downloads == {18 * 64}


def test_realized_download_single_message():
    c = make_catalog((4,), (1,), 2)
    store = MessageStore.random(c.lengths, 0)
    qs, _ = scheme1.build_queries(c, scheme1.compute_params(c), 1, seed=0)
    t = _transcript(qs, [answer_query(store, q) for q in qs], 1, 4)
    assert realized_download(t) == 4


def test_realized_download_example3_empty_side_info():
    c = example3()
    store = MessageStore.random(c.lengths, 0)
    opt = scheme2.option_from_index(c, 1, 0)
    assert opt.side_combo == ()
    qs, _ = scheme2.build_queries_for_option(c, 1, opt)
    t = _transcript(qs, [answer_query(store, q) for q in qs], 1, 3000)
    assert realized_download(t) == 3000
