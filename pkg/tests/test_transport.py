import socket

import pytest

from semantic_pir import scheme1
from semantic_pir.core import MessageStore, Query, entry
from semantic_pir.harness import wire
from semantic_pir.harness.runner import encode_transcript, retrieve
from semantic_pir.harness.transport import (
    LocalDatabase,
    RemoteDatabase,
    TransportError,
    dispatch,
    start_background_servers,
)

from .conftest import example1, example2, example3, example4


@pytest.fixture
def servers():
    running = []

    def start(store, count):
        srvs = start_background_servers(store, count)
        running.extend(srvs)
        return [RemoteDatabase(*s.address, timeout=10) for s in srvs]

    yield start
    for s in running:
        s.shutdown()
        s.server_close()


def raw_exchange(addr, frames):
    with socket.create_connection(addr, timeout=5) as sock:
        replies = []
        for ftype, payload in frames:
            sock.sendall(wire.encode_frame(ftype, payload))
            replies.append(wire.read_frame(sock))
        return replies


def test_ping(servers):
    (db,) = servers(MessageStore.random((16,), 0), 1)
    assert db.ping()


def test_error_frames_keep_connection_open(servers):
    (db,) = servers(MessageStore.random((16, 8), 0), 1)
    out_of_range = wire.encode_query((entry((2, 8, 1)),))
    replies = raw_exchange(
        (db.host, db.port),
        [
            (wire.QUERY, out_of_range),
            (wire.QUERY, b"\x00\x00"),
            (0x42, b""),
            (wire.PING, b""),
        ],
    )
    assert [r[0] for r in replies] == [wire.ERROR, wire.ERROR, wire.ERROR, wire.PONG]
    assert [wire.decode_error(r[1])[0] for r in replies[:3]] == [10, 1, 2]


def test_remote_error_surfaces(servers):
    (db,) = servers(MessageStore.random((16,), 0), 1)
    with pytest.raises(wire.RemoteError) as err:
        db.answer(Query(1, (entry((1, 16, 1)),)))
    assert err.value.code == wire.ERR_SEGMENT_OUT_OF_RANGE


def test_unreachable_database():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    with pytest.raises(TransportError):
        RemoteDatabase("127.0.0.1", port, timeout=2).answer(Query(1, ()))


@pytest.mark.parametrize(
    "factory,scheme",
    [(example1, "det"), (example2, "det"), (example3, "stoch"), (example4, "stoch"), (example1, "stoch")],
)
def test_network_transcript_matches_in_process(servers, factory, scheme):
    c = factory()
    store = MessageStore.random(c.lengths, 21)
    local = [LocalDatabase(store) for _ in range(c.N)]
    remote = servers(store, c.N)
    for d in range(1, c.K + 1):
        a = retrieve(c, local, d, scheme, seed=99, verify_store=store)
        b = retrieve(c, remote, d, scheme, seed=99, verify_store=store)
        assert encode_transcript(a.transcript) == encode_transcript(b.transcript)


def test_frame_splitting(servers):
    c = example1()
    store = MessageStore.random(c.lengths, 3)
    qs, plan = scheme1.build_queries(c, scheme1.compute_params(c), 1, seed=0)
    whole = dispatch([LocalDatabase(store)] * 2, qs)
    dbs = servers(store, 2)
    for db in dbs:
        db.max_frame = 200
    assert dispatch(dbs, qs) == whole
    assert scheme1.reconstruct(plan, whole) == store.message(1)


def test_dispatch_count_mismatch():
    with pytest.raises(ValueError):
        dispatch([LocalDatabase(MessageStore.random((4,), 0))], [Query(1, ()), Query(2, ())])
