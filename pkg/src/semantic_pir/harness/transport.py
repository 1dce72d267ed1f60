"""In-process and TCP databases, and concurrent dispatch to all N of them."""
from __future__ import annotations

import logging
import socket
import socketserver
import threading
from concurrent.futures import ThreadPoolExecutor, wait
from typing import Sequence

from ..core import Answer, MessageStore, Query, SegmentOutOfRange, answer_query
from . import wire

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 30.0
DEFAULT_MAX_FRAME = 64 * 2**20


class TransportError(Exception):
    pass


class LocalDatabase:
    def __init__(self, store: MessageStore):
        self.store = store

    def answer(self, query: Query) -> Answer:
        return answer_query(self.store, query)


class RemoteDatabase:
    """A database server reached over TCP; one connection per retrieval."""

    def __init__(self, host: str, port: int, timeout: float = DEFAULT_TIMEOUT, max_frame: int = DEFAULT_MAX_FRAME):
        self.host = host
        self.port = port
        self.timeout = timeout
        self.max_frame = max_frame

    def _connect(self):
        try:
            return socket.create_connection((self.host, self.port), timeout=self.timeout)
        except OSError as exc:
            raise TransportError(f"cannot reach {self.host}:{self.port}: {exc}") from exc

    def ping(self) -> bool:
        with self._connect() as sock:
            wire.send_frame(sock, wire.PING)
            ftype, _ = wire.read_frame(sock)
            return ftype == wire.PONG

    def answer(self, query: Query) -> Answer:
        lengths, values = [], []
        try:
            with self._connect() as sock:
                for chunk in wire.split_entries(query.entries, self.max_frame):
                    wire.send_frame(sock, wire.QUERY, wire.encode_query(chunk))
                    ftype, payload = wire.read_frame(sock)
                    if ftype == wire.ERROR:
                        raise wire.RemoteError(*wire.decode_error(payload))
                    if ftype != wire.ANSWER:
                        raise TransportError(f"expected ANSWER, got frame type {ftype}")
                    part = wire.decode_answer(payload)
                    lengths.extend(part.lengths)
                    values.extend(part.values)
        except (OSError, EOFError, wire.FrameError) as exc:
            raise TransportError(f"{self.host}:{self.port}: {exc}") from exc
        return Answer(tuple(lengths), tuple(values))


def dispatch(databases: Sequence, queries: Sequence[Query], timeout: float | None = None) -> list[Answer]:
    """Send every query to its database concurrently and wait for all answers.

    Answers are returned in database order regardless of arrival order.
    """
    if len(databases) != len(queries):
        raise ValueError(f"{len(queries)} queries for {len(databases)} databases")
    if all(isinstance(db, LocalDatabase) for db in databases):
        return [db.answer(q) for db, q in zip(databases, queries)]
    with ThreadPoolExecutor(max_workers=len(databases)) as pool:
        futures = [pool.submit(db.answer, q) for db, q in zip(databases, queries)]
        done, pending = wait(futures, timeout=timeout)
        if pending:
            raise TransportError(f"{len(pending)} database(s) did not answer within {timeout} s")
        return [f.result() for f in futures]


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        store = self.server.store
        sock = self.request
        while True:
            try:
                ftype, payload = wire.read_frame(sock)
            except (EOFError, OSError):
                return
            try:
                reply = _respond(store, ftype, payload)
            except Exception:  # keep serving other requests
                log.exception("internal error answering frame type %s", ftype)
                reply = (wire.ERROR, wire.encode_error(wire.ERR_INTERNAL, "internal error"))
            try:
                wire.send_frame(sock, *reply)
            except OSError:
                return


def _respond(store: MessageStore, ftype: int, payload: bytes) -> tuple[int, bytes]:
    if ftype == wire.PING:
        return wire.PONG, b""
    if ftype != wire.QUERY:
        return wire.ERROR, wire.encode_error(wire.ERR_UNKNOWN_TYPE, f"unexpected frame type {ftype}")
    try:
        entries = wire.decode_query(payload)
    except wire.FrameError as exc:
        return wire.ERROR, wire.encode_error(wire.ERR_MALFORMED, str(exc))
    try:
        ans = answer_query(store, Query(0, entries))
    except SegmentOutOfRange as exc:
        return wire.ERROR, wire.encode_error(wire.ERR_SEGMENT_OUT_OF_RANGE, str(exc))
    return wire.ANSWER, wire.encode_answer(ans)


class DatabaseServer(socketserver.ThreadingTCPServer):
    """Answers QUERY frames from a read-only store; one thread per connection."""

    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, store: MessageStore, host: str = "127.0.0.1", port: int = 0, db_index: int = 0):
        self.store = store
        self.db_index = db_index
        super().__init__((host, port), _Handler)

    @property
    def address(self) -> tuple[str, int]:
        return self.server_address[:2]


def start_background_servers(store: MessageStore, count: int, host: str = "127.0.0.1"):
    """Start ``count`` servers on ephemeral ports in daemon threads."""
    servers = []
    for n in range(1, count + 1):
        srv = DatabaseServer(store, host, 0, db_index=n)
        threading.Thread(target=srv.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True).start()
        servers.append(srv)
    return servers
