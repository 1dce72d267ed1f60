"""Length-prefixed binary frames exchanged between a client and one database.

Frame: ``length:u32`` (payload bytes only), ``type:u8``, payload.  All
integers are big-endian.

* QUERY  ``entry_count:u32`` then per entry ``segment_count:u16`` and per
  segment ``message_index:u16 start_bit:u64 length_bits:u32``.
* ANSWER ``entry_count:u32`` then per entry ``length_bits:u32`` and the bits
  packed MSB-first, zero-padded at the end to a byte boundary.
* ERROR  ``code:u16`` then a UTF-8 message.
* PING / PONG carry no payload.

The desired message index is never part of any frame.
"""
from __future__ import annotations

import struct
from typing import Sequence

from ..core import Answer, QueryEntry, Segment

QUERY = 0x01
ANSWER = 0x02
ERROR = 0x03
PING = 0x04
PONG = 0x05
FRAME_TYPES = {QUERY, ANSWER, ERROR, PING, PONG}

# ERROR frame codes
ERR_MALFORMED = 1
ERR_UNKNOWN_TYPE = 2
ERR_SEGMENT_OUT_OF_RANGE = 10
ERR_INTERNAL = 99

MAX_PAYLOAD = 2**32 - 1

_HEAD = struct.Struct(">IB")
_U32 = struct.Struct(">I")
_U16 = struct.Struct(">H")
_SEG = struct.Struct(">HQI")


class FrameError(ValueError):
    """A frame or payload that cannot be decoded."""


class RemoteError(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        self.message = message
        super().__init__(f"database error {code}: {message}")


def encode_frame(ftype: int, payload: bytes = b"") -> bytes:
    if len(payload) > MAX_PAYLOAD:
        raise FrameError(f"payload of {len(payload)} bytes does not fit a u32 length")
    return _HEAD.pack(len(payload), ftype) + payload


def decode_frame(data: bytes) -> tuple[int, bytes]:
    """Decode exactly one frame held in ``data``."""
    if len(data) < _HEAD.size:
        raise FrameError("frame shorter than its header")
    length, ftype = _HEAD.unpack_from(data)
    if len(data) != _HEAD.size + length:
        raise FrameError(f"frame declares {length} payload bytes, holds {len(data) - _HEAD.size}")
    return ftype, data[_HEAD.size :]


def _recv_exact(sock, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise EOFError("connection closed mid-frame" if buf else "connection closed")
        buf += chunk
    return bytes(buf)


def read_frame(sock) -> tuple[int, bytes]:
    length, ftype = _HEAD.unpack(_recv_exact(sock, _HEAD.size))
    payload = _recv_exact(sock, length) if length else b""
    return ftype, payload


def send_frame(sock, ftype: int, payload: bytes = b"") -> None:
    sock.sendall(encode_frame(ftype, payload))


def query_entry_size(e: QueryEntry) -> int:
    return _U16.size + _SEG.size * len(e.segments)


def encode_query(entries: Sequence[QueryEntry]) -> bytes:
    parts = [_U32.pack(len(entries))]
    for e in entries:
        parts.append(_U16.pack(len(e.segments)))
        for s in e.segments:
            parts.append(_SEG.pack(s.message_index, s.start_bit, s.length_bits))
    return b"".join(parts)


def decode_query(payload: bytes) -> tuple[QueryEntry, ...]:
    try:
        (count,) = _U32.unpack_from(payload, 0)
        off = _U32.size
        entries = []
        for _ in range(count):
            (nseg,) = _U16.unpack_from(payload, off)
            off += _U16.size
            segs = []
            for _ in range(nseg):
                segs.append(Segment(*_SEG.unpack_from(payload, off)))
                off += _SEG.size
            entries.append(QueryEntry(tuple(segs)))
    except struct.error as exc:
        raise FrameError(f"truncated QUERY payload: {exc}") from None
    except ValueError as exc:
        raise FrameError(f"invalid QUERY entry: {exc}") from None
    if off != len(payload):
        raise FrameError(f"{len(payload) - off} trailing bytes in QUERY payload")
    return tuple(entries)


def encode_answer(answer: Answer) -> bytes:
    parts = [_U32.pack(len(answer.values))]
    for L, v in zip(answer.lengths, answer.values):
        nbytes = (L + 7) // 8
        parts.append(_U32.pack(L))
        parts.append((v << (nbytes * 8 - L)).to_bytes(nbytes, "big"))
    return b"".join(parts)


def decode_answer(payload: bytes) -> Answer:
    try:
        (count,) = _U32.unpack_from(payload, 0)
        off = _U32.size
        lengths, values = [], []
        for _ in range(count):
            (L,) = _U32.unpack_from(payload, off)
            off += _U32.size
            nbytes = (L + 7) // 8
            chunk = payload[off : off + nbytes]
            if len(chunk) != nbytes:
                raise FrameError("truncated ANSWER bits")
            off += nbytes
            lengths.append(L)
            values.append(int.from_bytes(chunk, "big") >> (nbytes * 8 - L))
    except struct.error as exc:
        raise FrameError(f"truncated ANSWER payload: {exc}") from None
    if off != len(payload):
        raise FrameError(f"{len(payload) - off} trailing bytes in ANSWER payload")
    return Answer(tuple(lengths), tuple(values))


def encode_error(code: int, message: str) -> bytes:
    return _U16.pack(code) + message.encode("utf-8")


def decode_error(payload: bytes) -> tuple[int, str]:
    if len(payload) < _U16.size:
        raise FrameError("ERROR payload shorter than its code")
    (code,) = _U16.unpack_from(payload)
    return code, payload[_U16.size :].decode("utf-8", errors="replace")


def split_entries(entries: Sequence[QueryEntry], max_payload: int) -> list[tuple[QueryEntry, ...]]:
    """Chunks of consecutive entries whose QUERY payloads fit in ``max_payload`` bytes."""
    chunks, current, size = [], [], _U32.size
    for e in entries:
        es = query_entry_size(e)
        if _U32.size + es > max_payload:
            raise FrameError(f"a single entry needs {_U32.size + es} bytes, above the {max_payload}-byte limit")
        if current and size + es > max_payload:
            chunks.append(tuple(current))
            current, size = [], _U32.size
        current.append(e)
        size += es
    chunks.append(tuple(current))
    return chunks
