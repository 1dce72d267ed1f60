"""Flat store file.

Layout (big-endian)::

    b"SPIR"  version:u16 (=1)  K:u16  K x length_bits:u64
    then each message packed MSB-first, zero-padded at the end to a byte boundary
"""
from __future__ import annotations

import struct
from pathlib import Path

from ..core import MessageStore

MAGIC = b"SPIR"
VERSION = 1
_HEADER = struct.Struct(">4sHH")
_LENGTH = struct.Struct(">Q")


class StoreFormatError(ValueError):
    pass


def encode_store(store: MessageStore) -> bytes:
    parts = [_HEADER.pack(MAGIC, VERSION, store.K)]
    parts += [_LENGTH.pack(L) for L in store.lengths]
    for L, v in zip(store.lengths, store.values):
        nbytes = (L + 7) // 8
        parts.append((v << (nbytes * 8 - L)).to_bytes(nbytes, "big"))
    return b"".join(parts)


def decode_store(data: bytes) -> MessageStore:
    if len(data) < _HEADER.size:
        raise StoreFormatError("file too short for header")
    magic, version, k = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise StoreFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise StoreFormatError(f"unsupported version {version}")
    off = _HEADER.size
    if len(data) < off + k * _LENGTH.size:
        raise StoreFormatError("file too short for length table")
    lengths = [_LENGTH.unpack_from(data, off + i * _LENGTH.size)[0] for i in range(k)]
    off += k * _LENGTH.size
    values = []
    for L in lengths:
        if L < 1:
            raise StoreFormatError("message length must be positive")
        nbytes = (L + 7) // 8
        chunk = data[off : off + nbytes]
        if len(chunk) != nbytes:
            raise StoreFormatError("payload shorter than declared lengths")
        pad = nbytes * 8 - L
        raw = int.from_bytes(chunk, "big")
        if raw & ((1 << pad) - 1):
            raise StoreFormatError("non-zero padding bits")
        values.append(raw >> pad)
        off += nbytes
    if off != len(data):
        raise StoreFormatError(f"{len(data) - off} trailing bytes after payload")
    return MessageStore(tuple(lengths), tuple(values))


def write_store(path, store: MessageStore) -> None:
    Path(path).write_bytes(encode_store(store))


def read_store(path) -> MessageStore:
    return decode_store(Path(path).read_bytes())
