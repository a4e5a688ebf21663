"""Canonical byte serialization for hashing and on-disk records.

Hash determinism requires one fixed encoding: same value, same bytes,
on every run and every implementation. The encoding is type-tagged and
length-prefixed (no whitespace, no locale, no float formatting):

    0x00  none
    0x01  false
    0x02  true
    0x03  int     u32 length + ASCII decimal (sign included)
    0x04  float   8-byte IEEE-754 big-endian
    0x05  str     u32 length + UTF-8 bytes
    0x06  bytes   u32 length + raw bytes
    0x07  list    u32 count + encoded items
    0x08  dict    u32 count + (str key, value) pairs sorted by key

Dict keys must be strings. Tuples encode as lists. Digests are SHA-256
over the encoding.
"""

from __future__ import annotations

import hashlib
import struct
from typing import Any

_U32 = struct.Struct(">I")
_F64 = struct.Struct(">d")

TAG_NONE = b"\x00"
TAG_FALSE = b"\x01"
TAG_TRUE = b"\x02"
TAG_INT = b"\x03"
TAG_FLOAT = b"\x04"
TAG_STR = b"\x05"
TAG_BYTES = b"\x06"
TAG_LIST = b"\x07"
TAG_DICT = b"\x08"


def encode(value: Any) -> bytes:
    out = bytearray()
    _encode_into(value, out)
    return bytes(out)


def _encode_into(value: Any, out: bytearray) -> None:
    if value is None:
        out += TAG_NONE
    elif value is True:
        out += TAG_TRUE
    elif value is False:
        out += TAG_FALSE
    elif isinstance(value, int):
        text = str(value).encode("ascii")
        out += TAG_INT
        out += _U32.pack(len(text))
        out += text
    elif isinstance(value, float):
        out += TAG_FLOAT
        out += _F64.pack(value)
    elif isinstance(value, str):
        raw = value.encode("utf-8")
        out += TAG_STR
        out += _U32.pack(len(raw))
        out += raw
    elif isinstance(value, (bytes, bytearray)):
        out += TAG_BYTES
        out += _U32.pack(len(value))
        out += bytes(value)
    elif isinstance(value, (list, tuple)):
        out += TAG_LIST
        out += _U32.pack(len(value))
        for item in value:
            _encode_into(item, out)
    elif isinstance(value, dict):
        keys = sorted(value)
        out += TAG_DICT
        out += _U32.pack(len(keys))
        for key in keys:
            if not isinstance(key, str):
                raise TypeError(f"dict keys must be str, got {type(key).__name__}")
            raw = key.encode("utf-8")
            out += _U32.pack(len(raw))
            out += raw
            _encode_into(value[key], out)
    else:
        raise TypeError(f"cannot canonically encode {type(value).__name__}")


class DecodeError(ValueError):
    pass


def decode(data: bytes) -> Any:
    value, used = _decode_from(data, 0)
    if used != len(data):
        raise DecodeError(f"trailing bytes after value ({len(data) - used})")
    return value


def _read_u32(data: bytes, pos: int) -> tuple[int, int]:
    if pos + 4 > len(data):
        raise DecodeError("truncated length prefix")
    return _U32.unpack_from(data, pos)[0], pos + 4


def _read_raw(data: bytes, pos: int, length: int) -> tuple[bytes, int]:
    if pos + length > len(data):
        raise DecodeError("truncated payload")
    return data[pos:pos + length], pos + length


def _decode_from(data: bytes, pos: int) -> tuple[Any, int]:
    if pos >= len(data):
        raise DecodeError("truncated value")
    tag = data[pos:pos + 1]
    pos += 1
    if tag == TAG_NONE:
        return None, pos
    if tag == TAG_TRUE:
        return True, pos
    if tag == TAG_FALSE:
        return False, pos
    if tag == TAG_INT:
        length, pos = _read_u32(data, pos)
        raw, pos = _read_raw(data, pos, length)
        try:
            return int(raw.decode("ascii")), pos
        except (UnicodeDecodeError, ValueError) as exc:
            raise DecodeError(f"bad int encoding: {exc}") from exc
    if tag == TAG_FLOAT:
        if pos + 8 > len(data):
            raise DecodeError("truncated float")
        return _F64.unpack_from(data, pos)[0], pos + 8
    if tag == TAG_STR:
        length, pos = _read_u32(data, pos)
        raw, pos = _read_raw(data, pos, length)
        try:
            return raw.decode("utf-8"), pos
        except UnicodeDecodeError as exc:
            raise DecodeError(f"bad utf-8: {exc}") from exc
    if tag == TAG_BYTES:
        length, pos = _read_u32(data, pos)
        raw, pos = _read_raw(data, pos, length)
        return raw, pos
    if tag == TAG_LIST:
        count, pos = _read_u32(data, pos)
        items = []
        for _ in range(count):
            item, pos = _decode_from(data, pos)
            items.append(item)
        return items, pos
    if tag == TAG_DICT:
        count, pos = _read_u32(data, pos)
        result: dict[str, Any] = {}
        previous = None
        for _ in range(count):
            length, pos = _read_u32(data, pos)
            raw, pos = _read_raw(data, pos, length)
            try:
                key = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise DecodeError(f"bad utf-8 in dict key: {exc}") from exc
            if previous is not None and key <= previous:
                raise DecodeError("dict keys not in canonical order")
            previous = key
            value, pos = _decode_from(data, pos)
            result[key] = value
        return result, pos
    raise DecodeError(f"unknown tag {tag!r}")


def digest(value: Any) -> bytes:
    """SHA-256 over the canonical encoding; 32 bytes."""
    return hashlib.sha256(encode(value)).digest()


def digest_bytes(raw: bytes) -> bytes:
    return hashlib.sha256(raw).digest()
