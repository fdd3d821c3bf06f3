"""Wire protocol and fixture file format.

This module is a self-contained implementation of the two external
interfaces the compressor exposes; nothing here imports the compressor.

Frames are u32-length-prefixed, little-endian throughout:

* handshake: "HNLP" | version u16 | identity (kind u8, param_hash 32
  bytes, vocab_size u32) | grid_k u8 | vocab_size u32
* request  (type 1): request_id u32 | count u32 | token ids u32*count
* response (type 2): request_id u32 | scaled logits i32 * vocab_size
* error    (type 3): code u16 | utf-8 message
* tokenize-check request  (type 4): request_id u32 | length u32 | bytes
* tokenize-check response (type 5): request_id u32 | accepted u8 |
  [count u32 | ids u32*count when accepted]

The request id convention is (segment_index << 16) | token_position,
which doubles as the fixture record key.

Fixture files: header {magic "HNLF", version u16, identity 37 bytes,
grid_k u8, vocab_size u32}, then records {block u32, position u32,
scaled logits i32 * vocab_size}, sorted by key.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

WIRE_MAGIC = b"HNLP"
WIRE_VERSION = 1

MSG_REQUEST = 1
MSG_RESPONSE = 2
MSG_ERROR = 3
MSG_TOKENIZE_REQUEST = 4
MSG_TOKENIZE_RESPONSE = 5

ERR_GRID_MISMATCH = 1
ERR_CONTEXT_TOO_LONG = 2
ERR_MALFORMED = 3

KIND_EXTERNAL = 4  # predictor-kind tag for externally served models

IDENTITY = struct.Struct("<B32sI")
HANDSHAKE = struct.Struct(f"<4sH{IDENTITY.size}sBI")

FIXTURE_MAGIC = b"HNLF"
FIXTURE_VERSION = 1
FIXTURE_HEADER = struct.Struct(f"<4sH{IDENTITY.size}sBI")
FIXTURE_RECORD_HEAD = struct.Struct("<II")


class ProtocolError(Exception):
    pass


@dataclass(frozen=True)
class Identity:
    """37-byte predictor identity: kind, parameter digest, vocab size."""

    kind: int
    param_hash: bytes
    vocab_size: int

    def to_bytes(self) -> bytes:
        return IDENTITY.pack(self.kind, self.param_hash, self.vocab_size)


def pack_handshake(identity: Identity, grid_k: int, vocab_size: int) -> bytes:
    return HANDSHAKE.pack(WIRE_MAGIC, WIRE_VERSION, identity.to_bytes(),
                          grid_k, vocab_size)


def unpack_handshake(payload: bytes) -> tuple[bytes, int, int]:
    """Returns (raw identity bytes, grid_k, vocab_size)."""
    try:
        magic, version, ident_raw, grid_k, vocab = HANDSHAKE.unpack(payload)
    except struct.error as exc:
        raise ProtocolError(f"handshake is {len(payload)} bytes") from exc
    if magic != WIRE_MAGIC:
        raise ProtocolError(f"bad handshake magic {magic!r}")
    if version != WIRE_VERSION:
        raise ProtocolError(f"unsupported wire version {version}")
    return ident_raw, grid_k, vocab


def pack_error(code: int, message: str) -> bytes:
    return struct.pack("<BH", MSG_ERROR, code) + message.encode("utf-8")


def pack_response(request_id: int, scaled: np.ndarray) -> bytes:
    return (struct.pack("<BI", MSG_RESPONSE, request_id)
            + np.ascontiguousarray(scaled, dtype="<i4").tobytes())


def pack_tokenize_response(request_id: int, ids: list[int] | None) -> bytes:
    if ids is None:
        return struct.pack("<BIB", MSG_TOKENIZE_RESPONSE, request_id, 0)
    return (struct.pack("<BIBI", MSG_TOKENIZE_RESPONSE, request_id, 1, len(ids))
            + np.asarray(ids, dtype="<u4").tobytes())


def send_frame(fh, payload: bytes) -> None:
    fh.write(struct.pack("<I", len(payload)) + payload)
    fh.flush()


def recv_frame(fh) -> bytes | None:
    """One frame, or None on orderly EOF at a frame boundary."""
    head = fh.read(4)
    if not head:
        return None
    if len(head) < 4:
        raise ProtocolError("connection closed mid-frame")
    (length,) = struct.unpack("<I", head)
    payload = fh.read(length)
    if len(payload) < length:
        raise ProtocolError("connection closed mid-frame")
    return payload


def write_fixture_file(path: str, identity: Identity, grid_k: int,
                       vocab_size: int,
                       records: dict[tuple[int, int], np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(FIXTURE_HEADER.pack(FIXTURE_MAGIC, FIXTURE_VERSION,
                                     identity.to_bytes(), grid_k, vocab_size))
        for key in sorted(records):
            fh.write(FIXTURE_RECORD_HEAD.pack(*key))
            fh.write(np.ascontiguousarray(records[key], dtype="<i4").tobytes())
