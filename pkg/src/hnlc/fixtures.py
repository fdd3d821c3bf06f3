"""Fixture files: recorded scaled-logit streams for the replay predictor.

Layout (all integers little-endian):
    magic "HNLF" | version u16 | identity (kind u8, param_hash 32 bytes,
    vocab_size u32) | grid_k u8 | vocab_size u32
followed by records:
    block_index u32 | token_position u32 | scaled logits int32 * vocab_size
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import BadMagic, TruncatedArchive, UnsupportedVersion
from .predictor import IDENTITY_SIZE, PredictorIdentity

FIXTURE_MAGIC = b"HNLF"
FIXTURE_VERSION = 1

_HEADER = struct.Struct(f"<4sH{IDENTITY_SIZE}sBI")
_RECORD_HEAD = struct.Struct("<II")


@dataclass
class FixtureSet:
    """Parsed fixture file: (block_index, token_position) -> scaled logits."""

    identity: PredictorIdentity
    grid_k: int
    vocab_size: int
    records: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)


def write_fixtures(path: str, fixtures: FixtureSet) -> None:
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(
                FIXTURE_MAGIC,
                FIXTURE_VERSION,
                fixtures.identity.to_bytes(),
                fixtures.grid_k,
                fixtures.vocab_size,
            )
        )
        for (block, pos) in sorted(fixtures.records):
            scaled = np.ascontiguousarray(fixtures.records[(block, pos)], dtype="<i4")
            fh.write(_RECORD_HEAD.pack(block, pos))
            fh.write(scaled.tobytes())


def read_fixtures(path: str) -> FixtureSet:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise TruncatedArchive("fixture file shorter than its header")
    magic, version, ident_raw, grid_k, vocab = _HEADER.unpack_from(data, 0)
    if magic != FIXTURE_MAGIC:
        raise BadMagic(f"bad fixture magic {magic!r}")
    if version != FIXTURE_VERSION:
        raise UnsupportedVersion(f"fixture version {version} not supported")
    identity = PredictorIdentity.from_bytes(ident_raw)
    out = FixtureSet(identity=identity, grid_k=grid_k, vocab_size=vocab)
    offset = _HEADER.size
    rec_bytes = _RECORD_HEAD.size + 4 * vocab
    while offset < len(data):
        if offset + rec_bytes > len(data):
            raise TruncatedArchive("fixture file ends mid-record")
        block, pos = _RECORD_HEAD.unpack_from(data, offset)
        scaled = np.frombuffer(
            data, dtype="<i4", count=vocab, offset=offset + _RECORD_HEAD.size
        )
        out.records[(block, pos)] = scaled.astype(np.int32)
        offset += rec_bytes
    return out
