"""Bit-exact archive container.

Layout (all integers little-endian, no padding):

    header:
        magic "HNLC" | version u16
        identity: kind u8 | param_hash 32 bytes | vocab_size u32
        config echo: L u32 | K u32 | W u32 | grid_k u8 | M u64 |
                     tau_min micro-units u32 | tau_max micro-units u32 |
                     flags u8 (bit 0: quantize) | block_bytes u32
        legacy codec: id u8 | version-string length u8 | ascii bytes
        block_count u32
    descriptor table: block_count fixed 27-byte records
        route u8 | original_length u32 | payload_length u32 |
        graft_length u16 | target_token_count u32 |
        scout_ratio micro-units u32 | crc32 u32
    payloads in descriptor order
    footer: sha256(source) 32 bytes | sha256(payload bytes) 32 bytes

Thresholds and ratios are stored in micro-units (1.05 -> 1_050_000) so
archives never contain floating-point fields.  The config echo is
authoritative on decode.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .errors import BadMagic, TableInconsistent, TruncatedArchive, UnsupportedVersion
from .predictor import IDENTITY_SIZE, PredictorIdentity
from .router import Route

ARCHIVE_MAGIC = b"HNLC"
ARCHIVE_VERSION = 1
MICRO = 1_000_000

_FIXED_HEADER = struct.Struct(f"<4sH{IDENTITY_SIZE}sIIIBQIIBIBB")
_DESCRIPTOR = struct.Struct("<BIIHIII")
FOOTER_SIZE = 64


@dataclass(frozen=True)
class ArchiveHeader:
    identity: PredictorIdentity
    segment_tokens: int  # L
    graft_tokens: int  # K
    window: int  # W
    grid_k: int
    total_mass: int  # M
    tau_min_micro: int
    tau_max_micro: int
    quantize: bool
    block_bytes: int
    codec_id: int
    codec_version: str
    block_count: int


@dataclass(frozen=True)
class BlockDescriptor:
    route: Route
    original_length: int
    payload_length: int
    graft_length: int
    target_token_count: int  # Neural only, zero otherwise
    scout_ratio_micro: int
    crc32: int


@dataclass(frozen=True)
class ArchiveFooter:
    source_sha256: bytes
    payload_sha256: bytes


def write_archive(
    header: ArchiveHeader,
    descriptors: list[BlockDescriptor],
    payloads: list[bytes],
    footer: ArchiveFooter,
) -> bytes:
    if len(descriptors) != len(payloads):
        raise ValueError("descriptor/payload counts differ")
    if len(descriptors) != header.block_count:
        raise ValueError("header block_count does not match descriptors")
    codec_version = header.codec_version.encode("ascii")
    out = bytearray()
    out += _FIXED_HEADER.pack(
        ARCHIVE_MAGIC,
        ARCHIVE_VERSION,
        header.identity.to_bytes(),
        header.segment_tokens,
        header.graft_tokens,
        header.window,
        header.grid_k,
        header.total_mass,
        header.tau_min_micro,
        header.tau_max_micro,
        1 if header.quantize else 0,
        header.block_bytes,
        header.codec_id,
        len(codec_version),
    )
    out += codec_version
    out += struct.pack("<I", header.block_count)
    for d, payload in zip(descriptors, payloads):
        if d.payload_length != len(payload):
            raise ValueError("descriptor payload_length does not match payload")
        out += _DESCRIPTOR.pack(
            int(d.route),
            d.original_length,
            d.payload_length,
            d.graft_length,
            d.target_token_count,
            d.scout_ratio_micro,
            d.crc32,
        )
    for payload in payloads:
        out += payload
    out += footer.source_sha256 + footer.payload_sha256
    return bytes(out)


def read_archive(data: bytes):
    """Parse and validate; returns (header, descriptors, payload_offset, footer)."""
    if len(data) < _FIXED_HEADER.size:
        raise TruncatedArchive("archive shorter than its fixed header")
    (
        magic,
        version,
        ident_raw,
        seg_tokens,
        graft_tokens,
        window,
        grid_k,
        total_mass,
        tau_min_micro,
        tau_max_micro,
        flags,
        block_bytes,
        codec_id,
        codec_version_len,
    ) = _FIXED_HEADER.unpack_from(data, 0)
    if magic != ARCHIVE_MAGIC:
        raise BadMagic(f"bad archive magic {magic!r}")
    if version != ARCHIVE_VERSION:
        raise UnsupportedVersion(f"archive version {version} not supported")
    offset = _FIXED_HEADER.size
    if offset + codec_version_len + 4 > len(data):
        raise TruncatedArchive("archive ends inside the header")
    codec_version = data[offset : offset + codec_version_len].decode("ascii")
    offset += codec_version_len
    (block_count,) = struct.unpack_from("<I", data, offset)
    offset += 4
    header = ArchiveHeader(
        identity=PredictorIdentity.from_bytes(ident_raw),
        segment_tokens=seg_tokens,
        graft_tokens=graft_tokens,
        window=window,
        grid_k=grid_k,
        total_mass=total_mass,
        tau_min_micro=tau_min_micro,
        tau_max_micro=tau_max_micro,
        quantize=bool(flags & 1),
        block_bytes=block_bytes,
        codec_id=codec_id,
        codec_version=codec_version,
        block_count=block_count,
    )
    table_size = block_count * _DESCRIPTOR.size
    if offset + table_size + FOOTER_SIZE > len(data):
        raise TruncatedArchive("archive ends inside the descriptor table")
    descriptors = []
    for i in range(block_count):
        route, orig, paylen, graft, targets, ratio_micro, crc = _DESCRIPTOR.unpack_from(
            data, offset + i * _DESCRIPTOR.size
        )
        try:
            descriptors.append(
                BlockDescriptor(Route(route), orig, paylen, graft, targets, ratio_micro, crc)
            )
        except ValueError as exc:
            raise TableInconsistent(f"descriptor {i}: unknown route {route}") from exc
    payload_offset = offset + table_size
    payload_total = sum(d.payload_length for d in descriptors)
    expected = payload_offset + payload_total + FOOTER_SIZE
    if expected > len(data):
        raise TruncatedArchive(
            f"archive is {len(data)} bytes, table requires {expected}"
        )
    if expected < len(data):
        raise TableInconsistent(
            f"{len(data) - expected} trailing bytes beyond the footer"
        )
    footer = ArchiveFooter(
        source_sha256=data[-64:-32], payload_sha256=data[-32:]
    )
    return header, descriptors, payload_offset, footer
