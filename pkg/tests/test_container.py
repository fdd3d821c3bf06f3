"""Archive container: byte layout round trips and malformed-input errors."""

import hashlib
import struct
import zlib

import pytest

from hnlc.container import (
    ARCHIVE_MAGIC,
    ARCHIVE_VERSION,
    MICRO,
    ArchiveFooter,
    ArchiveHeader,
    BlockDescriptor,
    read_archive,
    write_archive,
)
from hnlc.errors import BadMagic, TableInconsistent, TruncatedArchive, UnsupportedVersion
from hnlc.predictor import adaptive_identity
from hnlc.router import LEGACY_CODEC_ID, LEGACY_CODEC_VERSION, Route


def make_archive(payloads=(b"abc", b"", b"0123456789")):
    payloads = list(payloads)
    descriptors = []
    routes = [Route.LEGACY, Route.STORED, Route.NEURAL]
    for i, payload in enumerate(payloads):
        descriptors.append(
            BlockDescriptor(
                route=routes[i % 3],
                original_length=100 + i,
                payload_length=len(payload),
                graft_length=128 if routes[i % 3] is Route.NEURAL else 0,
                target_token_count=100 + i if routes[i % 3] is Route.NEURAL else 0,
                scout_ratio_micro=1_234_567 + i,
                crc32=zlib.crc32(payload),
            )
        )
    header = ArchiveHeader(
        identity=adaptive_identity(2048, 1 << 30),
        segment_tokens=2048,
        graft_tokens=128,
        window=2048,
        grid_k=3,
        total_mass=1 << 30,
        tau_min_micro=int(1.05 * MICRO),
        tau_max_micro=3 * MICRO,
        quantize=True,
        block_bytes=65536,
        codec_id=LEGACY_CODEC_ID,
        codec_version=LEGACY_CODEC_VERSION,
        block_count=len(payloads),
    )
    blob = b"".join(payloads)
    footer = ArchiveFooter(
        source_sha256=hashlib.sha256(b"pretend source").digest(),
        payload_sha256=hashlib.sha256(blob).digest(),
    )
    return header, descriptors, payloads, footer


def test_round_trip_preserves_everything():
    header, descriptors, payloads, footer = make_archive()
    data = write_archive(header, descriptors, payloads, footer)
    rh, rd, payload_offset, rf = read_archive(data)
    assert rh == header
    assert rd == descriptors
    assert rf == footer
    cursor = payload_offset
    for d, payload in zip(rd, payloads):
        assert data[cursor : cursor + d.payload_length] == payload
        cursor += d.payload_length


def test_empty_archive():
    header, _, _, footer = make_archive([])
    data = write_archive(header, [], [], footer)
    rh, rd, _, rf = read_archive(data)
    assert rh.block_count == 0 and rd == [] and rf == footer


def test_magic_starts_the_file():
    header, descriptors, payloads, footer = make_archive()
    data = write_archive(header, descriptors, payloads, footer)
    assert data.startswith(ARCHIVE_MAGIC)


def test_bad_magic():
    data = write_archive(*make_archive())
    with pytest.raises(BadMagic):
        read_archive(b"XXXX" + data[4:])


def test_unsupported_version():
    data = bytearray(write_archive(*make_archive()))
    struct.pack_into("<H", data, 4, ARCHIVE_VERSION + 1)
    with pytest.raises(UnsupportedVersion):
        read_archive(bytes(data))


def test_truncated_anywhere():
    data = write_archive(*make_archive())
    for cut in range(len(data)):
        with pytest.raises(TruncatedArchive):
            read_archive(data[:cut])


def test_trailing_garbage_rejected():
    data = write_archive(*make_archive())
    with pytest.raises(TableInconsistent):
        read_archive(data + b"\x00")


def test_unknown_route_rejected():
    header, descriptors, payloads, footer = make_archive()
    data = bytearray(write_archive(header, descriptors, payloads, footer))
    # descriptor table starts right after the variable-length header
    table_offset = data.index(bytes([int(descriptors[0].route)])
                              + struct.pack("<I", descriptors[0].original_length))
    data[table_offset] = 99
    with pytest.raises(TableInconsistent):
        read_archive(bytes(data))


def test_mismatched_counts_rejected_on_write():
    header, descriptors, payloads, footer = make_archive()
    with pytest.raises(ValueError):
        write_archive(header, descriptors[:-1], payloads, footer)
    with pytest.raises(ValueError):
        write_archive(header, descriptors, payloads[:-1] + [b"wrong length"], footer)


def test_no_floats_in_thresholds():
    header, descriptors, payloads, footer = make_archive()
    rh, rd, _, _ = read_archive(write_archive(header, descriptors, payloads, footer))
    assert isinstance(rh.tau_min_micro, int) and rh.tau_min_micro == 1_050_000
    assert isinstance(rd[0].scout_ratio_micro, int)
