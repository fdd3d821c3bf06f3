"""Byte-level tokenizer with an explicit round-trip certificate.

Token ids are the bytes themselves (vocab 256), so detokenization is
trivially exact; the check still rejects anything that is not valid
UTF-8, mirroring how text-domain model tokenizers behave, and the
compressor routes rejected blocks to its legacy codec.
"""

from __future__ import annotations

VOCAB_SIZE = 256


def tokenize_roundtrip_check(data: bytes) -> list[int] | None:
    """Token ids when the data round-trips exactly, else None."""
    try:
        data.decode("utf-8")
    except UnicodeDecodeError:
        return None
    ids = list(data)
    if detokenize(ids) != data:  # certificate, not an assumption
        return None
    return ids


def detokenize(ids: list[int]) -> bytes:
    return bytes(ids)
