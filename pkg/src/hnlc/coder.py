"""Integer range coder over fixed-total-mass frequency tables.

The coder keeps a 64-bit interval [low, low + range) and renormalizes
byte-wise: whenever the interval fits inside one top-byte partition the
top byte is emitted, and the interval is kept at width >= 2^48 so that
the per-symbol division loss against the ideal code length is below
2^-18 bits.  Carry propagation is avoided by clamping: when a narrow
interval straddles a partition boundary, the larger half is kept (at
most one bit of loss per event, and events are rare).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BitstreamExhausted, CoderFinalized, VocabTooLarge

TOTAL_MASS = 1 << 30  # archive-wide total mass M

_MASK64 = (1 << 64) - 1
_TOP = 1 << 56  # one-byte partition size
_BOTTOM = 1 << 48  # renormalization floor for the interval width
_WINDOW_BYTES = 8


class CodingDistribution:
    """Integer frequency table with an exact total mass.

    Invariants: every frequency >= 1 and sum(frequencies) == total_mass.
    The cumulative prefix sums are materialized once so both coder sides
    walk identical tables.
    """

    __slots__ = ("freqs", "cum", "total_mass")

    def __init__(self, freqs, total_mass: int = TOTAL_MASS, validate: bool = True):
        f = np.ascontiguousarray(freqs, dtype=np.int64)
        if validate:
            if f.ndim != 1 or len(f) < 1:
                raise ValueError("frequencies must be a nonempty 1-d vector")
            if len(f) >= total_mass // 2:
                raise VocabTooLarge(
                    f"vocabulary of {len(f)} needs total mass >= {2 * len(f)}"
                )
            if int(f.min()) < 1:
                raise ValueError("every symbol needs frequency >= 1")
            if int(f.sum()) != total_mass:
                raise ValueError(
                    f"frequencies sum to {int(f.sum())}, expected {total_mass}"
                )
        self.freqs = f
        self.total_mass = total_mass
        cum = np.empty(len(f) + 1, dtype=np.int64)
        cum[0] = 0
        np.cumsum(f, out=cum[1:])
        self.cum = cum

    def __len__(self) -> int:
        return len(self.freqs)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, CodingDistribution)
            and self.total_mass == other.total_mass
            and np.array_equal(self.freqs, other.freqs)
        )

    @classmethod
    def uniform(cls, vocab_size: int, total_mass: int = TOTAL_MASS) -> "CodingDistribution":
        base, extra = divmod(total_mass, vocab_size)
        f = np.full(vocab_size, base, dtype=np.int64)
        f[:extra] += 1
        return cls(f, total_mass, validate=False)


@dataclass
class Bitstream:
    """Finalized coder output: payload bytes plus the exact bit count."""

    payload: bytes
    bit_length: int


def _clamp(low: int, range_: int) -> tuple[int, int]:
    """Resolve a partition-straddling narrow interval by keeping the
    larger half.  Deterministic on both coder sides."""
    boundary = ((low >> 56) + 1) << 56
    lower = boundary - low
    upper = range_ - lower
    if lower >= upper:
        return low, lower
    return boundary, upper


class RangeEncoder:
    """Single-use encoder; finalize() flushes and invalidates it."""

    def __init__(self):
        self._low = 0
        self._range = _MASK64
        self._out = bytearray()
        self._finalized = False

    def encode_symbol(self, dist: CodingDistribution, symbol: int) -> None:
        if self._finalized:
            raise CoderFinalized("encode_symbol after finalize")
        c = int(dist.cum[symbol])
        f = int(dist.freqs[symbol])
        t = self._range // dist.total_mass
        self._low += c * t
        self._range = f * t
        self._normalize()

    def _normalize(self) -> None:
        low, range_, out = self._low, self._range, self._out
        while True:
            # Compare against the inclusive endpoint: an interval ending
            # exactly on a partition boundary still lives in one partition.
            if (low ^ (low + range_ - 1)) < _TOP:
                out.append(low >> 56)
                low = (low << 8) & _MASK64
                range_ = min(range_ << 8, _MASK64)
            elif range_ < _BOTTOM:
                low, range_ = _clamp(low, range_)
            else:
                break
        self._low, self._range = low, range_

    def finalize(self) -> Bitstream:
        """Flush the fewest top bytes that pin a value inside the final
        interval; the decoder zero-pads past the payload end."""
        if self._finalized:
            raise CoderFinalized("finalize called twice")
        self._finalized = True
        low, range_ = self._low, self._range
        for nbytes in range(1, _WINDOW_BYTES + 1):
            shift = 64 - 8 * nbytes
            candidate = ((low + (1 << shift) - 1) >> shift) << shift
            if low <= candidate < low + range_:
                self._out += candidate.to_bytes(8, "big")[:nbytes]
                break
        payload = bytes(self._out)
        return Bitstream(payload=payload, bit_length=8 * len(payload))


class RangeDecoder:
    """Mirror of RangeEncoder; must consume byte-identical distributions."""

    def __init__(self, stream: Bitstream | bytes):
        payload = stream.payload if isinstance(stream, Bitstream) else stream
        self._payload = payload
        self._pos = 0
        self._low = 0
        self._range = _MASK64
        code = 0
        for _ in range(_WINDOW_BYTES):
            code = (code << 8) | self._next_byte()
        self._code = code

    def _next_byte(self) -> int:
        pos = self._pos
        if pos >= len(self._payload) + _WINDOW_BYTES:
            raise BitstreamExhausted(
                f"decoder ran past payload of {len(self._payload)} bytes"
            )
        self._pos = pos + 1
        return self._payload[pos] if pos < len(self._payload) else 0

    def decode_symbol(self, dist: CodingDistribution) -> int:
        t = self._range // dist.total_mass
        offset = (self._code - self._low) // t
        if offset >= dist.total_mass:
            offset = dist.total_mass - 1
        symbol = int(np.searchsorted(dist.cum, offset, side="right")) - 1
        c = int(dist.cum[symbol])
        f = int(dist.freqs[symbol])
        self._low += c * t
        self._range = f * t
        self._normalize()
        return symbol

    def _normalize(self) -> None:
        low, range_, code = self._low, self._range, self._code
        while True:
            if (low ^ (low + range_ - 1)) < _TOP:
                low = (low << 8) & _MASK64
                range_ = min(range_ << 8, _MASK64)
                code = ((code << 8) & _MASK64) | self._next_byte()
            elif range_ < _BOTTOM:
                low, range_ = _clamp(low, range_)
            else:
                break
        self._low, self._range, self._code = low, range_, code
