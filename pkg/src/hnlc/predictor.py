"""Probability models feeding the range coder.

Three built-ins plus a wire-protocol client:

* AdaptiveByteSession -- order-2/1/0 byte counts with add-1 smoothing,
  blended 0.6/0.3/0.1 entirely in integer arithmetic.  No floating point
  touches this path, so it is hardware-deterministic by construction.
* SyntheticLogitSession -- hash-derived "model outputs" on the decimal
  grid; exercises the quantization pipeline without any ML stack.
* ReplaySession -- plays back recorded fixture logits by position.
* ExternalSession -- asks a predictor server over the wire protocol.
"""

from __future__ import annotations

import enum
import hashlib
import struct
from collections import deque
from dataclasses import dataclass

import numpy as np

from .coder import TOTAL_MASS, CodingDistribution
from .errors import FixtureExhausted
from .prf import prf_array, uniform01
from .quantize import distribution_for, host_softmax, inject_drift, integerize, integerize_weights
from .quantize import QuantizedLogits
from . import prf as _prf

VOCAB_BYTES = 256
_BLEND_BITS = 20  # bit width of the rescaled intermediate weights
_SYNTH_CONTEXT = 16  # tokens hashed into the synthetic context digest
_BOOST_STREAM = 0x5851F42D4C957F2D  # seed perturbation for the boost PRF

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


class PredictorKind(enum.IntEnum):
    ADAPTIVE_BYTE = 1
    SYNTHETIC_LOGIT = 2
    REPLAY = 3
    EXTERNAL = 4


IDENTITY_SIZE = 37
_IDENTITY = struct.Struct("<B32sI")


@dataclass(frozen=True)
class PredictorIdentity:
    """Binds an archive to the exact predictor needed to decode it."""

    kind: PredictorKind
    param_hash: bytes  # 32-byte digest over all parameters
    vocab_size: int

    def to_bytes(self) -> bytes:
        return _IDENTITY.pack(int(self.kind), self.param_hash, self.vocab_size)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "PredictorIdentity":
        kind, param_hash, vocab = _IDENTITY.unpack(raw)
        return cls(PredictorKind(kind), param_hash, vocab)


def _digest(*fields) -> bytes:
    h = hashlib.sha256()
    for f in fields:
        if isinstance(f, bytes):
            h.update(f)
        else:
            h.update(str(f).encode())
        h.update(b"\x1f")
    return h.digest()


# folding a zero byte is h = (h * prime) mod 2^64, so a token id < 256
# (three high bytes zero) collapses to one multiply by prime^4
_FNV_PRIME4 = pow(_FNV_PRIME, 4, 1 << 64)


def fnv1a64(token_ids) -> int:
    """FNV-1a over token ids, each folded in as 4 little-endian bytes."""
    h = _FNV_OFFSET
    prime, prime4, mask = _FNV_PRIME, _FNV_PRIME4, _MASK64
    for t in token_ids:
        x = int(t)
        if x < 256:
            h = ((h ^ x) * prime4) & mask
        else:
            h = ((h ^ (x & 0xFF)) * prime) & mask
            h = ((h ^ ((x >> 8) & 0xFF)) * prime) & mask
            h = ((h ^ ((x >> 16) & 0xFF)) * prime) & mask
            h = ((h ^ ((x >> 24) & 0xFF)) * prime) & mask
    return h


def synthetic_logits(context_digest: int, vocab_size: int, seed: int) -> np.ndarray:
    """Deterministic stand-in for model logits.

    logit_i = 4*u1_i - 2 with u1_i = PRF(seed, digest, i) in [0, 1); a
    +6 boost goes to the argmin (first on ties) of an independent PRF
    stream, producing a peaked long-tailed distribution.
    """
    if vocab_size < 2:
        raise ValueError("vocab_size must be >= 2")
    logits = uniform01(prf_array(seed, context_digest, vocab_size))
    logits *= 4.0
    logits -= 2.0
    boost_words = prf_array(seed ^ _BOOST_STREAM, context_digest, vocab_size)
    logits[int(np.argmin(boost_words))] += 6.0
    return logits


class AdaptiveByteSession:
    """Blended byte-context counting model over a sliding window.

    The distribution is 0.6/0.3/0.1 order-2/1/0 with add-1 smoothing,
    computed over a common integer denominator and reduced to coder
    frequencies by integerize_weights.  A fixed intermediate scale keeps
    every product inside int64 provided the window is moderate.
    """

    MAX_WINDOW = 4096  # int64 headroom bound on the blend products

    def __init__(self, window: int, total_mass: int = TOTAL_MASS):
        if window > self.MAX_WINDOW:
            raise ValueError(f"adaptive byte model supports W <= {self.MAX_WINDOW}")
        self.window = window
        self.total_mass = total_mass
        self._c0 = np.zeros(VOCAB_BYTES, dtype=np.int64)
        self._n0 = 0
        self._c1: dict[int, dict[int, int]] = {}
        self._n1: dict[int, int] = {}
        self._c2: dict[int, dict[int, int]] = {}
        self._n2: dict[int, int] = {}
        self._tail: deque = deque()  # the last `window` tokens

    def _contexts(self) -> tuple[int, int]:
        tail = self._tail
        k1 = tail[-1] if len(tail) >= 1 else -1
        k2 = (tail[-2] << 8) | tail[-1] if len(tail) >= 2 else -1
        return k1, k2

    def next_distribution(self) -> CodingDistribution:
        v = VOCAB_BYTES
        k1, k2 = self._contexts()
        t1 = self._c1.get(k1)
        t2 = self._c2.get(k2)
        n1 = self._n1.get(k1, 0)
        n2 = self._n2.get(k2, 0)
        a = (n1 + v) * (self._n0 + v)
        b = (n2 + v) * (self._n0 + v)
        cf = (n2 + v) * (n1 + v)
        g = np.full(v, 6 * a + 3 * b + cf, dtype=np.int64)
        g += cf * self._c0
        if t1:
            for sym, cnt in t1.items():
                g[sym] += 3 * b * cnt
        if t2:
            for sym, cnt in t2.items():
                g[sym] += 6 * a * cnt
        # Rescale the weights into a ~2^20 domain before integerizing so
        # weight * total_mass stays inside int64.  A power-of-two shift
        # keeps the rescale exactly reproducible and cheap.
        total = int(g.sum())
        shift = max(0, total.bit_length() - _BLEND_BITS)
        h = np.maximum(1, g >> shift)
        return integerize_weights(h, self.total_mass)

    def observe(self, token: int) -> None:
        """Slide the window and recount.

        Counts cover only n-grams fully contained in the window, so the
        state after any history equals a fresh session fed just the last
        `window` tokens -- the distribution provably cannot depend on
        anything older.
        """
        tail = self._tail
        if len(tail) == self.window:
            self._evict()
        k1, k2 = self._contexts()
        self._c0[token] += 1
        self._n0 += 1
        if k1 >= 0:
            tab = self._c1.setdefault(k1, {})
            tab[token] = tab.get(token, 0) + 1
            self._n1[k1] = self._n1.get(k1, 0) + 1
        if k2 >= 0:
            tab = self._c2.setdefault(k2, {})
            tab[token] = tab.get(token, 0) + 1
            self._n2[k2] = self._n2.get(k2, 0) + 1
        tail.append(token)

    def _evict(self) -> None:
        tail = self._tail
        old = tail[0]
        self._c0[old] -= 1
        self._n0 -= 1
        if len(tail) >= 2:  # the pair (old, successor) leaves the window
            nxt = tail[1]
            tab = self._c1[old]
            tab[nxt] -= 1
            if tab[nxt] == 0:
                del tab[nxt]
            self._n1[old] -= 1
        if len(tail) >= 3:  # likewise the leading triple
            k2 = (old << 8) | tail[1]
            sym = tail[2]
            tab = self._c2[k2]
            tab[sym] -= 1
            if tab[sym] == 0:
                del tab[sym]
            self._n2[k2] -= 1
        tail.popleft()

    def state_size(self) -> int:
        """Count of live count-table entries (memory instrumentation)."""
        return (
            VOCAB_BYTES
            + sum(len(t) for t in self._c1.values())
            + sum(len(t) for t in self._c2.values())
            + len(self._tail)
        )


class SyntheticLogitSession:
    """Hash-based logit model on the decimal grid, with optional
    reproducible drift noise simulating cross-hardware inference."""

    def __init__(
        self,
        seed: int,
        vocab_size: int,
        grid_k: int,
        total_mass: int = TOTAL_MASS,
        quantize: bool = True,
        drift_epsilon: float = 0.0,
        drift_seed: int = 0,
    ):
        self.seed = seed
        self.vocab_size = vocab_size
        self.grid_k = grid_k
        self.total_mass = total_mass
        self.quantize = quantize
        self.drift_epsilon = drift_epsilon
        self.drift_seed = drift_seed
        self._history: deque = deque(maxlen=_SYNTH_CONTEXT)
        self._position = 0

    def base_logits(self) -> np.ndarray:
        """Current-context logits snapped onto the decimal grid."""
        digest = fnv1a64(self._history)
        raw = synthetic_logits(digest, self.vocab_size, self.seed)
        step = 10.0 ** self.grid_k
        raw *= step
        np.rint(raw, out=raw)
        raw /= step
        return raw

    def next_distribution(self) -> CodingDistribution:
        logits = self.base_logits()
        if self.drift_epsilon > 0.0:
            per_token_seed = _prf.prf(self.drift_seed, self._position)
            logits = inject_drift(logits, self.drift_epsilon, per_token_seed)
        self._position += 1
        return distribution_for(logits, self.grid_k, self.total_mass, self.quantize)

    def observe(self, token: int) -> None:
        self._history.append(token)

    def state_size(self) -> int:
        return self.vocab_size + len(self._history)


class ReplaySession:
    """Serves recorded fixture logits keyed by (block, position)."""

    def __init__(self, fixtures, block_index: int, total_mass: int = TOTAL_MASS):
        self._fixtures = fixtures
        self._block = block_index
        self._pos = 0
        self.total_mass = total_mass

    def next_distribution(self) -> CodingDistribution:
        key = (self._block, self._pos)
        scaled = self._fixtures.records.get(key)
        if scaled is None:
            raise FixtureExhausted(f"no fixture record for block/position {key}")
        self._pos += 1
        q = QuantizedLogits(scaled, self._fixtures.grid_k)
        return integerize(host_softmax(q), self.total_mass)

    def observe(self, token: int) -> None:
        # Distributions come from fixtures by position; context is implicit.
        pass

    def state_size(self) -> int:
        return self._fixtures.vocab_size


class ExternalSession:
    """Wire-protocol client session; one per segment."""

    def __init__(self, client, block_index: int, window: int, grid_k: int,
                 total_mass: int = TOTAL_MASS):
        self._client = client
        self._block = block_index
        self._window = window
        self._context: list[int] = []
        self._pos = 0
        self.grid_k = grid_k
        self.total_mass = total_mass

    def next_distribution(self) -> CodingDistribution:
        request_id = ((self._block & 0xFFFF) << 16) | (self._pos & 0xFFFF)
        scaled = self._client.next_logits(request_id, self._context[-self._window:])
        self._pos += 1
        q = QuantizedLogits(scaled, self.grid_k)
        return integerize(host_softmax(q), self.total_mass)

    def observe(self, token: int) -> None:
        self._context.append(token)
        if len(self._context) > self._window:
            del self._context[: len(self._context) - self._window]

    def state_size(self) -> int:
        return len(self._context)


def adaptive_identity(window: int, total_mass: int) -> PredictorIdentity:
    return PredictorIdentity(
        kind=PredictorKind.ADAPTIVE_BYTE,
        param_hash=_digest(
            b"hnlc-adaptive-byte-v1",
            "orders=2/1/0  weights=6/3/1  smoothing=add1",
            window,
            total_mass,
            _BLEND_BITS,
        ),
        vocab_size=VOCAB_BYTES,
    )


def synthetic_identity(
    seed: int, vocab_size: int, grid_k: int, total_mass: int, quantize: bool
) -> PredictorIdentity:
    return PredictorIdentity(
        kind=PredictorKind.SYNTHETIC_LOGIT,
        param_hash=_digest(
            b"hnlc-synthetic-logit-v1", seed, vocab_size, grid_k, total_mass,
            int(quantize), _SYNTH_CONTEXT,
        ),
        vocab_size=vocab_size,
    )
