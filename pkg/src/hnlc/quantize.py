"""Decimal-grid logit quantization and deterministic integerization.

The chain raw logits -> grid snap -> host softmax -> integer frequencies
is the determinism substrate of the whole toolkit: once logits are
snapped to the 10^-k lattice, sub-grid numerical drift between machines
cannot change the coding distribution.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal

import numpy as np

from .coder import TOTAL_MASS, CodingDistribution
from .errors import LogitOutOfRange, NonFiniteLogit, VocabTooLarge
from .prf import prf_array, uniform01

# Fraction of the grid step within which a scaled logit is treated as a
# half-integer tie and re-rounded in exact decimal arithmetic.  Binary
# floats cannot represent decimal literals exactly, so a product such as
# 2.0315 * 1000 lands at 2031.4999999999998; this window recovers the
# intended decimal tie.
_TIE_WINDOW = 1e-6

# Smallest positive double (subnormal); used to keep softmax tails nonzero.
_TINY = 5e-324


@dataclass(frozen=True)
class QuantizedLogits:
    """Fixed-point logits: scaled_values[i] represents scaled_values[i] * 10^-k."""

    scaled_values: np.ndarray  # int32
    grid_k: int


@dataclass(frozen=True)
class HostProbabilities:
    """Double-precision probabilities; all entries > 0, sum within 1e-9 of 1."""

    probs: np.ndarray  # float64


def _decimal_round(value: float, grid_k: int) -> int:
    # Round the shortest decimal representation of the double, half to even.
    d = Decimal(repr(value)).scaleb(grid_k)
    return int(d.quantize(Decimal(1), rounding=ROUND_HALF_EVEN))


def grid_snap(logits: np.ndarray, grid_k: int) -> QuantizedLogits:
    """Snap logits to the 10^-k grid with round-half-to-even ties.

    Raises NonFiniteLogit on NaN/inf and LogitOutOfRange when a snapped
    value exceeds 10^(k+3) in magnitude.
    """
    if not 1 <= grid_k <= 6:
        raise ValueError(f"grid_k must be in [1, 6], got {grid_k}")
    z = np.asarray(logits, dtype=np.float64)
    if not np.isfinite(z).all():
        raise NonFiniteLogit("logits contain NaN or infinity")
    y = z * (10.0 ** grid_k)
    scaled = np.rint(y)
    # Values within the tie window of a decimal half step are re-rounded
    # exactly; everywhere else the double product is already decisive.
    # frac-distance-to-half is computed in place on y, which is scratch.
    y -= np.floor(y)
    y -= 0.5
    np.abs(y, out=y)
    ties = y < _TIE_WINDOW
    if ties.any():
        for i in np.nonzero(ties)[0]:
            scaled[i] = _decimal_round(float(z[i]), grid_k)
    bound = 10 ** (grid_k + 3)
    if scaled.max(initial=0) > bound or scaled.min(initial=0) < -bound:
        raise LogitOutOfRange(f"|scaled logit| exceeds {bound}")
    return QuantizedLogits(scaled.astype(np.int32), grid_k)


def host_softmax(q: QuantizedLogits) -> HostProbabilities:
    """Softmax in IEEE double precision with max subtraction.

    Entries that underflow to zero are clamped to the smallest positive
    double so no symbol ever loses all mass.
    """
    z = q.scaled_values.astype(np.float64)
    z /= 10.0 ** q.grid_k
    return _softmax_f64(z)


def _softmax_f64(z: np.ndarray) -> HostProbabilities:
    e = z - z.max()
    np.exp(e, out=e)
    e /= e.sum()
    np.maximum(e, _TINY, out=e)
    return HostProbabilities(e)


def integerize(p: HostProbabilities, total_mass: int = TOTAL_MASS) -> CodingDistribution:
    """Turn probabilities into integer frequencies summing exactly to M.

    f_i = max(1, floor(p_i * (M - V))), then the remainder is handed out
    one unit at a time cycling through symbols ordered by (descending
    probability, ascending index).
    """
    probs = p.probs
    v = len(probs)
    if v >= total_mass // 2:
        raise VocabTooLarge(f"vocabulary of {v} needs total mass >= {2 * v}")
    f = np.maximum(1, np.floor(probs * (total_mass - v)).astype(np.int64))
    remainder = total_mass - int(f.sum())
    if remainder > 0:
        # cycling through the (descending probability, ascending index)
        # order r times == r//v units to everyone plus one extra to the
        # first r%v symbols of that order
        cycles, extra = divmod(remainder, v)
        if cycles:
            f += cycles
        if extra:
            f[_top_k(probs, extra)] += 1
    elif remainder < 0:
        # Possible only when sum(probs) creeps above 1 by float error;
        # shave units from the least probable symbols that can spare one.
        for idx in np.argsort(-probs, kind="stable")[::-1]:
            if remainder == 0:
                break
            if f[idx] > 1:
                f[idx] -= 1
                remainder += 1
    return CodingDistribution(f, total_mass, validate=False)


def _top_k(values: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest values, ties broken by ascending index --
    the same selection as a stable descending argsort prefix, without
    sorting the whole vector."""
    neg = -values
    threshold = np.partition(neg, k - 1)[k - 1]
    strict = np.nonzero(neg < threshold)[0]
    ties = np.nonzero(neg == threshold)[0][: k - len(strict)]
    return np.concatenate((strict, ties))


def integerize_weights(weights: np.ndarray, total_mass: int = TOTAL_MASS) -> CodingDistribution:
    """Exact-integer sibling of integerize() for count-based predictors.

    Weights are nonnegative int64 proportional masses; the same floor
    plus cyclic-remainder rule is applied in integer arithmetic only.
    """
    w = np.asarray(weights, dtype=np.int64)
    v = len(w)
    if v >= total_mass // 2:
        raise VocabTooLarge(f"vocabulary of {v} needs total mass >= {2 * v}")
    total = int(w.sum())
    f = np.maximum(1, (w * (total_mass - v)) // total)
    remainder = total_mass - int(f.sum())
    if remainder > 0:
        cycles, extra = divmod(remainder, v)
        if cycles:
            f += cycles
        if extra:
            f[_top_k(w, extra)] += 1
    return CodingDistribution(f, total_mass, validate=False)


def inject_drift(logits: np.ndarray, epsilon: float, seed: int) -> np.ndarray:
    """Add reproducible uniform noise in [-epsilon, +epsilon] per entry.

    Noise is a counter-based PRF of (seed, entry index), so the same
    (seed, epsilon) always yields the same perturbation on any host.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    z = np.asarray(logits, dtype=np.float64)
    if epsilon == 0:
        return z.copy()
    u = uniform01(prf_array(seed, 0, len(z)))
    return z + (2.0 * u - 1.0) * epsilon


def distribution_for(
    logits: np.ndarray,
    grid_k: int,
    total_mass: int = TOTAL_MASS,
    quantize: bool = True,
) -> CodingDistribution:
    """Full pipeline from raw logits to a coding distribution.

    With quantize=False the grid snap is skipped (experimental mode used
    to demonstrate drift-induced divergence); the softmax then runs on
    the raw double logits.
    """
    if quantize:
        return integerize(host_softmax(grid_snap(logits, grid_k)), total_mass)
    z = np.asarray(logits, dtype=np.float64)
    if not np.isfinite(z).all():
        raise NonFiniteLogit("logits contain NaN or infinity")
    return integerize(_softmax_f64(z), total_mass)
