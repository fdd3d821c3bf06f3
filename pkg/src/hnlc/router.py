"""Content-aware routing: a fast compression pre-scan decides, per block,
whether the expensive neural path is worth running.

A block goes Neural only when its fast-compressor ratio falls in the
band (tau_min, tau_max]: below the band it is effectively random and
above it plain dictionary compression already wins.  Everything else is
re-compressed at high effort; if even that expands, the block is stored
raw.  The legacy codec is stdlib zlib (deflate), pinned in the archive
header by name and runtime version.
"""

from __future__ import annotations

import enum
import zlib
from dataclasses import dataclass

SCOUT_LEVEL = 1
LEGACY_LEVEL = 9  # zlib's maximum effort
LEGACY_CODEC_ID = 1
LEGACY_CODEC_NAME = "zlib"
LEGACY_CODEC_VERSION = f"{LEGACY_CODEC_NAME}/{zlib.ZLIB_RUNTIME_VERSION}"

DEFAULT_TAU_MIN = 1.05
DEFAULT_TAU_MAX = 3.0
MIN_ROUTABLE_BLOCK = 256  # below this, ratio estimates are noise


class Route(enum.IntEnum):
    NEURAL = 1
    LEGACY = 2
    STORED = 3


@dataclass(frozen=True)
class RouteDecision:
    route: Route
    scout_ratio: float
    block_span: tuple[int, int]  # (offset, length) in source bytes


def scout_ratio(block: bytes) -> float:
    """original_length / fast_compressed_length at the lowest effort level."""
    return len(block) / len(zlib.compress(block, SCOUT_LEVEL))


def route_for_ratio(ratio: float, tau_min: float = DEFAULT_TAU_MIN,
                    tau_max: float = DEFAULT_TAU_MAX) -> Route:
    """Band-pass rule: Neural iff tau_min < R <= tau_max."""
    return Route.NEURAL if tau_min < ratio <= tau_max else Route.LEGACY


def route(block: bytes, offset: int = 0, tau_min: float = DEFAULT_TAU_MIN,
          tau_max: float = DEFAULT_TAU_MAX) -> RouteDecision:
    if not 1 <= tau_min < tau_max:
        raise ValueError("thresholds must satisfy 1 <= tau_min < tau_max")
    span = (offset, len(block))
    if len(block) < MIN_ROUTABLE_BLOCK:
        return RouteDecision(Route.STORED, 0.0, span)
    ratio = scout_ratio(block)
    return RouteDecision(route_for_ratio(ratio, tau_min, tau_max), ratio, span)


def legacy_compress(block: bytes) -> bytes:
    return zlib.compress(block, LEGACY_LEVEL)


def legacy_decompress(payload: bytes) -> bytes:
    return zlib.decompress(payload)
