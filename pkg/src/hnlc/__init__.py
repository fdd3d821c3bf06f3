"""Hybrid neural/legacy lossless compression toolkit.

Bytes go through a band-pass router: a cheap scout pass measures how
compressible each block already is, only the middle band is handed to a
predictor-driven range coder, and everything else falls back to a pinned
legacy codec or raw storage.  Predictor outputs are snapped to a decimal
grid before probability integerization so encode and decode agree
bit-for-bit across hosts.
"""

from .coder import TOTAL_MASS, Bitstream, CodingDistribution, RangeDecoder, RangeEncoder
from .errors import (
    ArchiveFormatError,
    BadMagic,
    BitstreamExhausted,
    ChecksumMismatch,
    CoderFinalized,
    FixtureExhausted,
    HnlcError,
    IdentityMismatch,
    LogitOutOfRange,
    NonFiniteLogit,
    TableInconsistent,
    TruncatedArchive,
    UnsupportedVersion,
    VocabTooLarge,
)
from .pipeline import (
    CompressResult,
    NeuralSegment,
    PipelineConfig,
    compress,
    compress_detailed,
    decompress,
    segment,
)
from .predictor import PredictorIdentity, PredictorKind
from .quantize import distribution_for, grid_snap, host_softmax, integerize
from .router import Route, RouteDecision, route, scout_ratio

__version__ = "1.0.0"

__all__ = [
    "ArchiveFormatError",
    "BadMagic",
    "Bitstream",
    "BitstreamExhausted",
    "ChecksumMismatch",
    "CoderFinalized",
    "CodingDistribution",
    "CompressResult",
    "FixtureExhausted",
    "HnlcError",
    "IdentityMismatch",
    "LogitOutOfRange",
    "NeuralSegment",
    "NonFiniteLogit",
    "PipelineConfig",
    "PredictorIdentity",
    "PredictorKind",
    "RangeDecoder",
    "RangeEncoder",
    "Route",
    "RouteDecision",
    "TOTAL_MASS",
    "TableInconsistent",
    "TruncatedArchive",
    "UnsupportedVersion",
    "VocabTooLarge",
    "compress",
    "compress_detailed",
    "decompress",
    "distribution_for",
    "grid_snap",
    "host_softmax",
    "integerize",
    "route",
    "scout_ratio",
    "segment",
]
