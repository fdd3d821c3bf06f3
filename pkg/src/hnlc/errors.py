"""Exception hierarchy for the hnlc toolkit."""


class HnlcError(Exception):
    """Base class for all errors raised by this package."""


class NonFiniteLogit(HnlcError):
    """A logit vector contained NaN or infinity."""


class LogitOutOfRange(HnlcError):
    """A quantized logit exceeded the magnitude sanity bound."""


class VocabTooLarge(HnlcError):
    """Vocabulary too large for the requested total mass."""


class BitstreamExhausted(HnlcError):
    """Decoder requested more symbols than the payload encodes."""


class CoderFinalized(HnlcError):
    """Encoder was used after finalize()."""


class FixtureExhausted(HnlcError):
    """Replay predictor ran out of recorded distributions."""


class ExternalPredictorUnavailable(HnlcError):
    """External predictor endpoint could not be reached or failed."""


class IdentityMismatch(HnlcError):
    """Archive predictor identity does not match the available predictor."""


class ChecksumMismatch(HnlcError):
    """Decoded data failed an integrity check (divergence signal)."""

    def __init__(self, message: str, block_index: int | None = None):
        super().__init__(message)
        self.block_index = block_index


class ArchiveFormatError(HnlcError):
    """Base class for malformed-archive errors."""


class BadMagic(ArchiveFormatError):
    pass


class UnsupportedVersion(ArchiveFormatError):
    pass


class TruncatedArchive(ArchiveFormatError):
    pass


class TableInconsistent(ArchiveFormatError):
    pass
