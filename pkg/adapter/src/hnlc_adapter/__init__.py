"""External predictor server for the hnlc compressor.

Wraps a causal language model, snaps its logits onto the decimal grid
on-device, serves them as integers over the compressor's wire protocol,
and records replay fixtures in the shared fixture format.
"""

from .model import DEFAULT_MODEL, CausalLogitModel
from .protocol import Identity, ProtocolError, write_fixture_file
from .server import AdapterConfig, AdapterServer, serve_stdio
from .tokenizer import detokenize, tokenize_roundtrip_check

__version__ = "1.0.0"

__all__ = [
    "AdapterConfig",
    "AdapterServer",
    "CausalLogitModel",
    "DEFAULT_MODEL",
    "Identity",
    "ProtocolError",
    "detokenize",
    "serve_stdio",
    "tokenize_roundtrip_check",
    "write_fixture_file",
    "__version__",
]
