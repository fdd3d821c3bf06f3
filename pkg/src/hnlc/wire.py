"""Length-prefixed binary framing for external predictor servers.

Frames are u32-length-prefixed, little-endian throughout:

* handshake: "HNLP" | version u16 | identity (37 bytes) | grid_k u8 |
  vocab_size u32.  The client sends one first (identity zeroed, its own
  grid_k); the server answers with its filled handshake or an error
  frame and closes.
* request  (type 1): request_id u32 | count u32 | token ids u32*count
* response (type 2): request_id u32 | scaled logits i32 * vocab_size
* error    (type 3): code u16 | utf-8 message
* tokenize-check request  (type 4): request_id u32 | length u32 | bytes
* tokenize-check response (type 5): request_id u32 | accepted u8 |
  [count u32 | ids u32*count when accepted]

Error codes: 1 grid mismatch, 2 context too long, 3 malformed frame.
The request id convention is (segment_index << 16) | token_position so
recorded fixtures can be keyed without extra fields.
"""

from __future__ import annotations

import socket
import struct

import numpy as np

from .errors import ExternalPredictorUnavailable
from .predictor import IDENTITY_SIZE, PredictorIdentity, PredictorKind

WIRE_MAGIC = b"HNLP"
WIRE_VERSION = 1

MSG_REQUEST = 1
MSG_RESPONSE = 2
MSG_ERROR = 3
MSG_TOKENIZE_REQUEST = 4
MSG_TOKENIZE_RESPONSE = 5

ERR_GRID_MISMATCH = 1
ERR_CONTEXT_TOO_LONG = 2
ERR_MALFORMED = 3

_HANDSHAKE = struct.Struct(f"<4sH{IDENTITY_SIZE}sBI")


def pack_handshake(identity: PredictorIdentity, grid_k: int, vocab_size: int) -> bytes:
    return _HANDSHAKE.pack(WIRE_MAGIC, WIRE_VERSION, identity.to_bytes(), grid_k, vocab_size)


def unpack_handshake(payload: bytes):
    magic, version, ident_raw, grid_k, vocab = _HANDSHAKE.unpack(payload)
    if magic != WIRE_MAGIC:
        raise ExternalPredictorUnavailable(f"bad handshake magic {magic!r}")
    if version != WIRE_VERSION:
        raise ExternalPredictorUnavailable(f"unsupported wire version {version}")
    return PredictorIdentity.from_bytes(ident_raw), grid_k, vocab


def send_frame(sock_file, payload: bytes) -> None:
    sock_file.write(struct.pack("<I", len(payload)) + payload)
    sock_file.flush()


def recv_frame(sock_file) -> bytes:
    head = sock_file.read(4)
    if len(head) < 4:
        raise ExternalPredictorUnavailable("connection closed mid-frame")
    (length,) = struct.unpack("<I", head)
    payload = sock_file.read(length)
    if len(payload) < length:
        raise ExternalPredictorUnavailable("connection closed mid-frame")
    return payload


def connect_endpoint(endpoint: str) -> socket.socket:
    """Open a stream socket for "unix:PATH" or "tcp:HOST:PORT"."""
    try:
        if endpoint.startswith("unix:"):
            sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
            sock.connect(endpoint[5:])
            return sock
        if endpoint.startswith("tcp:"):
            host, port = endpoint[4:].rsplit(":", 1)
            return socket.create_connection((host, int(port)))
    except OSError as exc:
        raise ExternalPredictorUnavailable(f"cannot reach {endpoint}: {exc}") from exc
    raise ExternalPredictorUnavailable(
        f"unsupported client endpoint {endpoint!r} (use unix:PATH or tcp:HOST:PORT)"
    )


class WireClient:
    """One connection to a predictor server; one in-flight request."""

    def __init__(self, endpoint: str, grid_k: int):
        self._sock = connect_endpoint(endpoint)
        self._file = self._sock.makefile("rwb")
        placeholder = PredictorIdentity(PredictorKind.EXTERNAL, bytes(32), 0)
        send_frame(self._file, pack_handshake(placeholder, grid_k, 0))
        reply = recv_frame(self._file)
        if reply[:1] == bytes([MSG_ERROR]):
            code, msg = self._parse_error(reply)
            raise ExternalPredictorUnavailable(f"handshake refused (code {code}): {msg}")
        self.identity, self.grid_k, self.vocab_size = unpack_handshake(reply)
        if self.grid_k != grid_k:
            raise ExternalPredictorUnavailable(
                f"server grid_k {self.grid_k} != requested {grid_k}"
            )

    @staticmethod
    def _parse_error(frame: bytes) -> tuple[int, str]:
        (code,) = struct.unpack_from("<H", frame, 1)
        return code, frame[3:].decode("utf-8", "replace")

    def next_logits(self, request_id: int, context_ids) -> np.ndarray:
        payload = struct.pack("<BII", MSG_REQUEST, request_id, len(context_ids))
        payload += np.asarray(context_ids, dtype="<u4").tobytes()
        send_frame(self._file, payload)
        reply = recv_frame(self._file)
        kind = reply[0]
        if kind == MSG_ERROR:
            code, msg = self._parse_error(reply)
            raise ExternalPredictorUnavailable(f"server error (code {code}): {msg}")
        if kind != MSG_RESPONSE:
            raise ExternalPredictorUnavailable(f"unexpected frame type {kind}")
        (rid,) = struct.unpack_from("<I", reply, 1)
        if rid != request_id:
            raise ExternalPredictorUnavailable("response id does not match request")
        scaled = np.frombuffer(reply, dtype="<i4", offset=5)
        if len(scaled) != self.vocab_size:
            raise ExternalPredictorUnavailable("response logit count != vocab size")
        return scaled.astype(np.int32)

    def tokenize_check(self, data: bytes):
        """Returns token ids, or None when the server rejects the block."""
        payload = struct.pack("<BII", MSG_TOKENIZE_REQUEST, 0, len(data)) + data
        send_frame(self._file, payload)
        reply = recv_frame(self._file)
        if reply[0] == MSG_ERROR:
            code, msg = self._parse_error(reply)
            raise ExternalPredictorUnavailable(f"server error (code {code}): {msg}")
        if reply[0] != MSG_TOKENIZE_RESPONSE:
            raise ExternalPredictorUnavailable(f"unexpected frame type {reply[0]}")
        accepted = reply[5]
        if not accepted:
            return None
        (count,) = struct.unpack_from("<I", reply, 6)
        return np.frombuffer(reply, dtype="<u4", count=count, offset=10).tolist()

    def close(self) -> None:
        try:
            self._file.close()
            self._sock.close()
        except OSError:
            pass
