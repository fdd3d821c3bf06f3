"""Predictor server: answers wire-protocol requests with grid-snapped
logits and optionally records every response as a replay fixture.

One in-flight request per connection; concurrent connections each get a
thread, so a multi-worker compressor can open one connection per worker.
"""

from __future__ import annotations

import socket
import struct
import sys
import threading
from dataclasses import dataclass

import numpy as np

from . import protocol
from .model import DEFAULT_MODEL, CausalLogitModel
from .tokenizer import tokenize_roundtrip_check


@dataclass
class AdapterConfig:
    model_id: str = DEFAULT_MODEL
    grid_k: int = 3
    device: str = "cpu"
    endpoint: str = "unix:/tmp/hnlc-adapter.sock"
    record_path: str | None = None


class AdapterServer:
    def __init__(self, config: AdapterConfig):
        self.config = config
        self.model = CausalLogitModel(config.model_id, config.grid_k,
                                      config.device)
        self._records: dict[tuple[int, int], np.ndarray] = {}
        self._records_lock = threading.Lock()
        self._listener: socket.socket | None = None
        self._threads: list[threading.Thread] = []
        self._stopping = threading.Event()

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        """Bind the endpoint and serve connections on background threads."""
        endpoint = self.config.endpoint
        if endpoint.startswith("unix:"):
            sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
            sock.bind(endpoint[5:])
        elif endpoint.startswith("tcp:"):
            host, port = endpoint[4:].rsplit(":", 1)
            sock = socket.create_server((host, int(port)))
        else:
            raise ValueError(
                f"unsupported server endpoint {endpoint!r} "
                "(use unix:PATH, tcp:HOST:PORT, or serve_stdio)"
            )
        sock.listen(8)
        self._listener = sock
        t = threading.Thread(target=self._accept_loop, daemon=True)
        t.start()
        self._threads.append(t)

    def stop(self) -> None:
        """Stop accepting, wait for handlers, flush fixture recording."""
        self._stopping.set()
        if self._listener is not None:
            self._listener.close()
        for t in self._threads:
            t.join(timeout=10)
        self.flush_fixtures()

    def flush_fixtures(self) -> None:
        if self.config.record_path is None:
            return
        with self._records_lock:
            protocol.write_fixture_file(
                self.config.record_path, self.model.identity,
                self.config.grid_k, self.model.vocab_size, self._records,
            )

    def __enter__(self) -> "AdapterServer":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.stop()

    # -- connection handling ----------------------------------------------

    def _accept_loop(self) -> None:
        assert self._listener is not None
        while not self._stopping.is_set():
            try:
                conn, _ = self._listener.accept()
            except OSError:
                return  # listener closed
            t = threading.Thread(target=self._serve_connection,
                                 args=(conn,), daemon=True)
            t.start()
            self._threads.append(t)

    def _serve_connection(self, conn: socket.socket) -> None:
        fh = conn.makefile("rwb")
        try:
            self.serve_stream(fh, fh)
        except protocol.ProtocolError:
            pass  # peer hung up mid-frame
        finally:
            fh.close()
            conn.close()

    def serve_stream(self, rfh, wfh) -> None:
        """Handshake then request loop over a byte-stream pair."""
        hello = protocol.recv_frame(rfh)
        if hello is None:
            return
        try:
            _, client_grid, _ = protocol.unpack_handshake(hello)
        except protocol.ProtocolError as exc:
            protocol.send_frame(wfh, protocol.pack_error(
                protocol.ERR_MALFORMED, str(exc)))
            return
        if client_grid != self.config.grid_k:
            protocol.send_frame(wfh, protocol.pack_error(
                protocol.ERR_GRID_MISMATCH,
                f"server grid_k is {self.config.grid_k}, client sent {client_grid}",
            ))
            return
        protocol.send_frame(wfh, protocol.pack_handshake(
            self.model.identity, self.config.grid_k, self.model.vocab_size))
        while True:
            frame = protocol.recv_frame(rfh)
            if frame is None:
                return
            protocol.send_frame(wfh, self._handle(frame))

    # -- request handling --------------------------------------------------

    def _handle(self, frame: bytes) -> bytes:
        kind = frame[0] if frame else 0
        if kind == protocol.MSG_REQUEST:
            return self._handle_logits(frame)
        if kind == protocol.MSG_TOKENIZE_REQUEST:
            return self._handle_tokenize(frame)
        return protocol.pack_error(protocol.ERR_MALFORMED,
                                   f"unknown frame type {kind}")

    def _handle_logits(self, frame: bytes) -> bytes:
        try:
            request_id, count = struct.unpack_from("<II", frame, 1)
            ids = np.frombuffer(frame, dtype="<u4", count=count,
                                offset=9).tolist()
        except (struct.error, ValueError):
            return protocol.pack_error(protocol.ERR_MALFORMED,
                                       "short logits request")
        if any(t >= self.model.vocab_size for t in ids):
            return protocol.pack_error(protocol.ERR_MALFORMED,
                                       "token id out of vocabulary")
        try:
            scaled = self.model.next_logits(ids)
        except ValueError as exc:
            return protocol.pack_error(protocol.ERR_CONTEXT_TOO_LONG, str(exc))
        if self.config.record_path is not None:
            key = (request_id >> 16, request_id & 0xFFFF)
            with self._records_lock:
                self._records[key] = scaled
        return protocol.pack_response(request_id, scaled)

    def _handle_tokenize(self, frame: bytes) -> bytes:
        try:
            request_id, length = struct.unpack_from("<II", frame, 1)
        except struct.error:
            return protocol.pack_error(protocol.ERR_MALFORMED,
                                       "short tokenize request")
        data = frame[9 : 9 + length]
        if len(data) < length:
            return protocol.pack_error(protocol.ERR_MALFORMED,
                                       "tokenize request shorter than stated")
        return protocol.pack_tokenize_response(
            request_id, tokenize_roundtrip_check(data))


def serve_stdio(config: AdapterConfig) -> None:
    """Serve one session over stdin/stdout (identical framing)."""
    server = AdapterServer(config)
    server.serve_stream(sys.stdin.buffer, sys.stdout.buffer)
    server.flush_fixtures()
