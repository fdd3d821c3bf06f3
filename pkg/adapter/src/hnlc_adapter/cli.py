"""Command-line entry point: run the predictor server."""

from __future__ import annotations

import argparse
import signal
import sys
import threading

from .model import DEFAULT_MODEL
from .server import AdapterConfig, AdapterServer, serve_stdio


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hnlc-adapter",
        description="serve grid-snapped language-model logits over the "
                    "compressor's wire protocol",
    )
    parser.add_argument("--model", default=DEFAULT_MODEL,
                        help="model id: tiny-byte-lm[:SEED] or a Hugging Face "
                             "causal LM identifier")
    parser.add_argument("--grid-k", type=int, default=3, choices=range(1, 7))
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--endpoint", default="unix:/tmp/hnlc-adapter.sock",
                        help="unix:PATH | tcp:HOST:PORT | stdio")
    parser.add_argument("--record", metavar="PATH", default=None,
                        help="record every served logit vector to a replay "
                             "fixture file at PATH")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = AdapterConfig(
        model_id=args.model,
        grid_k=args.grid_k,
        device=args.device,
        endpoint=args.endpoint,
        record_path=args.record,
    )
    if args.endpoint == "stdio":
        serve_stdio(config)
        return 0
    server = AdapterServer(config)
    server.start()
    print(f"serving {config.model_id} (grid_k={config.grid_k}) "
          f"on {config.endpoint}", file=sys.stderr)
    done = threading.Event()
    signal.signal(signal.SIGINT, lambda *_: done.set())
    signal.signal(signal.SIGTERM, lambda *_: done.set())
    done.wait()
    server.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
