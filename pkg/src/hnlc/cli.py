"""Command-line front end.

Exit status is 0 only when the requested operation fully succeeded;
routing fallbacks are normal operation, not failures.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import sys
import time

from . import container, pipeline, router
from .errors import HnlcError
from .pipeline import PipelineConfig
from .router import Route


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--predictor", default="builtin",
                   help="builtin | synthetic[:SEED] | replay:PATH | external:ENDPOINT")
    p.add_argument("--block-bytes", type=int, default=65536)
    p.add_argument("-L", "--segment-tokens", type=int, default=2048)
    p.add_argument("-K", "--graft", type=int, default=128)
    p.add_argument("-W", "--window", type=int, default=2048)
    p.add_argument("--grid-k", type=int, default=3, choices=range(1, 7))
    p.add_argument("--tau-min", type=float, default=router.DEFAULT_TAU_MIN)
    p.add_argument("--tau-max", type=float, default=router.DEFAULT_TAU_MAX)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--quantize", choices=["on", "off"], default="on",
                   help="off disables grid snapping (diagnostics only; "
                   "archives decode only on the producing host)")
    p.add_argument("--drift-eps", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0,
                   help="drift-simulation seed for the synthetic predictor")
    p.add_argument("--force-route", choices=["legacy", "stored"], default=None)
    p.add_argument("--route-per-file", action="store_true",
                   help="route the whole file by one scout pass instead of per block")


def _config(args: argparse.Namespace) -> PipelineConfig:
    return PipelineConfig(
        block_bytes=args.block_bytes,
        segment_tokens=args.segment_tokens,
        graft_tokens=args.graft,
        window=args.window,
        grid_k=args.grid_k,
        tau_min=args.tau_min,
        tau_max=args.tau_max,
        workers=args.workers,
        quantize=args.quantize == "on",
        drift_epsilon=args.drift_eps,
        drift_seed=args.seed,
        route_per_file=args.route_per_file,
        force_route=args.force_route,
    )


def _read(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    with open(path, "rb") as f:
        return f.read()


def _write(path: str, data: bytes) -> None:
    if path == "-":
        sys.stdout.buffer.write(data)
    else:
        with open(path, "wb") as f:
            f.write(data)


def _cmd_compress(args: argparse.Namespace) -> int:
    data = _read(args.input)
    result = pipeline.compress_detailed(data, _config(args), args.predictor)
    _write(args.output, result.archive)
    counts = {r: 0 for r in Route}
    for d in result.descriptors:
        counts[d.route] += 1
    ratio = len(data) / len(result.archive) if result.archive else 0.0
    print(
        f"{len(data)} -> {len(result.archive)} bytes (ratio {ratio:.3f}); "
        f"blocks: {counts[Route.NEURAL]} neural, {counts[Route.LEGACY]} legacy, "
        f"{counts[Route.STORED]} stored",
        file=sys.stderr,
    )
    return 0


def _cmd_decompress(args: argparse.Namespace) -> int:
    archive = _read(args.input)
    cfg = PipelineConfig(
        workers=args.workers,
        drift_epsilon=args.drift_eps,
        drift_seed=args.seed,
    )
    data = pipeline.decompress(archive, args.predictor, cfg)
    _write(args.output, data)
    return 0


def _cmd_inspect(args: argparse.Namespace) -> int:
    header, descriptors, _, footer = container.read_archive(_read(args.input))
    h = header
    print(f"identity: kind={h.identity.kind} vocab={h.identity.vocab_size} "
          f"hash={h.identity.param_hash.hex()}")
    print(f"config: L={h.segment_tokens} K={h.graft_tokens} W={h.window} "
          f"grid_k={h.grid_k} M={h.total_mass} "
          f"tau=[{h.tau_min_micro / container.MICRO}, {h.tau_max_micro / container.MICRO}] "
          f"quantize={'on' if h.quantize else 'off'} block_bytes={h.block_bytes}")
    print(f"legacy codec: id={h.codec_id} version={h.codec_version}")
    print(f"blocks: {h.block_count}")
    print(f"source sha256:  {footer.source_sha256.hex()}")
    print(f"payload sha256: {footer.payload_sha256.hex()}")
    if args.blocks:
        for i, d in enumerate(descriptors):
            print(f"  {i}: {d.route.name.lower():6s} {d.original_length:7d} -> "
                  f"{d.payload_length:7d}  graft={d.graft_length} "
                  f"scout={d.scout_ratio_micro / container.MICRO:.3f} "
                  f"crc32={d.crc32:08x}")
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    """Compress+decompress each input, verify identity, report one CSV row
    per file: bytes, archive bytes, ratio, bits per character, throughputs."""
    cfg = _config(args)
    writer = csv.writer(sys.stdout)
    writer.writerow(["file", "bytes", "archive_bytes", "ratio", "bpc",
                     "compress_mbps", "decompress_mbps",
                     "neural_blocks", "legacy_blocks", "stored_blocks"])
    failures = 0
    for path in args.inputs:
        data = _read(path)
        t0 = time.monotonic()
        result = pipeline.compress_detailed(data, cfg, args.predictor)
        t1 = time.monotonic()
        back = pipeline.decompress(result.archive, args.predictor, cfg)
        t2 = time.monotonic()
        if back != data:
            print(f"{path}: round trip MISMATCH", file=sys.stderr)
            failures += 1
            continue
        counts = {r: 0 for r in Route}
        for d in result.descriptors:
            counts[d.route] += 1
        n = len(data) or 1
        writer.writerow([
            path, len(data), len(result.archive),
            f"{len(data) / len(result.archive):.4f}" if result.archive else "",
            f"{8 * len(result.archive) / n:.4f}",
            f"{n / (t1 - t0) / 1e6:.2f}" if t1 > t0 else "",
            f"{n / (t2 - t1) / 1e6:.2f}" if t2 > t1 else "",
            counts[Route.NEURAL], counts[Route.LEGACY], counts[Route.STORED],
        ])
    return 1 if failures else 0


def _cmd_record_check(args: argparse.Namespace) -> int:
    """Verify a fixture file replays to a byte-identical archive."""
    from .fixtures import read_fixtures

    data = _read(args.input)
    cfg = _config(args)
    fixtures = read_fixtures(args.fixtures)
    archive = pipeline.compress(data, cfg, f"replay:{args.fixtures}")
    back = pipeline.decompress(archive, f"replay:{args.fixtures}", cfg)
    if back != data:
        print("replay round trip mismatch", file=sys.stderr)
        return 1
    print(f"ok: {len(fixtures.records)} fixture records, "
          f"archive sha256 {hashlib.sha256(archive).hexdigest()}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hnlc", description="hybrid neural/legacy lossless compressor"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compress", help="compress a file into an archive")
    p.add_argument("input")
    p.add_argument("output")
    _add_config_args(p)
    p.set_defaults(fn=_cmd_compress)

    p = sub.add_parser("decompress", help="restore a file from an archive")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--predictor", default="builtin")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--drift-eps", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_decompress)

    p = sub.add_parser("inspect", help="print archive metadata")
    p.add_argument("input")
    p.add_argument("--blocks", action="store_true", help="list per-block detail")
    p.set_defaults(fn=_cmd_inspect)

    p = sub.add_parser("bench", help="round-trip inputs and emit CSV metrics")
    p.add_argument("inputs", nargs="+")
    _add_config_args(p)
    p.set_defaults(fn=_cmd_bench)

    p = sub.add_parser("record-check", help="verify fixtures replay bit-exactly")
    p.add_argument("input")
    p.add_argument("fixtures")
    _add_config_args(p)
    p.set_defaults(fn=_cmd_record_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except HnlcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
