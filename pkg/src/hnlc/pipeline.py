"""End-to-end compression pipeline.

Compression: route fixed-size blocks, tokenize contiguous neural runs
(identity over bytes for the built-in predictors), split them into
bounded-context segments with graft conditioning, encode segments with
one fresh predictor session + coder each (parallelizable), and assemble
the archive in source order.  Decompression mirrors this sequentially,
verifying per-block CRCs and the footer hashes.
"""

from __future__ import annotations

import hashlib
import os
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from . import container, fastpath, router
from .coder import TOTAL_MASS, RangeDecoder, RangeEncoder
from .errors import (
    BitstreamExhausted,
    ChecksumMismatch,
    HnlcError,
    IdentityMismatch,
)
from .predictor import (
    AdaptiveByteSession,
    ExternalSession,
    PredictorIdentity,
    PredictorKind,
    ReplaySession,
    SyntheticLogitSession,
    VOCAB_BYTES,
    adaptive_identity,
    synthetic_identity,
)
from .router import Route, RouteDecision


@dataclass(frozen=True)
class PipelineConfig:
    block_bytes: int = 65536
    segment_tokens: int = 2048  # L
    graft_tokens: int = 128  # K
    window: int = 2048  # W
    grid_k: int = 3
    total_mass: int = TOTAL_MASS
    tau_min: float = router.DEFAULT_TAU_MIN
    tau_max: float = router.DEFAULT_TAU_MAX
    workers: int = 1
    quantize: bool = True
    drift_epsilon: float = 0.0
    drift_seed: int = 0
    route_per_file: bool = False
    force_route: str | None = None  # "legacy" | "stored" | None

    def __post_init__(self):
        if not 0 <= self.graft_tokens < self.segment_tokens <= self.window:
            raise ValueError("need 0 <= K < L <= W")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not 1 <= self.tau_min < self.tau_max:
            raise ValueError("need 1 <= tau_min < tau_max")


@dataclass(frozen=True)
class NeuralSegment:
    """Graft tokens condition the predictor; only targets produce bits."""

    graft: bytes
    targets: bytes
    index: int


def segment(tokens: bytes, segment_tokens: int, graft_tokens: int) -> list[NeuralSegment]:
    """Partition tokens into target runs of length <= L, each segment
    after the first carrying the last min(K, available) preceding tokens
    as graft."""
    if segment_tokens < 1 or not 0 <= graft_tokens < segment_tokens:
        raise ValueError("need L >= 1 and 0 <= K < L")
    out = []
    for i, start in enumerate(range(0, len(tokens), segment_tokens)):
        graft = tokens[max(0, start - graft_tokens) : start]
        out.append(NeuralSegment(graft, tokens[start : start + segment_tokens], i))
    return out


# -- predictor factories ---------------------------------------------------


class PredictorFactory:
    """Builds one fresh session per segment; owns shared resources."""

    identity: PredictorIdentity

    def session(self, segment_index: int):
        raise NotImplementedError

    def tokenize_check(self, block: bytes) -> bool:
        return True

    def close(self) -> None:
        pass


class AdaptiveFactory(PredictorFactory):
    def __init__(self, config: PipelineConfig):
        self._config = config
        self.identity = adaptive_identity(config.window, config.total_mass)

    def session(self, segment_index: int):
        return AdaptiveByteSession(self._config.window, self._config.total_mass)


class SyntheticFactory(PredictorFactory):
    def __init__(self, seed: int, config: PipelineConfig):
        self._seed = seed
        self._config = config
        self.identity = synthetic_identity(
            seed, VOCAB_BYTES, config.grid_k, config.total_mass, config.quantize
        )

    def session(self, segment_index: int):
        c = self._config
        return SyntheticLogitSession(
            self._seed,
            VOCAB_BYTES,
            c.grid_k,
            c.total_mass,
            quantize=c.quantize,
            drift_epsilon=c.drift_epsilon,
            drift_seed=c.drift_seed,
        )


class ReplayFactory(PredictorFactory):
    def __init__(self, path: str, config: PipelineConfig):
        from .fixtures import read_fixtures

        self._fixtures = read_fixtures(path)
        self._config = config
        self.identity = self._fixtures.identity

    def session(self, segment_index: int):
        return ReplaySession(self._fixtures, segment_index, self._config.total_mass)


class ExternalFactory(PredictorFactory):
    def __init__(self, endpoint: str, config: PipelineConfig):
        from .wire import WireClient

        self._config = config
        self._client = WireClient(endpoint, config.grid_k)
        if self._client.vocab_size != VOCAB_BYTES:
            raise HnlcError(
                "primary pipeline requires a byte-level external predictor "
                f"(vocab 256), server offers {self._client.vocab_size}"
            )
        self.identity = self._client.identity

    def session(self, segment_index: int):
        return ExternalSession(
            self._client,
            segment_index,
            self._config.window,
            self._config.grid_k,
            self._config.total_mass,
        )

    def tokenize_check(self, block: bytes) -> bool:
        return self._client.tokenize_check(block) is not None

    def close(self) -> None:
        self._client.close()


def make_factory(spec: str, config: PipelineConfig) -> PredictorFactory:
    """Parse a predictor spec string: builtin | synthetic[:SEED] |
    replay:PATH | external:ENDPOINT."""
    name, _, arg = spec.partition(":")
    if name == "builtin":
        return AdaptiveFactory(config)
    if name == "synthetic":
        return SyntheticFactory(int(arg) if arg else 0, config)
    if name == "replay":
        return ReplayFactory(arg, config)
    if name == "external":
        if not arg:
            arg = os.environ.get("HNLC_EXTERNAL_ENDPOINT", "")
        return ExternalFactory(arg, config)
    raise ValueError(f"unknown predictor spec {spec!r}")


# -- segment encode/decode -------------------------------------------------


def _use_fastpath(factory: PredictorFactory) -> bool:
    return factory.identity.kind == PredictorKind.ADAPTIVE_BYTE and fastpath.enabled()


def encode_segment(seg: NeuralSegment, factory: PredictorFactory,
                   config: PipelineConfig) -> tuple[bytes, int]:
    """Encode one segment; returns (payload, peak predictor state size).

    The payload depends only on the segment contents, the predictor
    identity, and the config -- never on worker scheduling.
    """
    if _use_fastpath(factory):
        return fastpath.encode_adaptive(
            seg.graft, seg.targets, config.total_mass, config.window
        )
    session = factory.session(seg.index)
    for tok in seg.graft:
        session.observe(tok)
    enc = RangeEncoder()
    for tok in seg.targets:
        enc.encode_symbol(session.next_distribution(), tok)
        session.observe(tok)
    payload = enc.finalize().payload
    return payload, session.state_size()


def decode_segment(graft: bytes, n_targets: int, payload: bytes, index: int,
                   factory: PredictorFactory, config: PipelineConfig) -> tuple[bytes, int]:
    if _use_fastpath(factory):
        return fastpath.decode_adaptive(
            graft, n_targets, payload, config.total_mass, config.window
        )
    session = factory.session(index)
    for tok in graft:
        session.observe(tok)
    dec = RangeDecoder(payload)
    out = bytearray()
    for _ in range(n_targets):
        sym = dec.decode_symbol(session.next_distribution())
        session.observe(sym)
        out.append(sym)
    return bytes(out), session.state_size()


# -- worker pool plumbing --------------------------------------------------

_WORKER_FACTORIES: dict = {}


def _pool_encode(args):
    graft, targets, index, spec, config = args
    key = (spec, config)
    factory = _WORKER_FACTORIES.get(key)
    if factory is None:
        factory = make_factory(spec, config)
        _WORKER_FACTORIES[key] = factory
    return encode_segment(NeuralSegment(graft, targets, index), factory, config)


# -- compression -----------------------------------------------------------


@dataclass
class CompressResult:
    archive: bytes
    decisions: list[RouteDecision] = field(default_factory=list)
    descriptors: list = field(default_factory=list)
    peak_predictor_state: int = 0
    neural_seconds: float = 0.0


def _plan_routes(data: bytes, config: PipelineConfig,
                 factory: PredictorFactory) -> list[RouteDecision]:
    decisions = []
    whole_file_route = None
    if config.route_per_file and data:
        whole_file_route = router.route(data, 0, config.tau_min, config.tau_max)
    for offset in range(0, len(data), config.block_bytes):
        block = data[offset : offset + config.block_bytes]
        if config.force_route == "legacy":
            d = RouteDecision(Route.LEGACY, 0.0, (offset, len(block)))
        elif config.force_route == "stored":
            d = RouteDecision(Route.STORED, 0.0, (offset, len(block)))
        elif whole_file_route is not None:
            d = RouteDecision(
                whole_file_route.route, whole_file_route.scout_ratio, (offset, len(block))
            )
        else:
            d = router.route(block, offset, config.tau_min, config.tau_max)
        if d.route == Route.NEURAL and not factory.tokenize_check(block):
            d = RouteDecision(Route.LEGACY, d.scout_ratio, d.block_span)
        decisions.append(d)
    return decisions


def compress_detailed(data: bytes, config: PipelineConfig = PipelineConfig(),
                      predictor: str = "builtin") -> CompressResult:
    factory = make_factory(predictor, config)
    try:
        decisions = _plan_routes(data, config, factory)

        # Plan archive blocks in source order.  Contiguous Neural blocks
        # form runs that are re-cut into bounded-context segments.
        plan: list[tuple] = []  # ("neural", seg, ratio) | ("legacy"/"stored", bytes, ratio)
        i = 0
        while i < len(decisions):
            d = decisions[i]
            off, length = d.block_span
            if d.route == Route.NEURAL:
                j = i
                while j < len(decisions) and decisions[j].route == Route.NEURAL:
                    j += 1
                run_start = off
                run_end = decisions[j - 1].block_span[0] + decisions[j - 1].block_span[1]
                run = data[run_start:run_end]
                for seg in segment(run, config.segment_tokens, config.graft_tokens):
                    seg_off = run_start + seg.index * config.segment_tokens
                    block_i = i + (seg_off - run_start) // config.block_bytes
                    plan.append(("neural", seg, decisions[block_i].scout_ratio))
                i = j
            else:
                kind = "legacy" if d.route == Route.LEGACY else "stored"
                plan.append((kind, data[off : off + length], d.scout_ratio))
                i += 1

        # Re-index neural segments by archive block position so fixture
        # recording and replay agree on block indices.
        plan = [
            (kind, NeuralSegment(x.graft, x.targets, n) if kind == "neural" else x, r)
            for n, (kind, x, r) in enumerate(plan)
        ]

        neural_items = [(n, seg) for n, (kind, seg, _) in enumerate(plan) if kind == "neural"]
        payload_by_index: dict[int, tuple[bytes, int]] = {}
        t0 = time.monotonic()
        if config.workers > 1 and len(neural_items) > 1 and _poolable(predictor):
            tasks = [
                (seg.graft, seg.targets, seg.index, predictor, config)
                for _, seg in neural_items
            ]
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                for (n, _), result in zip(neural_items, pool.map(_pool_encode, tasks)):
                    payload_by_index[n] = result
        else:
            for n, seg in neural_items:
                payload_by_index[n] = encode_segment(seg, factory, config)
        neural_seconds = time.monotonic() - t0

        descriptors: list[container.BlockDescriptor] = []
        payloads: list[bytes] = []
        peak_state = 0
        for n, (kind, item, ratio) in enumerate(plan):
            ratio_micro = min(int(round(ratio * container.MICRO)), 0xFFFFFFFF)
            if kind == "neural":
                payload, state = payload_by_index[n]
                peak_state = max(peak_state, state)
                descriptors.append(
                    container.BlockDescriptor(
                        Route.NEURAL,
                        len(item.targets),
                        len(payload),
                        len(item.graft),
                        len(item.targets),
                        ratio_micro,
                        zlib.crc32(item.targets),
                    )
                )
                payloads.append(payload)
                continue
            block = item
            if kind == "legacy":
                payload = router.legacy_compress(block)
                route_kind = Route.LEGACY
                if len(payload) >= len(block):  # expansion: degrade to Stored
                    payload, route_kind = block, Route.STORED
            else:
                payload, route_kind = block, Route.STORED
            descriptors.append(
                container.BlockDescriptor(
                    route_kind, len(block), len(payload), 0, 0, ratio_micro,
                    zlib.crc32(block),
                )
            )
            payloads.append(payload)

        header = container.ArchiveHeader(
            identity=factory.identity,
            segment_tokens=config.segment_tokens,
            graft_tokens=config.graft_tokens,
            window=config.window,
            grid_k=config.grid_k,
            total_mass=config.total_mass,
            tau_min_micro=int(round(config.tau_min * container.MICRO)),
            tau_max_micro=int(round(config.tau_max * container.MICRO)),
            quantize=config.quantize,
            block_bytes=config.block_bytes,
            codec_id=router.LEGACY_CODEC_ID,
            codec_version=router.LEGACY_CODEC_VERSION,
            block_count=len(descriptors),
        )
        footer = container.ArchiveFooter(
            source_sha256=hashlib.sha256(data).digest(),
            payload_sha256=hashlib.sha256(b"".join(payloads)).digest(),
        )
        archive = container.write_archive(header, descriptors, payloads, footer)
        return CompressResult(
            archive=archive,
            decisions=decisions,
            descriptors=descriptors,
            peak_predictor_state=peak_state,
            neural_seconds=neural_seconds,
        )
    finally:
        factory.close()


def _poolable(predictor: str) -> bool:
    # External sessions hold sockets that must be opened per process;
    # the spec string reconnects fine, so everything is poolable.
    return True


def compress(data: bytes, config: PipelineConfig = PipelineConfig(),
             predictor: str = "builtin") -> bytes:
    return compress_detailed(data, config, predictor).archive


def config_from_header(header: container.ArchiveHeader,
                       base: PipelineConfig | None = None) -> PipelineConfig:
    """The archive's config echo is authoritative for decode; only
    decode-side knobs (workers, drift simulation) come from the caller."""
    base = base or PipelineConfig()
    return replace(
        base,
        block_bytes=header.block_bytes,
        segment_tokens=header.segment_tokens,
        graft_tokens=header.graft_tokens,
        window=header.window,
        grid_k=header.grid_k,
        total_mass=header.total_mass,
        tau_min=header.tau_min_micro / container.MICRO,
        tau_max=header.tau_max_micro / container.MICRO,
        quantize=header.quantize,
    )


def decompress(archive: bytes, predictor: str = "builtin",
               config: PipelineConfig | None = None) -> bytes:
    header, descriptors, payload_offset, footer = container.read_archive(archive)
    cfg = config_from_header(header, config)

    payload_region = archive[payload_offset : len(archive) - container.FOOTER_SIZE]
    if hashlib.sha256(payload_region).digest() != footer.payload_sha256:
        raise ChecksumMismatch("payload hash mismatch")

    factory = make_factory(predictor, cfg)
    try:
        if factory.identity.to_bytes() != header.identity.to_bytes():
            raise IdentityMismatch(
                f"archive needs predictor {header.identity}, got {factory.identity}"
            )
        out = bytearray()
        pos = payload_offset
        for i, d in enumerate(descriptors):
            payload = archive[pos : pos + d.payload_length]
            pos += d.payload_length
            if d.route == Route.STORED:
                block = payload
            elif d.route == Route.LEGACY:
                try:
                    block = router.legacy_decompress(payload)
                except zlib.error as exc:
                    raise ChecksumMismatch(f"block {i}: corrupt legacy payload", i) from exc
            else:
                graft = bytes(out[-d.graft_length:]) if d.graft_length else b""
                try:
                    block, _ = decode_segment(
                        graft, d.target_token_count, payload, i, factory, cfg
                    )
                except BitstreamExhausted as exc:
                    raise ChecksumMismatch(f"block {i}: payload ran dry", i) from exc
            if len(block) != d.original_length or zlib.crc32(block) != d.crc32:
                raise ChecksumMismatch(f"block {i}: checksum mismatch", i)
            out += block
        result = bytes(out)
        if hashlib.sha256(result).digest() != footer.source_sha256:
            raise ChecksumMismatch("source hash mismatch")
        return result
    finally:
        factory.close()
