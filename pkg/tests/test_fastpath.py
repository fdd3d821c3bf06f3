"""The compiled adaptive-model coder must be byte-for-byte identical to
the pure-Python reference on every input."""

import random

import pytest

import hnlc.fastpath as fastpath
from hnlc.coder import TOTAL_MASS, RangeDecoder, RangeEncoder
from hnlc.errors import BitstreamExhausted
from hnlc.predictor import AdaptiveByteSession

pytestmark = pytest.mark.skipif(
    not fastpath.enabled(), reason="compiled fast path unavailable or disabled"
)


def reference_encode(graft, targets, window):
    session = AdaptiveByteSession(window, TOTAL_MASS)
    for tok in graft:
        session.observe(tok)
    enc = RangeEncoder()
    for tok in targets:
        enc.encode_symbol(session.next_distribution(), tok)
        session.observe(tok)
    return enc.finalize().payload


def reference_decode(graft, n_targets, payload, window):
    session = AdaptiveByteSession(window, TOTAL_MASS)
    for tok in graft:
        session.observe(tok)
    dec = RangeDecoder(payload)
    out = bytearray()
    for _ in range(n_targets):
        sym = dec.decode_symbol(session.next_distribution())
        session.observe(sym)
        out.append(sym)
    return bytes(out)


def sample_text():
    with open("/usr/share/common-licenses/GPL-3", "rb") as f:
        return f.read()


CASES = None


def cases():
    global CASES
    if CASES is None:
        rng = random.Random(0xFA57)
        text = sample_text()
        CASES = [
            (b"", b"", 2048),
            (b"", b"x", 2048),
            (b"abc", b"", 2048),
            (b"", text[:2500], 2048),
            (text[:128], text[128:2176], 2048),
            (b"", bytes(rng.randrange(256) for _ in range(1200)), 256),
            (b"ab" * 64, b"ab" * 700, 128),
            (b"", b"\x00" * 1500, 2048),
            (bytes(rng.randrange(256) for _ in range(64)), text[:800], 64),
            (b"", bytes(rng.randrange(4) for _ in range(2000)), 1),
            (b"", bytes(rng.randrange(4) for _ in range(2000)), 2),
            (b"", bytes(rng.randrange(4) for _ in range(2000)), 3),
        ]
    return CASES


@pytest.mark.parametrize("case_index", range(12))
def test_encode_matches_reference(case_index):
    graft, targets, window = cases()[case_index]
    expected = reference_encode(graft, targets, window)
    got, _ = fastpath.encode_adaptive(graft, targets, TOTAL_MASS, window)
    assert got == expected


@pytest.mark.parametrize("case_index", range(12))
def test_decode_round_trips(case_index):
    graft, targets, window = cases()[case_index]
    payload, _ = fastpath.encode_adaptive(graft, targets, TOTAL_MASS, window)
    got, _ = fastpath.decode_adaptive(graft, len(targets), payload, TOTAL_MASS, window)
    assert got == targets
    # cross-check against the pure decoder as well
    assert reference_decode(graft, len(targets), payload, window) == targets


def test_truncated_payload_raises():
    text = sample_text()[:1500]
    payload, _ = fastpath.encode_adaptive(b"", text, TOTAL_MASS, 2048)
    with pytest.raises(BitstreamExhausted):
        fastpath.decode_adaptive(b"", len(text) * 3, payload, TOTAL_MASS, 2048)


def test_peak_state_counts_agree_with_reference():
    text = sample_text()[:2000]
    session = AdaptiveByteSession(512, TOTAL_MASS)
    peak = 0
    for tok in text:
        session.observe(tok)
        peak = max(peak, session.state_size())
    _, fast_peak = fastpath.encode_adaptive(b"", text, TOTAL_MASS, 512)
    # the compiled path counts allocated nodes, which never shrink; both
    # are O(window), not O(input)
    assert peak <= fast_peak <= peak * 2 + 256


def test_env_flag_disables(monkeypatch):
    monkeypatch.setenv("HNLC_FASTPATH", "0")
    assert not fastpath.enabled()
    monkeypatch.setenv("HNLC_FASTPATH", "1")
    assert fastpath.enabled()
