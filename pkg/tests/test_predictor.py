"""Predictor sessions: the adaptive byte model against a hand-computed
blending oracle, the synthetic logit model's pinned construction, replay
sessions, and identity hashing."""

from fractions import Fraction

import numpy as np
import pytest

from hnlc.coder import TOTAL_MASS
from hnlc.errors import FixtureExhausted
from hnlc.fixtures import FixtureSet
from hnlc.predictor import (
    VOCAB_BYTES,
    AdaptiveByteSession,
    PredictorIdentity,
    PredictorKind,
    ReplaySession,
    SyntheticLogitSession,
    adaptive_identity,
    fnv1a64,
    synthetic_identity,
    synthetic_logits,
)


def blend_oracle(history, window):
    """Exact-rational order-2/1/0 blend for the next-symbol probabilities,
    written from the model's definition: P = 0.6 P2 + 0.3 P1 + 0.1 P0 with
    add-1 smoothing per context, counts over the last `window` tokens."""
    hist = history[-window:] if window < len(history) else history
    v = VOCAB_BYTES
    c0 = [0] * v
    c1 = {}
    c2 = {}
    for i, tok in enumerate(hist):
        c0[tok] += 1
        if i >= 1:
            c1.setdefault(hist[i - 1], [0] * v)[tok] += 1
        if i >= 2:
            c2.setdefault((hist[i - 2], hist[i - 1]), [0] * v)[tok] += 1
    # conditioning contexts come from the full history, not just the window
    k1 = history[-1] if len(history) >= 1 else None
    k2 = tuple(history[-2:]) if len(history) >= 2 else None
    t1 = c1.get(k1, [0] * v)
    t2 = c2.get(k2, [0] * v)
    n0, n1, n2 = sum(c0), sum(t1), sum(t2)
    probs = []
    for s in range(v):
        p0 = Fraction(c0[s] + 1, n0 + v)
        p1 = Fraction(t1[s] + 1, n1 + v)
        p2 = Fraction(t2[s] + 1, n2 + v)
        probs.append(
            Fraction(6, 10) * p2 + Fraction(3, 10) * p1 + Fraction(1, 10) * p0
        )
    return probs


def session_after(history, window=2048):
    s = AdaptiveByteSession(window, TOTAL_MASS)
    for tok in history:
        s.observe(tok)
    return s


class TestAdaptiveByte:
    def test_empty_context_is_uniform(self):
        d = session_after([]).next_distribution()
        assert int(d.freqs.max()) - int(d.freqs.min()) <= 1
        assert int(d.freqs.sum()) == TOTAL_MASS

    def test_ababab_prefers_the_pattern(self):
        a, b, c = ord("a"), ord("b"), ord("c")
        d = session_after([a, b, a, b, a, b, a]).next_distribution()
        assert d.freqs[b] > d.freqs[c]
        assert d.freqs[b] > d.freqs[a]

    def test_matches_rational_blend_oracle(self):
        history = [h for h in b"the theory of the thing"]
        d = session_after(history).next_distribution()
        probs = blend_oracle(history, 2048)
        # frequencies must be ordered exactly as the oracle's probabilities
        order_model = np.lexsort((np.arange(256), -d.freqs))
        order_oracle = sorted(range(256), key=lambda s: (-probs[s], s))
        assert order_model.tolist() == order_oracle
        # and the dominant symbol's relative mass matches to rescale error
        top = order_oracle[0]
        assert d.freqs[top] / TOTAL_MASS == pytest.approx(
            float(probs[top]), rel=2e-3
        )

    def test_window_slides(self):
        """Distributions depend only on the last W tokens."""
        w = 64
        tail = [h for h in b"abcabcabc" * 4]
        long = session_after([1] * 500 + tail, window=w)
        short = session_after(([1] * 500 + tail)[-w:], window=w)
        assert long.next_distribution() == short.next_distribution()

    def test_observe_shifts_mass(self):
        s = session_after([5, 6])
        before = s.next_distribution().freqs[7]
        s.observe(7)
        s2 = session_after([5, 6, 7, 6])  # same order-1 context '6'
        assert s2.next_distribution().freqs[7] > before

    def test_state_size_bounded_by_window(self):
        s = AdaptiveByteSession(128, TOTAL_MASS)
        rng = np.random.default_rng(0)
        sizes = []
        for tok in rng.integers(0, 256, 4000):
            s.observe(int(tok))
            sizes.append(s.state_size())
        # state stops growing once the window is saturated
        assert max(sizes[500:]) <= max(sizes[:500]) + 128

    def test_equal_histories_equal_distributions(self):
        data = [h for h in b"determinism is a contract"]
        assert (
            session_after(data).next_distribution()
            == session_after(data).next_distribution()
        )


class TestSyntheticLogits:
    def test_pure_function_of_inputs(self):
        a = synthetic_logits(123, 256, seed=9)
        b = synthetic_logits(123, 256, seed=9)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, synthetic_logits(124, 256, seed=9))
        assert not np.array_equal(a, synthetic_logits(123, 256, seed=10))

    def test_exactly_one_boost(self):
        z = synthetic_logits(77, 256, seed=3)
        boosted = np.sum(z > 2.0)  # base range is [-2, 2); boost adds 6
        assert boosted == 1

    def test_base_range(self):
        z = synthetic_logits(5, 1024, seed=1)
        z_no_boost = np.sort(z)[:-1]
        assert z_no_boost.min() >= -2.0
        assert z_no_boost.max() < 2.0

    def test_entropy_band(self):
        """Softmax entropy stays in the regression band over 1000 contexts."""
        rng = np.random.default_rng(42)
        for digest in rng.integers(0, 1 << 63, 1000):
            z = synthetic_logits(int(digest), 256, seed=7)
            e = np.exp(z - z.max())
            p = e / e.sum()
            entropy = float(-(p * np.log2(p)).sum())
            assert 0.5 < entropy < 7.5, (digest, entropy)


class TestSyntheticSession:
    def make(self, **kw):
        defaults = dict(
            seed=11, vocab_size=256, grid_k=3, total_mass=TOTAL_MASS,
            quantize=True, drift_epsilon=0.0, drift_seed=0,
        )
        defaults.update(kw)
        return SyntheticLogitSession(**defaults)

    def test_deterministic_across_sessions(self):
        s1, s2 = self.make(), self.make()
        for tok in b"same stream":
            assert s1.next_distribution() == s2.next_distribution()
            s1.observe(tok)
            s2.observe(tok)

    def test_context_sensitivity(self):
        s1, s2 = self.make(), self.make()
        s1.observe(1)
        s2.observe(2)
        assert s1.next_distribution() != s2.next_distribution()

    def test_sub_half_step_drift_is_invisible(self):
        clean = self.make()
        noisy_a = self.make(drift_epsilon=4e-4, drift_seed=111)
        noisy_b = self.make(drift_epsilon=4e-4, drift_seed=222)
        for tok in b"drift must not change the archive":
            d0 = clean.next_distribution()
            assert d0 == noisy_a.next_distribution()
            assert d0 == noisy_b.next_distribution()
            for s in (clean, noisy_a, noisy_b):
                s.observe(tok)

    def test_drift_visible_without_quantization(self):
        a = self.make(quantize=False, drift_epsilon=4e-4, drift_seed=111)
        b = self.make(quantize=False, drift_epsilon=4e-4, drift_seed=222)
        diverged = False
        for tok in b"raw logits leak the noise":
            if a.next_distribution() != b.next_distribution():
                diverged = True
                break
            a.observe(tok)
            b.observe(tok)
        assert diverged


class TestReplay:
    def make_fixtures(self):
        identity = synthetic_identity(1, 256, 3, TOTAL_MASS, True)
        records = {
            (0, 0): np.full(256, 100, dtype=np.int32),
            (0, 1): np.arange(256, dtype=np.int32),
        }
        return FixtureSet(
            identity=identity, grid_k=3, vocab_size=256, records=records
        )

    def test_replays_recorded_positions(self):
        s = ReplaySession(self.make_fixtures(), block_index=0,
                          total_mass=TOTAL_MASS)
        d0 = s.next_distribution()
        assert int(d0.freqs.max()) - int(d0.freqs.min()) <= 1  # flat logits
        s.observe(42)  # advances position; token value irrelevant
        d1 = s.next_distribution()
        assert int(np.argmax(d1.freqs)) == 255

    def test_exhaustion(self):
        s = ReplaySession(self.make_fixtures(), block_index=1,
                          total_mass=TOTAL_MASS)
        with pytest.raises(FixtureExhausted):
            s.next_distribution()


class TestIdentity:
    def test_roundtrip_bytes(self):
        ident = adaptive_identity(2048, TOTAL_MASS)
        back = PredictorIdentity.from_bytes(ident.to_bytes())
        assert back == ident
        assert len(ident.to_bytes()) == 37

    def test_parameters_change_hash(self):
        base = synthetic_identity(1, 256, 3, TOTAL_MASS, True)
        assert base != synthetic_identity(2, 256, 3, TOTAL_MASS, True)
        assert base != synthetic_identity(1, 256, 4, TOTAL_MASS, True)
        assert base != synthetic_identity(1, 256, 3, TOTAL_MASS, False)

    def test_kinds_distinct(self):
        a = adaptive_identity(2048, TOTAL_MASS)
        s = synthetic_identity(1, 256, 3, TOTAL_MASS, True)
        assert a.kind == PredictorKind.ADAPTIVE_BYTE
        assert s.kind == PredictorKind.SYNTHETIC_LOGIT
        assert a.to_bytes() != s.to_bytes()


def fnv1a64_bytes_oracle(data):
    """Textbook byte-wise FNV-1a 64, validated against published vectors."""
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def test_fnv1a64_oracle_matches_published_vectors():
    assert fnv1a64_bytes_oracle(b"") == 0xCBF29CE484222325
    assert fnv1a64_bytes_oracle(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a64_bytes_oracle(b"foobar") == 0x85944171F73967E8


def test_fnv1a64_folds_ids_as_little_endian_words():
    assert fnv1a64([]) == fnv1a64_bytes_oracle(b"")
    ids = [0, 97, 70000, 2**31 - 1]
    expanded = b"".join(i.to_bytes(4, "little") for i in ids)
    assert fnv1a64(ids) == fnv1a64_bytes_oracle(expanded)
