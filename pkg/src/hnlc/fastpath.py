"""Compiled encode/decode kernels for the adaptive byte model.

These mirror AdaptiveByteSession + RangeEncoder/RangeDecoder exactly --
same integer blend, same two-stage integerization, same carry-less
renormalization -- but run the whole per-segment loop in machine code.
tests/test_fastpath.py asserts byte-level equality against the pure
implementations, which remain the reference.

Set HNLC_FASTPATH=0 to force the pure path.
"""

from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - exercised implicitly everywhere
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap(args[0]) if args and callable(args[0]) else wrap


_V = 256
_BLEND_BITS = 20
_BLEND_LIMIT = 1 << _BLEND_BITS
_TOP = np.uint64(1 << 56)
_BOTTOM = np.uint64(1 << 48)
_U8 = np.uint64(8)
_U56 = np.uint64(56)
_U0 = np.uint64(0)
_U1 = np.uint64(1)
_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_MASKHI = np.uint64(0xFF)


def enabled() -> bool:
    return HAVE_NUMBA and os.environ.get("HNLC_FASTPATH", "1") != "0"


@njit(cache=True)
def _find_or_add(heads, head_key, pool_sym, pool_cnt, pool_next, n_nodes, sym):
    node = heads[head_key]
    while node >= 0:
        if pool_sym[node] == sym:
            return node, n_nodes
        node = pool_next[node]
    pool_sym[n_nodes] = sym
    pool_cnt[n_nodes] = 0
    pool_next[n_nodes] = heads[head_key]
    heads[head_key] = n_nodes
    return n_nodes, n_nodes + 1


@njit(cache=True)
def _blend(seq, t, c0, n0, head1, n1tot, sym1, cnt1, nxt1,
           head2, n2tot, sym2, cnt2, nxt2, g):
    k1 = np.int64(seq[t - 1]) if t >= 1 else np.int64(-1)
    k2 = (np.int64(seq[t - 2]) << 8) | np.int64(seq[t - 1]) if t >= 2 else np.int64(-1)
    n1 = n1tot[k1] if k1 >= 0 else 0
    n2 = n2tot[k2] if k2 >= 0 else 0
    a = (n1 + _V) * (n0 + _V)
    b = (n2 + _V) * (n0 + _V)
    cf = (n2 + _V) * (n1 + _V)
    base = 6 * a + 3 * b + cf
    for i in range(_V):
        g[i] = base + cf * c0[i]
    if k1 >= 0:
        node = head1[k1]
        while node >= 0:
            g[sym1[node]] += 3 * b * np.int64(cnt1[node])
            node = nxt1[node]
    if k2 >= 0:
        node = head2[k2]
        while node >= 0:
            g[sym2[node]] += 6 * a * np.int64(cnt2[node])
            node = nxt2[node]


@njit(cache=True)
def _frequencies(g, total_mass, h, f, cum):
    """Integerize blend weights g into frequencies f summing exactly to
    total_mass, matching the reference implementation bit for bit.

    The inner loops are written branchless so LLVM vectorizes them; the
    single true division per symbol is replaced by one multiply with a
    reciprocal, exact after a +-1 fixup (the estimate's absolute error is
    far below 1/2 because quotients stay under 2^30 and operands are
    exactly representable in float64).
    """
    total = np.int64(0)
    for i in range(_V):
        total += g[i]
    # power-of-two rescale into a < 2^(_BLEND_BITS) domain
    shift = 0
    while (total >> shift) >= _BLEND_LIMIT:
        shift += 1
    hsum = np.int64(0)
    for i in range(_V):
        hv = g[i] >> shift
        hv = 1 if hv < 1 else hv
        h[i] = hv
        hsum += hv
    scale = total_mass - _V
    inv_hsum = 1.0 / np.float64(hsum)
    fsum = np.int64(0)
    for i in range(_V):
        x = h[i] * scale
        q = np.int64(np.float64(x) * inv_hsum)
        q -= np.int64(q * hsum > x)
        q += np.int64((q + 1) * hsum <= x)
        q = 1 if q < 1 else q
        f[i] = q
        fsum += q
    remainder = total_mass - fsum
    if remainder > 0:
        # Cyclic +1 assignment in stable descending-h order is equivalent
        # to: everyone gets remainder // V, and the top remainder % V by
        # (h desc, index asc) get one more.
        base_add = remainder // _V
        if base_add > 0:
            for i in range(_V):
                f[i] += base_add
        r = remainder % _V
        if r > 0:
            # Rank threshold = smallest value v with #{h > v} < r, found by
            # binary search over the value domain (each probe one
            # vectorizable counting pass).
            lo = np.int64(0)
            hi = np.int64(_BLEND_LIMIT - 1)
            while lo < hi:
                mid = (lo + hi) >> 1
                cnt = np.int64(0)
                for i in range(_V):
                    cnt += np.int64(h[i] > mid)
                if cnt < r:
                    hi = mid
                else:
                    lo = mid + 1
            threshold = lo
            greater = np.int64(0)
            for i in range(_V):
                bump = np.int64(h[i] > threshold)
                f[i] += bump
                greater += bump
            ties = r - greater
            for i in range(_V):
                if ties <= 0:
                    break
                if h[i] == threshold:
                    f[i] += 1
                    ties -= 1
    cum[0] = 0
    for i in range(_V):
        cum[i + 1] = cum[i] + f[i]


@njit(cache=True)
def _observe(seq, t, window, c0, n0, head1, n1tot, sym1, cnt1, nxt1, used1,
             head2, n2tot, sym2, cnt2, nxt2, used2):
    """Count the token at position t and drop every n-gram that no longer
    fits inside the window ending at t.  Only n-grams fully contained in
    the window are ever counted, so the state matches a fresh model fed
    just the last `window` tokens.  Returns (n0, used1, used2)."""
    tok = seq[t]
    c0[tok] += 1
    n0 += 1
    if t >= 1 and window >= 2:
        k1 = np.int64(seq[t - 1])
        node, used1 = _find_or_add(head1, k1, sym1, cnt1, nxt1, used1, tok)
        cnt1[node] += 1
        n1tot[k1] += 1
    if t >= 2 and window >= 3:
        k2 = (np.int64(seq[t - 2]) << 8) | np.int64(seq[t - 1])
        node, used2 = _find_or_add(head2, k2, sym2, cnt2, nxt2, used2, tok)
        cnt2[node] += 1
        n2tot[k2] += 1
    old = t - window
    if old >= 0:
        otok = seq[old]
        c0[otok] -= 1
        n0 -= 1
        if window >= 2:  # the pair starting at old leaves the window
            k1 = np.int64(otok)
            nxt_tok = seq[old + 1]
            node, used1 = _find_or_add(head1, k1, sym1, cnt1, nxt1, used1, nxt_tok)
            cnt1[node] -= 1
            n1tot[k1] -= 1
        if window >= 3:  # likewise the triple starting at old
            k2 = (np.int64(otok) << 8) | np.int64(seq[old + 1])
            node, used2 = _find_or_add(head2, k2, sym2, cnt2, nxt2, used2, seq[old + 2])
            cnt2[node] -= 1
            n2tot[k2] -= 1
    return n0, used1, used2


@njit(cache=True)
def _adaptive_kernel(graft, targets, total_mass, window, decode, payload):
    """Shared encode/decode loop.

    decode=False: encodes `targets`, returns (payload bytes, n_out, peak, ok).
    decode=True: decodes len(targets) symbols from `payload` into targets.
    """
    n_g = len(graft)
    n_t = len(targets)
    n = n_g + n_t
    seq = np.empty(n, dtype=np.uint8)
    seq[:n_g] = graft
    if decode:
        out = payload  # alias for naming symmetry; unused on this side
    else:
        seq[n_g:] = targets

    c0 = np.zeros(_V, dtype=np.int64)
    n0 = np.int64(0)
    head1 = np.full(_V, -1, dtype=np.int32)
    n1tot = np.zeros(_V, dtype=np.int64)
    head2 = np.full(_V * _V, -1, dtype=np.int32)
    n2tot = np.zeros(_V * _V, dtype=np.int64)
    sym1 = np.zeros(n + 1, dtype=np.int16)
    cnt1 = np.zeros(n + 1, dtype=np.int32)
    nxt1 = np.zeros(n + 1, dtype=np.int32)
    sym2 = np.zeros(n + 1, dtype=np.int16)
    cnt2 = np.zeros(n + 1, dtype=np.int32)
    nxt2 = np.zeros(n + 1, dtype=np.int32)
    used1 = 0
    used2 = 0

    g = np.empty(_V, dtype=np.int64)
    h = np.empty(_V, dtype=np.int64)
    f = np.empty(_V, dtype=np.int64)
    cum = np.empty(_V + 1, dtype=np.int64)

    # coder state
    low = _U0
    rng = np.uint64(0xFFFFFFFFFFFFFFFF)
    mass_u = np.uint64(total_mass)
    enc_out = payload if not decode else np.empty(0, dtype=np.uint8)
    out_n = 0
    code = _U0
    pos = 0
    if decode:
        for _ in range(8):
            byte = np.uint64(payload[pos]) if pos < len(payload) else _U0
            code = (code << _U8) | byte
            pos += 1

    for t in range(n):
        if t >= n_g:
            _blend(seq, t, c0, n0, head1, n1tot, sym1, cnt1, nxt1,
                   head2, n2tot, sym2, cnt2, nxt2, g)
            _frequencies(g, total_mass, h, f, cum)
            tt = rng // mass_u
            if decode:
                offset = (code - low) // tt
                if offset >= mass_u:
                    offset = mass_u - np.uint64(1)
                off_i = np.int64(offset)
                lo_s, hi_s = 0, _V
                while hi_s - lo_s > 1:
                    mid = (lo_s + hi_s) // 2
                    if cum[mid] <= off_i:
                        lo_s = mid
                    else:
                        hi_s = mid
                sym = lo_s
                seq[t] = sym
            else:
                sym = np.int64(seq[t])
            low = low + np.uint64(cum[sym]) * tt
            rng = np.uint64(f[sym]) * tt
            # renormalize
            while True:
                # Inclusive endpoint: intervals ending exactly on a
                # partition boundary still emit (uint64 wrap is exact
                # mod-2^64 arithmetic here).
                high1 = low + rng - _U1
                if (low ^ high1) < _TOP:
                    if decode:
                        if pos >= len(payload) + 8:
                            return enc_out, out_n, used1 + used2 + _V, False
                        byte = np.uint64(payload[pos]) if pos < len(payload) else _U0
                        pos += 1
                        code = (code << _U8) | byte
                    else:
                        enc_out[out_n] = np.uint8((low >> _U56) & _MASKHI)
                        out_n += 1
                    low = low << _U8
                    rng = rng << _U8
                    if rng == _U0:  # 2^64 capped to the representable max
                        rng = _MASK64
                elif rng < _BOTTOM:
                    boundary = ((low >> _U56) + np.uint64(1)) << _U56
                    lower = boundary - low
                    upper = rng - lower
                    if lower >= upper:
                        rng = lower
                    else:
                        low = boundary
                        rng = upper
                else:
                    break
        n0, used1, used2 = _observe(
            seq, t, window, c0, n0, head1, n1tot, sym1, cnt1, nxt1, used1,
            head2, n2tot, sym2, cnt2, nxt2, used2,
        )

    peak = used1 + used2 + _V
    if decode:
        return seq[n_g:], n_t, peak, True

    # flush: fewest top bytes pinning a value into [low, low + rng)
    for nbytes in range(1, 9):
        shift = np.uint64(64 - 8 * nbytes)
        step = np.uint64(1) << shift
        candidate = ((low + (step - np.uint64(1))) >> shift) << shift
        if low <= candidate and candidate - low < rng:
            for b in range(nbytes):
                enc_out[out_n] = np.uint8(
                    (candidate >> np.uint64(56 - 8 * b)) & _MASKHI
                )
                out_n += 1
            break
    return enc_out, out_n, peak, True


def encode_adaptive(graft: bytes, targets: bytes, total_mass: int, window: int):
    """Returns (payload bytes, peak state entry count)."""
    g = np.frombuffer(graft, dtype=np.uint8)
    tgt = np.frombuffer(targets, dtype=np.uint8)
    buf = np.empty(4 * len(tgt) + 64, dtype=np.uint8)
    out, n, peak, ok = _adaptive_kernel(g, tgt, total_mass, window, False, buf)
    return bytes(out[:n].tobytes()), int(peak)


def decode_adaptive(graft: bytes, n_targets: int, payload: bytes,
                    total_mass: int, window: int):
    """Returns (decoded bytes, peak state entry count); raises on a payload
    that runs dry (caller maps this to a checksum failure)."""
    from .errors import BitstreamExhausted

    g = np.frombuffer(graft, dtype=np.uint8)
    tgt = np.zeros(n_targets, dtype=np.uint8)
    # copy: frombuffer views are readonly, which would poison the kernel's
    # output-buffer type through branch unification
    pay = np.frombuffer(payload, dtype=np.uint8).copy()
    out, n, peak, ok = _adaptive_kernel(g, tgt, total_mass, window, True, pay)
    if not ok:
        raise BitstreamExhausted("adaptive decode ran past the payload")
    return out.tobytes(), int(peak)
