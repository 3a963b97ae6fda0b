import numpy as np
import pytest

from fsslr.prg import PrgSeed, PrgStream
from fsslr.ring import FixedPointConfig, RingMatrix, decode, encode
from fsslr.sharing import (AffineTerm, ShareAlgebraError, local_affine,
                           reconstruct, reveal, reveal_many, share,
                           trunc_shares)
from fsslr.transport import inprocess_pair

from conftest import run_two_party

CFG = FixedPointConfig()

# party 0's share is pure PRG output; frozen against construction drift
GOLDEN_SHARE0 = bytes.fromhex(
    "97b440d9476b701d9388fc360ada244cea1864fa6dfad193"
    "97d1987d34cf9af13f365710b4b6e5ed319b010a8dd7696a")


def test_share_of_zero_reconstructs_zero():
    s0, s1 = share(RingMatrix.zeros(3, 2), PrgSeed.from_int(1))
    assert np.all(reconstruct(s0, s1).data == 0)
    assert np.any(s0.payload.data != 0)  # shares themselves are masked


def test_share_reconstruct_roundtrip():
    rng = np.random.default_rng(0)
    for i in range(100):
        x = RingMatrix(rng.integers(0, 2**64, size=(2, 3), dtype=np.uint64))
        s0, s1 = share(x, PrgSeed.from_int(i))
        assert reconstruct(s0, s1) == x


def test_share_determinism_golden_bytes():
    x = RingMatrix(np.arange(6, dtype=np.uint64).reshape(2, 3))
    s0, _ = share(x, PrgSeed.from_int(42))
    assert s0.payload.to_bytes() == GOLDEN_SHARE0


def test_reveal_symmetric():
    x = encode([[1.0]])
    s = share(x, PrgSeed.from_int(4))

    def party(b):
        return lambda ch: reveal(s[b], ch)

    r0, r1, st0, st1 = run_two_party(party(0), party(1))
    assert r0 == x and r1 == x
    assert st0.bytes_sent == 8 + 5 and st0.rounds == 1 and st0.opened_elements == 1
    assert st1.bytes_sent == st0.bytes_sent


def test_batch_reveal_element_count():
    # x' (128x100), w' (1x100), y' (128x1): mn+n+m elements per party
    rng = np.random.default_rng(1)
    mats = [RingMatrix(rng.integers(0, 2**64, size=shape, dtype=np.uint64))
            for shape in ((128, 100), (1, 100), (128, 1))]
    shares = [share(m, PrgSeed.from_int(i)) for i, m in enumerate(mats)]

    def party(b):
        return lambda ch: reveal_many([s[b] for s in shares], ch)

    r0, r1, st0, st1 = run_two_party(party(0), party(1))
    assert st0.opened_elements == 128 * 100 + 100 + 128 == 13028
    assert st0.rounds == 1  # one frame for the whole batch
    assert st0.bytes_sent == 13028 * 8 + 5
    for got, want in zip(r0, mats):
        assert got == want


def test_local_affine_public_addition():
    x = encode([[2.0, -1.0]])
    p = encode([[0.5, 0.25]])
    s = share(x, PrgSeed.from_int(9))
    outs = [local_affine([s[b]], [p], [AffineTerm(("p0",)), AffineTerm(("s0",))])
            for b in (0, 1)]
    assert reconstruct(*outs) == x + p  # party 0 adds the constant once


def test_local_affine_share_times_public():
    x = encode([[1.5], [2.5]])
    p = encode([[2.0, 1.0]])
    s = share(x, PrgSeed.from_int(10))
    outs = [local_affine([s[b]], [p], [AffineTerm(("s0", "p0"))]) for b in (0, 1)]
    got = reconstruct(*outs)
    assert got == x @ p


def test_local_affine_rejects_share_product():
    x = encode([[1.0]])
    s0, _ = share(x, PrgSeed.from_int(2))
    with pytest.raises(ShareAlgebraError):
        local_affine([s0, s0], [], [AffineTerm(("s0", "s1"))])
    with pytest.raises(ShareAlgebraError):
        _ = s0 @ s0


def test_local_affine_never_touches_channel():
    ch0, _ = inprocess_pair()
    x = encode([[1.0, 2.0]])
    s0, _ = share(x, PrgSeed.from_int(3))
    before = (ch0.stats.bytes_sent, ch0.stats.rounds, ch0.stats.opened_elements)
    local_affine([s0], [x], [AffineTerm(("s0",)), AffineTerm(("p0",), -2)])
    assert (ch0.stats.bytes_sent, ch0.stats.rounds, ch0.stats.opened_elements) == before


def test_trunc_shares_scale_bookkeeping():
    v = 0.25
    raw = RingMatrix.from_ints([[round(v * 2**32)]])  # scale 2f
    s = share(raw, PrgSeed.from_int(5))
    out = reconstruct(trunc_shares(s[0], 16), trunc_shares(s[1], 16))
    assert abs(decode(out)[0, 0] - v) <= 2**-16


def test_trunc_shares_error_bounds():
    rng = np.random.default_rng(12)
    vals = rng.uniform(-2000.0, 2000.0, size=100_000)
    raw = RingMatrix((encode([vals]).data.astype(np.uint64) << np.uint64(16)))
    s = share(raw, PrgSeed.from_int(6))
    out = decode(reconstruct(trunc_shares(s[0], 16), trunc_shares(s[1], 16)))[0]
    err = np.abs(out - decode(encode([vals]))[0])
    assert err.max() <= 2**-15           # never more than 2 ulp
    assert err.mean() <= 2**-16          # about half an ulp on average


def test_trunc_shares_of_zero_is_exact_zero():
    s = share(RingMatrix.zeros(1, 4), PrgSeed.from_int(7))
    out = reconstruct(trunc_shares(s[0], 16), trunc_shares(s[1], 16))
    assert np.all(out.data == 0)


def test_masking_uniformity_chi_square():
    # reduced ring Z_256: empirical distribution of x - r over fresh draws
    stream = PrgStream(PrgSeed.from_int(99))
    draws = np.frombuffer(stream.bytes(100_000), dtype=np.uint8)
    x = np.uint8(173)
    masked = (x - draws).astype(np.uint8)
    counts = np.bincount(masked, minlength=256)
    expected = 100_000 / 256
    stat = float(((counts - expected) ** 2 / expected).sum())
    # chi-square 0.99 quantile at 255 degrees of freedom
    assert stat < 310.457


def test_share_party_mismatch_rejected():
    x = encode([[1.0]])
    s0, s1 = share(x, PrgSeed.from_int(8))
    with pytest.raises(ValueError):
        _ = s0 + s1
    with pytest.raises(ValueError):
        reconstruct(s0, s0)
