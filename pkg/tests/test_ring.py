import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fsslr.ring import (DimensionError, FixedPointConfig, RangeError,
                        RingMatrix, decode, encode, encode_scalar, mat_mul,
                        truncate)

CFG = FixedPointConfig()


def test_config_validation():
    with pytest.raises(ValueError):
        FixedPointConfig(ell=16)
    with pytest.raises(ValueError):
        FixedPointConfig(ell=64, f=0)
    with pytest.raises(ValueError):
        FixedPointConfig(ell=64, f=64)
    assert FixedPointConfig(32, 8).dtype == np.dtype("<u4")


def test_encode_trivials():
    assert encode_scalar(0.0) == 0
    assert encode_scalar(0.5) == 32768
    assert encode_scalar(-1.0) == 2**64 - 65536


def test_decode_trivials():
    assert decode(RingMatrix.from_ints([[32768]]))[0, 0] == 0.5
    assert decode(RingMatrix.from_ints([[2**64 - 65536]]))[0, 0] == -1.0
    assert abs(decode(encode([[3.141]]))[0, 0] - 3.141) <= 2**-16


def test_encode_range_error():
    with pytest.raises(RangeError):
        encode([[float(2**47)]])
    with pytest.raises(RangeError):
        encode([[float("nan")]])
    # just inside the range is fine
    encode([[float(2**47 - 1)]])


@given(st.lists(st.floats(min_value=-1e9, max_value=1e9), min_size=1, max_size=20))
@settings(max_examples=200, deadline=None)
def test_encode_decode_roundtrip(values):
    arr = np.array([values])
    got = decode(encode(arr))
    assert np.all(np.abs(got - arr) <= 2**-16 + 1e-12)


def test_matmul_identity():
    ident = RingMatrix.from_ints([[1, 0], [0, 1]])
    b = RingMatrix.from_ints([[5, 6], [7, 8]])
    assert mat_mul(ident, b) == b


def test_matmul_half_squared():
    m = encode([[0.5]])
    assert int(mat_mul(m, m).data[0, 0]) == 2**30  # carries scale 2^(2f)


def test_matmul_dimension_error():
    a = RingMatrix.zeros(2, 3)
    b = RingMatrix.zeros(2, 3)
    with pytest.raises(DimensionError):
        mat_mul(a, b)


def _schoolbook(a, b, mask):
    rows, inner, cols = len(a), len(a[0]), len(b[0])
    out = [[0] * cols for _ in range(rows)]
    for i in range(rows):
        for j in range(cols):
            acc = 0
            for k in range(inner):
                acc = (acc + a[i][k] * b[k][j]) & mask
            out[i][j] = acc
    return out


def test_matmul_matches_schoolbook_oracle():
    rng = np.random.default_rng(7)
    for _ in range(100):
        r, k, c = (int(v) for v in rng.integers(1, 9, size=3))
        a = rng.integers(0, 2**64, size=(r, k), dtype=np.uint64)
        b = rng.integers(0, 2**64, size=(k, c), dtype=np.uint64)
        got = mat_mul(RingMatrix(a), RingMatrix(b)).data
        want = _schoolbook(a.tolist(), b.tolist(), 2**64 - 1)
        assert got.tolist() == want


def test_truncate_trivials():
    assert int(truncate(RingMatrix.from_ints([[2**30]]), 16).data[0, 0]) == 2**14
    neg = mat_mul(encode([[-0.5]]), encode([[0.5]]))
    got = decode(truncate(neg, 16))[0, 0]
    assert abs(got - (-0.25)) <= 2**-16


def test_truncate_float_oracle():
    rng = np.random.default_rng(11)
    a = rng.uniform(-8, 8, size=1000)
    b = rng.uniform(-8, 8, size=1000)
    got = np.diag(decode(truncate(mat_mul(encode([a]).T, encode([b])), 16)))
    # the float oracle runs on the quantized inputs, so the comparison sees
    # pure truncation error: one unit in the last place
    want = decode(encode([a]))[0] * decode(encode([b]))[0]
    assert np.all(np.abs(got - want) <= 2**-15)


def test_truncate_exact_for_integer_values():
    vals = np.array([[-5.0, 3.0, 0.0, 100.0]])
    scaled = RingMatrix((encode(vals).data.astype(np.uint64) << np.uint64(16)))
    assert np.array_equal(truncate(scaled, 16).data, encode(vals).data)


@given(st.integers(0, 2**64 - 1), st.integers(0, 2**64 - 1), st.integers(0, 2**64 - 1))
@settings(max_examples=200, deadline=None)
def test_ring_laws(a, b, c):
    ma = RingMatrix.from_ints([[a]])
    mb = RingMatrix.from_ints([[b]])
    mc = RingMatrix.from_ints([[c]])
    assert (ma + mb) == (mb + ma)
    assert ((ma + mb) + mc) == (ma + (mb + mc))
    assert mat_mul(ma, mb) == mat_mul(mb, ma)  # 1x1 commutes
    assert mat_mul(mat_mul(ma, mb), mc) == mat_mul(ma, mat_mul(mb, mc))
    assert mat_mul(ma, mb + mc) == mat_mul(ma, mb) + mat_mul(ma, mc)


def test_serialization_roundtrip():
    rng = np.random.default_rng(3)
    m = RingMatrix(rng.integers(0, 2**64, size=(3, 5), dtype=np.uint64))
    back = RingMatrix.from_bytes(m.to_bytes(), 3, 5)
    assert back == m
    with pytest.raises(DimensionError):
        RingMatrix.from_bytes(m.to_bytes(), 3, 4)


def test_ell32_arithmetic():
    cfg = FixedPointConfig(32, 8)
    m = encode([[1.5]], cfg)
    assert int(m.data[0, 0]) == 384
    assert decode(truncate(mat_mul(m, m), 8))[0, 0] == pytest.approx(2.25, abs=2**-7)
