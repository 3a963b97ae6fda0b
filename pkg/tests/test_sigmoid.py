import math

import numpy as np
import pytest

from fsslr.ring import FixedPointConfig, decode, encode, encode_scalar
from fsslr.sigmoid import (APPROXIMATIONS, SigmoidKind, approx_error,
                           approx_error_fixed, benchmark_grid,
                           newton_recip_fixed, newton_rsqrt_fixed,
                           sigmoid_eval, sigmoid_eval_fixed)

CFG = FixedPointConfig()
BOUNDED = [k for k in APPROXIMATIONS if k != SigmoidKind.TAYLOR1]


def test_real_trivials():
    assert sigmoid_eval("exact", 0.0) == 0.5
    assert sigmoid_eval("taylor1", 2.0) == 1.0          # 0.5 + 0.25 * 2
    assert sigmoid_eval("reciprocal", 1.0) == 0.75      # 0.5 * (1/2) + 0.5


def test_fixed_trivials():
    out = sigmoid_eval_fixed("taylor1", encode([[0.0]]))
    assert int(out.data[0, 0]) == encode_scalar(0.5)    # exact at zero
    out = sigmoid_eval_fixed("segmented_taylor", encode([[10.0]]))
    assert int(out.data[0, 0]) == encode_scalar(1.0)    # saturation branch


def test_fixed_matches_real_pointwise():
    grid = benchmark_grid()
    for kind in APPROXIMATIONS:
        fixed = decode(sigmoid_eval_fixed(kind, encode(grid.reshape(1, -1))))[0]
        real = sigmoid_eval(kind, grid)
        assert np.abs(fixed - real).max() <= 2**-14, kind


def test_fixed_error_gap_below_1e3():
    for kind in APPROXIMATIONS:
        gap = abs(approx_error_fixed(kind) - approx_error(kind))
        assert gap <= 1e-3, kind


def test_errors_in_published_bands():
    bands = {
        SigmoidKind.TAYLOR1: (0.66, 0.98),
        SigmoidKind.SEGMENTED_NONLINEAR: (0.005, 0.0075),
        SigmoidKind.SQRT: (0.020, 0.031),
        SigmoidKind.RECIPROCAL: (0.046, 0.069),
        SigmoidKind.SEGMENTED_TAYLOR: (0.028, 0.041),
    }
    for kind, (lo, hi) in bands.items():
        err = approx_error(kind)
        assert lo <= err <= hi, (kind, err)


def test_error_ordering():
    errs = {k: approx_error(k) for k in APPROXIMATIONS}
    assert (errs[SigmoidKind.SEGMENTED_NONLINEAR] < errs[SigmoidKind.SQRT]
            < errs[SigmoidKind.SEGMENTED_TAYLOR] < errs[SigmoidKind.RECIPROCAL]
            < errs[SigmoidKind.TAYLOR1])


def test_bounded_variants_monotone_and_in_unit_interval():
    grid = benchmark_grid()
    for kind in BOUNDED:
        vals = sigmoid_eval(kind, grid)
        assert np.all(np.diff(vals) >= -1e-12), kind
        assert vals.min() >= 0.0 and vals.max() <= 1.0, kind


def test_symmetry():
    grid = benchmark_grid()
    for kind in APPROXIMATIONS + [SigmoidKind.EXACT]:
        left = sigmoid_eval(kind, -grid)
        right = 1.0 - np.asarray(sigmoid_eval(kind, grid))
        assert np.abs(left - right).max() <= 1e-12, kind


def test_segmented_taylor_branch_continuity():
    # slope 1/8 with bound 4: the linear branch reaches exactly 1 at +4
    assert sigmoid_eval("segmented_taylor", 4.0) == 1.0
    assert sigmoid_eval("segmented_taylor", 3.999999) == pytest.approx(1.0, abs=1e-6)
    assert sigmoid_eval("segmented_taylor", -4.0) == 0.0
    assert sigmoid_eval("segmented_nonlinear", 0.0) == 0.5


def test_taylor1_unbounded():
    assert sigmoid_eval("taylor1", 10.0) == 3.0
    assert sigmoid_eval("taylor1", -10.0) == -2.0


def test_exact_has_no_fixed_form():
    with pytest.raises(ValueError):
        sigmoid_eval_fixed("exact", encode([[0.0]]))


def test_newton_reciprocal_accuracy():
    f = CFG.f
    for d_real in (1.0, 1.5, 2.0, 3.7, 11.0, 101.0):
        d = int(round(d_real * (1 << f)))
        z = newton_recip_fixed(d, f)
        got = z / (1 << (f + 8))
        assert abs(got - 1.0 / d_real) <= 2**-15, d_real
    with pytest.raises(ValueError):
        newton_recip_fixed((1 << f) - 1, f)


def test_newton_rsqrt_accuracy():
    f = CFG.f
    for a_real in (1.0, 2.0, 5.0, 26.0, 101.0):
        a = int(round(a_real * (1 << f)))
        z = newton_rsqrt_fixed(a, f)
        got = z / (1 << (f + 8))
        assert abs(got - 1.0 / math.sqrt(a_real)) <= 2**-15, a_real
    with pytest.raises(ValueError):
        newton_rsqrt_fixed((1 << f) - 1, f)
