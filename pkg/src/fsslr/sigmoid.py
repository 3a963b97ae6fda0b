"""Five sigmoid approximations in real and fixed-point form.

The approximations: first-order Taylor (unbounded), segmented Taylor
(slope 1/8, saturating at +-4), a segmented quadratic, a reciprocal form
x/(1+|x|), and a square-root form x/sqrt(1+x^2), plus the exact logistic
for reference. Fixed-point forms run on opened ring values (benchmark use
only; the secure gates never evaluate reciprocal or square roots); the
reciprocal and inverse square root use Newton iterations on normalized
fixed-point operands.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .ring import FixedPointConfig, RingMatrix, DEFAULT_CONFIG


class SigmoidKind(str, Enum):
    TAYLOR1 = "taylor1"
    SEGMENTED_TAYLOR = "segmented_taylor"
    SEGMENTED_NONLINEAR = "segmented_nonlinear"
    RECIPROCAL = "reciprocal"
    SQRT = "sqrt"
    EXACT = "exact"


@dataclass(frozen=True)
class SigmoidVariant:
    kind: SigmoidKind
    slope: float | None = None
    intercept: float | None = None
    bound: float | None = None


VARIANTS = {
    SigmoidKind.TAYLOR1: SigmoidVariant(SigmoidKind.TAYLOR1, slope=0.25, intercept=0.5),
    SigmoidKind.SEGMENTED_TAYLOR: SigmoidVariant(
        SigmoidKind.SEGMENTED_TAYLOR, slope=0.125, intercept=0.5, bound=4.0),
    SigmoidKind.SEGMENTED_NONLINEAR: SigmoidVariant(
        SigmoidKind.SEGMENTED_NONLINEAR, bound=4.0),
    SigmoidKind.RECIPROCAL: SigmoidVariant(SigmoidKind.RECIPROCAL),
    SigmoidKind.SQRT: SigmoidVariant(SigmoidKind.SQRT),
    SigmoidKind.EXACT: SigmoidVariant(SigmoidKind.EXACT),
}

APPROXIMATIONS = [
    SigmoidKind.TAYLOR1,
    SigmoidKind.SEGMENTED_TAYLOR,
    SigmoidKind.SEGMENTED_NONLINEAR,
    SigmoidKind.RECIPROCAL,
    SigmoidKind.SQRT,
]


def _variant(v) -> SigmoidVariant:
    if isinstance(v, SigmoidVariant):
        return v
    return VARIANTS[SigmoidKind(v)]


def sigmoid_eval(v, x):
    """Real-arithmetic evaluation; x scalar or array."""
    var = _variant(v)
    x = np.asarray(x, dtype=np.float64)
    k = var.kind
    if k == SigmoidKind.EXACT:
        out = 1.0 / (1.0 + np.exp(-x))
    elif k == SigmoidKind.TAYLOR1:
        out = var.intercept + var.slope * x
    elif k == SigmoidKind.SEGMENTED_TAYLOR:
        out = np.select([x < -var.bound, x > var.bound],
                        [0.0, 1.0], var.intercept + var.slope * x)
    elif k == SigmoidKind.SEGMENTED_NONLINEAR:
        t = 0.5 * (1.0 - 0.25 * np.abs(x)) ** 2
        out = np.select([x <= -var.bound, x > var.bound, x <= 0],
                        [0.0, 1.0, t], 1.0 - t)
    elif k == SigmoidKind.RECIPROCAL:
        out = 0.5 * (x / (1.0 + np.abs(x))) + 0.5
    elif k == SigmoidKind.SQRT:
        out = 0.5 * (x / np.sqrt(1.0 + x * x)) + 0.5
    else:
        raise ValueError(f"unknown variant {v!r}")
    return float(out) if out.ndim == 0 else out


# -- fixed-point forms --------------------------------------------------------

_RECIP_C1 = 48 / 17
_RECIP_C2 = 32 / 17
GUARD_BITS = 8  # extra Newton precision so |x| * quantization stays sub-ulp


def _round_shift(a: int, k: int) -> int:
    return (a + (1 << (k - 1))) >> k if k > 0 else a


def newton_recip_fixed(d: int, f: int, iters: int = 5) -> int:
    """Fixed-point 1/d for d >= 2^f (d_real >= 1) at scale f + GUARD_BITS.

    Normalizes d to [0.5, 1), starts from the affine estimate
    48/17 - 32/17 * d_norm, and runs Newton steps z <- z(2 - d z)."""
    if d < (1 << f):
        raise ValueError("newton_recip_fixed expects d_real >= 1")
    g = f + GUARD_BITS
    e = d.bit_length()
    d_norm = (d << g) >> e  # scale g, in [0.5, 1)
    z = int(round(_RECIP_C1 * (1 << g))) - ((int(round(_RECIP_C2 * (1 << g))) * d_norm) >> g)
    two = 2 << g
    for _ in range(iters):
        z = (z * (two - ((d_norm * z) >> g))) >> g
    # d_real = d_norm_real * 2^(e-f); shift the normalized reciprocal back
    return z >> (e - f) if e >= f else z << (f - e)


def newton_rsqrt_fixed(a: int, f: int, iters: int = 12) -> int:
    """Fixed-point 1/sqrt(a) for a >= 2^f at scale f + GUARD_BITS.

    Normalizes a into [0.25, 1) by an even shift and runs Newton steps
    z <- z(3 - a z^2)/2 from a midpoint estimate."""
    if a < (1 << f):
        raise ValueError("newton_rsqrt_fixed expects a_real >= 1")
    g = f + GUARD_BITS
    s = max(0, a.bit_length() - f)
    if s % 2:
        s += 1
    a_norm = (a << GUARD_BITS) >> s  # scale g, in [0.25, 1)
    z = int(round(1.55 * (1 << g)))  # midpoint of 1/sqrt on [0.25, 1)
    three = 3 << g
    for _ in range(iters):
        azz = (((a_norm * z) >> g) * z) >> g
        z = (z * (three - azz)) >> (g + 1)
    return z >> (s // 2)


def _fixed_entry(kind: SigmoidKind, var: SigmoidVariant, v: int, cfg: FixedPointConfig) -> int:
    f = cfg.f
    one = 1 << f
    half = 1 << (f - 1)
    if kind == SigmoidKind.TAYLOR1:
        slope = int(round(var.slope * one))
        return half + ((slope * v) >> f)
    if kind == SigmoidKind.SEGMENTED_TAYLOR:
        bound = int(round(var.bound * one))
        if v > bound:
            return one
        if v < -bound:
            return 0
        slope = int(round(var.slope * one))
        return half + ((slope * v) >> f)
    if kind == SigmoidKind.SEGMENTED_NONLINEAR:
        bound = int(round(var.bound * one))
        if v <= -bound:
            return 0
        if v > bound:
            return one
        quarter = one >> 2
        t = one - ((quarter * abs(v)) >> f)
        sq = (t * t) >> f
        half_sq = sq >> 1
        return half_sq if v <= 0 else one - half_sq
    if kind == SigmoidKind.RECIPROCAL:
        d = one + abs(v)
        z = newton_recip_fixed(d, f)  # scale f + GUARD_BITS
        return half + _round_shift(v * z, f + GUARD_BITS + 1)
    if kind == SigmoidKind.SQRT:
        a = one + ((v * v) >> f)
        z = newton_rsqrt_fixed(a, f)  # scale f + GUARD_BITS
        return half + _round_shift(v * z, f + GUARD_BITS + 1)
    raise ValueError(f"variant {kind} has no fixed-point form")


def sigmoid_eval_fixed(v, x: RingMatrix, cfg: FixedPointConfig | None = None) -> RingMatrix:
    """Fixed-point evaluation on opened ring values, entry by entry.

    Result is within 2^(-f+2) of sigmoid_eval on decode(x). Benchmark-only:
    the reciprocal and square-root forms never run inside the secure gates.
    """
    var = _variant(v)
    if var.kind == SigmoidKind.EXACT:
        raise ValueError("the exact logistic has no fixed-point form here")
    cfg = cfg or x.cfg
    signed = x.data.view(cfg.signed_dtype)
    out = np.empty(x.shape, dtype=cfg.dtype)
    flat_in = signed.ravel()
    flat_out = out.ravel()
    for i in range(flat_in.shape[0]):
        flat_out[i] = _fixed_entry(var.kind, var, int(flat_in[i]), cfg) & cfg.mask
    return RingMatrix(out, cfg)


# -- error measurement --------------------------------------------------------

def benchmark_grid(points: int = 1000, lo: float = -10.0, hi: float = 10.0) -> np.ndarray:
    """Deterministic evenly spaced benchmark grid."""
    return np.linspace(lo, hi, points)


def approx_error(v, grid: np.ndarray | None = None) -> float:
    """Mean absolute error against the exact logistic on the grid."""
    grid = benchmark_grid() if grid is None else grid
    ref = sigmoid_eval(SigmoidKind.EXACT, grid)
    return float(np.mean(np.abs(sigmoid_eval(v, grid) - ref)))


def approx_error_fixed(v, cfg: FixedPointConfig = DEFAULT_CONFIG,
                       grid: np.ndarray | None = None) -> float:
    """Mean absolute error of the fixed-point form against the exact logistic."""
    from .ring import encode, decode

    grid = benchmark_grid() if grid is None else grid
    ref = sigmoid_eval(SigmoidKind.EXACT, grid)
    fixed = decode(sigmoid_eval_fixed(v, encode(grid.reshape(1, -1), cfg), cfg))
    return float(np.mean(np.abs(fixed[0] - ref)))


def error_table(cfg: FixedPointConfig = DEFAULT_CONFIG) -> list:
    """(variant, real MAE, fixed MAE, fixed eval seconds) per approximation."""
    import time

    grid = benchmark_grid()
    rows = []
    for kind in APPROXIMATIONS:
        real_err = approx_error(kind, grid)
        t0 = time.perf_counter()
        fixed_err = approx_error_fixed(kind, cfg, grid)
        dt = time.perf_counter() - t0
        rows.append((kind.value, real_err, fixed_err, dt))
    return rows
