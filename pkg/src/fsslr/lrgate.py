"""Online logistic-regression gates.

Three protocols producing one mini-batch's gradient shares:

- eval_v1: one round. Opens x', w', y', then assembles the full Taylor
  gradient locally from the bundle's correlated randomness, including the
  cross-term tensor contraction.
- eval_v2: two rounds. Round one as v1; the parties then form shares of the
  untruncated forward product, open it masked, and add indicator-weighted
  corrections for elements outside the middle sigmoid segment, consuming
  the segment keys' payload vectors. When every element is in the middle
  segment the corrections reconstruct to exactly zero and the output equals
  eval_v1's bitwise.
- eval_ss_baseline: two rounds of Beaver openings (the backward product
  reuses the x-side mask, so round two opens only m elements).

All three scale by the public learning-rate factor and truncate on a frozen
schedule so cross-protocol comparisons are meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dealer import BeaverTriples, LrKeyBundle
from .fss.icbatch import ic_eval_batch
from .ring import FixedPointConfig, RingMatrix, encode_scalar, DEFAULT_CONFIG
from .sharing import (AffineTerm, ShareMatrix, local_affine, reveal,
                      reveal_many, trunc_shares)
from .transport import Channel, Tag


@dataclass
class Hyper:
    """Public training hyperparameters.

    inv_slope is the reciprocal of the Taylor slope (4 for 0.5 + 0.25x; the
    segmented-Taylor preset uses 8 with eps 4.0).
    """

    alpha: float = 0.5
    eps: float = 4.0
    inv_slope: int = 4
    cfg: FixedPointConfig = DEFAULT_CONFIG

    def __post_init__(self):
        if self.inv_slope not in (2, 4, 8, 16):
            raise ValueError("inv_slope must be a small power of two")
        if 3 * self.cfg.f >= self.cfg.ell - 4:
            raise ValueError(
                f"gate needs headroom above scale 2^(3f): f={self.cfg.f}, ell={self.cfg.ell}")


@dataclass
class BatchInput:
    """One party's view of a mini-batch: shares of x (m x n), y (m x 1),
    current weights w (1 x n), dealer material, and the public hypers."""

    x: ShareMatrix
    y: ShareMatrix
    w: ShareMatrix
    bundle: LrKeyBundle | BeaverTriples
    hyper: Hyper

    def __post_init__(self):
        m, n = self.x.shape
        if self.y.shape != (m, 1) or self.w.shape != (1, n):
            raise ValueError(
                f"inconsistent shapes x={self.x.shape} y={self.y.shape} w={self.w.shape}")


@dataclass
class GradientShare:
    dw: ShareMatrix  # 1 x n


def _open_masked_inputs(inp: BatchInput, channel: Channel):
    """Round 1 of the FSS gates: reveal x'=x-r1, w'=w-r2, y'=y-r3."""
    b = inp.bundle
    return reveal_many([inp.x - b.r1, inp.w - b.r2, inp.y - b.r3],
                       channel, Tag.REVEAL)


def _forward_shares(bundle: LrKeyBundle, xp: RingMatrix, wp: RingMatrix) -> ShareMatrix:
    """Shares of w x^T at scale 2^(2f):
    b-gated w'x'^T + w' r1^T + r2 x'^T + c1."""
    return local_affine(
        shares=[bundle.r1, bundle.r2, bundle.c1],
        publics=[xp, wp],
        program=[
            AffineTerm(("p1", "p0.T")),
            AffineTerm(("p1", "s0.T")),
            AffineTerm(("s1", "p0.T")),
            AffineTerm(("s2",)),
        ],
    )


def _taylor_bracket(bundle: LrKeyBundle, xp: RingMatrix, wp: RingMatrix,
                    yp: RingMatrix, hyper: Hyper) -> ShareMatrix:
    """Shares of inv_slope * (sigma_taylor(w x^T) - y^T) x at scale 2^(3f).

    Expands ((inv_slope/2) 1 + w x^T - inv_slope y^T) x against the opened
    values and every correlated term, including the tensor contraction.
    """
    cfg = hyper.cfg
    coef1 = (hyper.inv_slope // 2) << (2 * cfg.f)
    ycoef = hyper.inv_slope << cfg.f
    ones = RingMatrix.ones_row(bundle.m, cfg)
    c2term = bundle.contract_c2(xp)
    return local_affine(
        shares=[bundle.r1, bundle.r2, bundle.r3, bundle.c1, bundle.c3,
                bundle.c4, bundle.c5, c2term],
        publics=[xp, wp, yp, ones],
        program=[
            AffineTerm(("p3", "p0"), coef1),          # 1 x'
            AffineTerm(("p3", "s0"), coef1),          # 1 r1
            AffineTerm(("p1", "p0.T", "p0")),         # w' x'^T x'
            AffineTerm(("p1", "s0.T", "p0")),         # w' r1^T x'
            AffineTerm(("s1", "p0.T", "p0")),         # r2 x'^T x'
            AffineTerm(("p1", "p0.T", "s0")),         # w' x'^T r1
            AffineTerm(("p1", "s6")),                 # w' c5
            AffineTerm(("s7",)),                      # r2 (x')^T r1 contraction
            AffineTerm(("s3", "p0")),                 # c1 x'
            AffineTerm(("s4",)),                      # c3
            AffineTerm(("p2.T", "p0"), -ycoef),       # y'^T x'
            AffineTerm(("p2.T", "s0"), -ycoef),       # y'^T r1
            AffineTerm(("s2.T", "p0"), -ycoef),       # r3^T x'
            AffineTerm(("s5",), -ycoef),              # c4
        ],
    )


def _scale_gradient(bracket: ShareMatrix, hyper: Hyper, m: int) -> ShareMatrix:
    """Frozen schedule: shift the 3f bracket down to f, apply the public
    alpha/(inv_slope*m) factor, shift once more."""
    cfg = hyper.cfg
    g = trunc_shares(bracket, 2 * cfg.f)
    rate = encode_scalar(hyper.alpha / (hyper.inv_slope * m), cfg)
    return trunc_shares(g * rate, cfg.f)


def eval_v1(inp: BatchInput, channel: Channel) -> GradientShare:
    """One-round Taylor gate; opens mn+n+m elements."""
    bundle = inp.bundle
    if not isinstance(bundle, LrKeyBundle):
        raise TypeError("eval_v1 needs an LrKeyBundle")
    bundle.consume()
    xp, wp, yp = _open_masked_inputs(inp, channel)
    bracket = _taylor_bracket(bundle, xp, wp, yp, inp.hyper)
    return GradientShare(_scale_gradient(bracket, inp.hyper, bundle.m))


def eval_v2(inp: BatchInput, channel: Channel) -> GradientShare:
    """Two-round segmented gate; opens mn+n+2m elements.

    The middle-segment gradient is the v1 assembly on the same bundle; the
    outer segments contribute indicator-weighted correction terms whose
    share-times-mask products come from the segment keys' payloads.
    """
    bundle = inp.bundle
    if not isinstance(bundle, LrKeyBundle) or bundle.kind != "v2":
        raise TypeError("eval_v2 needs a v2 LrKeyBundle")
    hyper = inp.hyper
    cfg = hyper.cfg
    bundle.consume()

    xp, wp, yp = _open_masked_inputs(inp, channel)
    bracket = _taylor_bracket(bundle, xp, wp, yp, hyper)
    base = _scale_gradient(bracket, hyper, bundle.m)

    u = _forward_shares(bundle, xp, wp)             # 1 x m, scale 2f
    uhat = reveal(u + bundle.r_mic, channel, Tag.FORWARD)
    uhat_row = uhat.data[0]                          # (m,) public
    x_shift = uhat_row + cfg.dtype.type(cfg.half)    # signed-to-unsigned shift

    n = bundle.n
    coef1 = cfg.dtype.type(((hyper.inv_slope // 2) << (2 * cfg.f)) & cfg.mask)
    party = bundle.party
    corr = np.zeros(n, dtype=cfg.dtype)
    for seg_idx, sign in ((0, -1), (2, 1)):
        outs = ic_eval_batch(party, bundle.seg_keys[seg_idx], x_shift)
        sel = outs[:, 0]                             # indicator shares
        sel_r = outs[:, 1]                           # indicator * forward mask
        sel_r1 = outs[:, 2:2 + n]                    # indicator * r1 rows
        sel_rr1 = outs[:, 2 + n:]                    # indicator * r_mic * r1 rows
        sel_x = sel @ xp.data + sel_r1.sum(axis=0)
        sel_ux = ((uhat_row * sel) @ xp.data
                  + (uhat_row[:, None] * sel_r1).sum(axis=0)
                  - sel_r @ xp.data
                  - sel_rr1.sum(axis=0))
        if sign > 0:
            corr = corr + (coef1 * sel_x - sel_ux)
        else:
            corr = corr - (coef1 * sel_x + sel_ux)

    corr_sh = ShareMatrix(party, RingMatrix(corr.reshape(1, n), cfg))
    corr_grad = _scale_gradient(corr_sh, hyper, bundle.m)
    return GradientShare(base + corr_grad)


def eval_ss_baseline(inp: BatchInput, channel: Channel) -> GradientShare:
    """Two-round Beaver baseline; opens mn+n+m elements total."""
    t = inp.bundle
    if not isinstance(t, BeaverTriples):
        raise TypeError("eval_ss_baseline needs BeaverTriples")
    hyper = inp.hyper
    cfg = hyper.cfg
    t.consume()

    opened = reveal_many([inp.w - t.a1, inp.x.T - t.b1], channel, Tag.BEAVER_FWD)
    w_open, xt_open = opened                        # w - A1 (1xn), x^T - B1 (nxm)

    u = local_affine(
        shares=[t.a1, t.b1, t.c1],
        publics=[w_open, xt_open],
        program=[
            AffineTerm(("s2",)),
            AffineTerm(("p0", "s1")),
            AffineTerm(("s0", "p1")),
            AffineTerm(("p0", "p1")),
        ],
    )
    u = trunc_shares(u, cfg.f)                       # forward product to scale f

    slope_enc = (1 << cfg.f) // hyper.inv_slope
    half_row = RingMatrix.ones_row(t.m, cfg) * (1 << (2 * cfg.f - 1))
    yhat = trunc_shares((u * slope_enc).add_public(half_row), cfg.f)

    g = yhat - inp.y.T
    g_open = reveal(g - t.a2, channel, Tag.BEAVER_BWD)   # 1 x m
    x_open = xt_open.T                                   # x - B2, reuses round 1

    prod = local_affine(
        shares=[t.a2, t.b2, t.c2],
        publics=[g_open, x_open],
        program=[
            AffineTerm(("s2",)),
            AffineTerm(("p0", "s1")),
            AffineTerm(("s0", "p1")),
            AffineTerm(("p0", "p1")),
        ],
    )
    prod = trunc_shares(prod, cfg.f)                 # backward product to scale f
    rate = encode_scalar(hyper.alpha / t.m, cfg)
    dw = trunc_shares(prod * rate, cfg.f)            # learning-rate scaling
    return GradientShare(dw)


# -- plaintext reference formulas ---------------------------------------------

def plain_gradient_taylor(x: np.ndarray, y: np.ndarray, w: np.ndarray,
                          alpha: float, inv_slope: int = 4) -> np.ndarray:
    """Real-arithmetic batch gradient with the Taylor activation."""
    m = x.shape[0]
    u = x @ w
    yhat = 0.5 + u / inv_slope
    return (alpha / m) * ((yhat - y) @ x)


def plain_gradient_segmented(x: np.ndarray, y: np.ndarray, w: np.ndarray,
                             alpha: float, eps: float = 4.0,
                             inv_slope: int = 4) -> np.ndarray:
    """Real-arithmetic batch gradient with the three-segment activation
    (0 below -eps, Taylor inside [-eps, eps), 1 at and above eps)."""
    m = x.shape[0]
    u = x @ w
    yhat = np.where(u < -eps, 0.0, np.where(u >= eps, 1.0, 0.5 + u / inv_slope))
    return (alpha / m) * ((yhat - y) @ x)
