"""Multiple interval containment over Z_{2^n} with input-offset handling.

For public intervals [p_i, q_i] (0 <= p_i <= q_i <= 2^n - 1) and a dealer
mask r, evaluation on the publicly opened x_hat = x + r mod 2^n yields
additive shares of 1{p_i <= x <= q_i} (plus any requested output mask).

Each interval consumes two DCFs evaluated at x_hat, with thresholds rotated
by the mask, plus a dealer-computed wraparound correction:

    1{p <= x <= q} = 1{x_hat < r+q+1} - 1{x_hat < r+p} + z
    z = 1{r > r+q+1} - 1{r > r+p} + 1{q = 2^n - 1}    (all mod 2^n)

so correctness holds unconditionally, with no bounded-input assumption.
Intervals may carry vector payloads: the DCF payload beta multiplies the
indicator, yielding shares of beta * 1{p <= x <= q}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..prg import PrgStream
from ..ring import _UNSIGNED, FixedPointConfig, RingMatrix
from ..sharing import ShareMatrix
from .dcf import LAMBDA, DcfKey, dcf_eval, dcf_eval_full, dcf_gen


@dataclass
class MicKey:
    """One party's key for an m-interval containment gate on one masked input.

    dcf_low / dcf_high stack one instance per interval (thresholds r+p_i and
    r+q_i+1); out_corr holds this party's share of the per-interval
    wraparound constants plus any output masks; r_in is this party's share
    of the input mask.
    """

    party: int
    n: int
    intervals: np.ndarray    # (m, 2) uint64, public
    r_in: int                # share of the input mask
    dcf_low: DcfKey
    dcf_high: DcfKey
    out_corr: np.ndarray     # (m, d) ring words

    @property
    def interval_count(self) -> int:
        return self.intervals.shape[0]

    @property
    def payload_dim(self) -> int:
        return self.out_corr.shape[1]

    def nbytes(self) -> int:
        return self.dcf_low.nbytes() + self.dcf_high.nbytes() + self.out_corr.nbytes


def _validate_intervals(intervals, n: int) -> np.ndarray:
    arr = np.asarray(intervals, dtype=np.uint64).reshape(-1, 2)
    top = (1 << n) - 1
    if arr.size == 0:
        raise ValueError("malformed intervals: empty list")
    if np.any(arr[:, 0] > arr[:, 1]) or np.any(arr > np.uint64(top)):
        raise ValueError(f"malformed intervals: need 0 <= p <= q <= {top}")
    return arr


def mic_gen(lam: int, n: int, intervals, r_in: int, seed,
            payloads=None, r_out=None, out_ell: int = 64):
    """Generate a MIC key pair for public intervals and dealer mask r_in.

    payloads: optional (m, d) ring matrix of per-interval DCF payloads
    (default: scalar 1, plain indicators). r_out: optional (m, d) output
    masks added to the reconstructed outputs.
    """
    if lam != LAMBDA:
        raise ValueError(f"unsupported lambda {lam}")
    arr = _validate_intervals(intervals, n)
    m = arr.shape[0]
    dtype = _UNSIGNED[out_ell]
    rng = seed if isinstance(seed, PrgStream) else PrgStream(seed)

    mask_n = (1 << n) - 1
    r = int(r_in) & mask_n
    p = arr[:, 0].astype(object)
    q = arr[:, 1].astype(object)
    a_low = np.array([(r + int(pi)) & mask_n for pi in p], dtype=np.uint64)
    a_high = np.array([(r + int(qi) + 1) & mask_n for qi in q], dtype=np.uint64)

    if payloads is None:
        beta = np.ones((m, 1), dtype=dtype)
    else:
        beta = np.asarray(payloads, dtype=dtype).reshape(m, -1)
    d = beta.shape[1]

    z = np.zeros((m, d), dtype=dtype)
    for i in range(m):
        coef = (1 if r > int(a_high[i]) else 0) - (1 if r > int(a_low[i]) else 0)
        if int(q[i]) == mask_n:
            coef += 1
        z[i] = (dtype.type(coef & ((1 << out_ell) - 1))) * beta[i]
    if r_out is not None:
        z = z + np.asarray(r_out, dtype=dtype).reshape(m, d)

    low0, low1 = dcf_gen(lam, n, a_low, beta, rng, out_ell=out_ell)
    high0, high1 = dcf_gen(lam, n, a_high, beta, rng, out_ell=out_ell)

    z0 = rng.words(m * d, FixedPointConfig(out_ell, 1)).reshape(m, d)
    z1 = z - z0
    r0 = int.from_bytes(rng.bytes(n // 8 + 1), "little") & mask_n
    r1 = (r - r0) & mask_n

    k0 = MicKey(0, n, arr, r0, low0, high0, z0)
    k1 = MicKey(1, n, arr, r1, low1, high1, z1)
    return k0, k1


def _mic_eval_raw(party: int, key: MicKey, x_hat: int) -> np.ndarray:
    xs = np.full(key.interval_count, np.uint64(int(x_hat) & ((1 << key.n) - 1)))
    low = dcf_eval(party, key.dcf_low, xs)
    high = dcf_eval(party, key.dcf_high, xs)
    out = high - low
    if out.ndim == 1:
        out = out[:, None]
    return out + key.out_corr


def mic_eval(party: int, k: MicKey, x_hat: int,
             cfg: FixedPointConfig | None = None) -> ShareMatrix:
    """Shares of the m interval indicators for the public masked input."""
    out = _mic_eval_raw(party, k, x_hat)
    cfg = cfg or FixedPointConfig(k.dcf_low.out_ell, 1)
    return ShareMatrix(party, RingMatrix(out[:, 0].reshape(1, -1), cfg))


def mic_eval_full(party: int, key: MicKey) -> np.ndarray:
    """Indicator shares for every x_hat in the domain: (m, 2^n) or (m, 2^n, d).

    Exhaustive-test helper; evaluates the two stacked DCFs over the full
    domain and indexes the rotated evaluation points.
    """
    size = 1 << key.n
    low_tab = dcf_eval_full(party, key.dcf_low)
    high_tab = dcf_eval_full(party, key.dcf_high)
    out = high_tab - low_tab
    if out.ndim == 2:
        out = out[:, :, None]
    return np.squeeze(out + key.out_corr[:, None, :], axis=2) if key.payload_dim == 1 \
        else out + key.out_corr[:, None, :]


def segment_intervals(eps_enc: int, ell: int) -> np.ndarray:
    """Three non-wrapping intervals for the signed segments
    (-inf, -eps), [-eps, eps), [eps, inf) after the +2^(ell-1) domain shift.

    Inputs must be shifted the same way before evaluation:
    x_shifted = x + 2^(ell-1) mod 2^ell maps signed order onto unsigned order.
    """
    half = 1 << (ell - 1)
    top = (1 << ell) - 1
    eps = int(eps_enc)
    if not 0 < eps < half:
        raise ValueError("threshold must satisfy 0 < eps_enc < 2^(ell-1)")
    return np.array(
        [[0, half - eps - 1],
         [half - eps, half + eps - 1],
         [half + eps, top]],
        dtype=np.uint64,
    )
