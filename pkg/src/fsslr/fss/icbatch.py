"""Batched single-interval containment with per-instance input masks.

One IcBatchKey covers `count` independent masked inputs checked against the
same public interval [p, q], with an optional per-instance DCF payload
vector: evaluation at x_hat[i] = x[i] + r[i] reconstructs to
payload[i] * 1{p <= x[i] <= q}. The segmented logistic gate uses three of
these per batch, one per sigmoid segment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..prg import PrgStream
from ..ring import _UNSIGNED, FixedPointConfig
from .dcf import LAMBDA, DcfKey, dcf_eval, dcf_gen


@dataclass
class IcBatchKey:
    party: int
    n: int
    p: int
    q: int
    dcf_low: DcfKey
    dcf_high: DcfKey
    corr: np.ndarray  # (count, d) output-correction shares

    @property
    def count(self) -> int:
        return self.corr.shape[0]

    @property
    def payload_dim(self) -> int:
        return self.corr.shape[1]

    def nbytes(self) -> int:
        return self.dcf_low.nbytes() + self.dcf_high.nbytes() + self.corr.nbytes


def ic_gen_batch(n: int, p: int, q: int, masks: np.ndarray, seed,
                 payloads=None, out_ell: int = 64):
    """Key pair for 1{p <= x <= q} on `count` inputs masked by masks[i]."""
    dtype = _UNSIGNED[out_ell]
    mask_n = (1 << n) - 1
    if not 0 <= p <= q <= mask_n:
        raise ValueError(f"malformed interval [{p}, {q}] for n={n}")
    rng = seed if isinstance(seed, PrgStream) else PrgStream(seed)
    r = np.asarray(masks, dtype=np.uint64).reshape(-1)
    count = r.shape[0]

    if payloads is None:
        beta = np.ones((count, 1), dtype=dtype)
    else:
        beta = np.asarray(payloads, dtype=dtype).reshape(count, -1)
    d = beta.shape[1]

    a_low = (r + np.uint64(p)) & np.uint64(mask_n)
    a_high = (r + np.uint64(q) + np.uint64(1)) & np.uint64(mask_n)

    coef = (r > a_high).astype(np.int64) - (r > a_low).astype(np.int64)
    if q == mask_n:
        coef = coef + 1
    z = coef.astype(dtype)[:, None] * beta

    low0, low1 = dcf_gen(LAMBDA, n, a_low, beta, rng, out_ell=out_ell)
    high0, high1 = dcf_gen(LAMBDA, n, a_high, beta, rng, out_ell=out_ell)
    z0 = rng.words(count * d, FixedPointConfig(out_ell, 1)).reshape(count, d)
    z1 = z - z0

    return (IcBatchKey(0, n, p, q, low0, high0, z0),
            IcBatchKey(1, n, p, q, low1, high1, z1))


def ic_eval_batch(party: int, key: IcBatchKey, x_hat: np.ndarray) -> np.ndarray:
    """(count, d) shares for the public masked inputs x_hat (count,)."""
    xs = np.asarray(x_hat, dtype=np.uint64).reshape(-1)
    if key.n < 64:
        xs = xs & np.uint64((1 << key.n) - 1)
    low = dcf_eval(party, key.dcf_low, xs)
    high = dcf_eval(party, key.dcf_high, xs)
    out = high - low
    if out.ndim == 1:
        out = out[:, None]
    return out + key.corr
