"""Distributed comparison function: FSS for f(x) = beta * 1{x < alpha}.

Tree construction with one correction word per level (seed, group value,
two control bits) and a final group correction; key size is O(n * lambda)
plus n+1 group elements per payload dimension. Evaluation walks the n-bit
input MSB-first, accumulating a signed group contribution per level:

    Eval(0, k0, x) + Eval(1, k1, x) = beta * 1{x < alpha}  (mod 2^ell)

for every x in [0, 2^n). A single key is a PRG-expanded tree and reveals
nothing about (alpha, beta).

Keys are batched: one DcfKey object holds `count` independent instances
(stacked level-wise), and payloads may be vectors over Z_{2^ell}^d. All
node expansions use a fixed-key AES in MMO mode so whole batches expand in
one ECB call per level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from ..prg import SEED_BYTES, PrgStream
from ..ring import _UNSIGNED

LAMBDA = 128  # seed length in bits; the only supported PRG width

_FIXED_KEY = b"fss tree expand!"
_ECB = Cipher(algorithms.AES(_FIXED_KEY), modes.ECB())

# Tweak blocks for the node expansion (sL, vL, sR, vR, t-bits) and a disjoint
# range for payload conversion blocks.
_NODE_TWEAKS = np.frombuffer(
    b"".join(j.to_bytes(16, "little") for j in range(5)), dtype=np.uint8
).reshape(5, 16)


def _convert_tweaks(nblocks: int) -> np.ndarray:
    return np.frombuffer(
        b"".join((16 + j).to_bytes(16, "little") for j in range(nblocks)),
        dtype=np.uint8,
    ).reshape(nblocks, 16)


def _mmo(blocks: np.ndarray) -> np.ndarray:
    """AES_K(x) xor x on an (..., 16) uint8 array, one ECB call."""
    flat = np.ascontiguousarray(blocks, dtype=np.uint8)
    enc = _ECB.encryptor()
    out = np.frombuffer(enc.update(flat.tobytes()), dtype=np.uint8).reshape(flat.shape)
    return out ^ flat


def _expand(seeds: np.ndarray):
    """Expand (B,16) seeds into child seeds, value seeds, and control bits."""
    blocks = seeds[:, None, :] ^ _NODE_TWEAKS[None, :, :]
    out = _mmo(blocks)
    s_l, v_l, s_r, v_r, tblk = (out[:, j, :] for j in range(5))
    return s_l, v_l, (tblk[:, 0] & 1), s_r, v_r, (tblk[:, 8] & 1)


def _convert(vseeds: np.ndarray, d: int, dtype: np.dtype) -> np.ndarray:
    """Map (B,16) value seeds into (B,d) pseudorandom group vectors."""
    itemsize = dtype.itemsize
    need = d * itemsize
    if need <= SEED_BYTES:
        raw = np.ascontiguousarray(vseeds[:, :need])
    else:
        nblocks = -(-need // SEED_BYTES)
        out = _mmo(vseeds[:, None, :] ^ _convert_tweaks(nblocks)[None, :, :])
        raw = np.ascontiguousarray(out.reshape(vseeds.shape[0], -1)[:, :need])
    return raw.view(dtype).reshape(vseeds.shape[0], d)


@dataclass
class DcfKey:
    """One party's key material for `count` stacked DCF instances.

    levels hold the per-level correction words; cw_value carries the group
    corrections (payload dimension d over Z_{2^ell}); cw_final is the final
    group correction.
    """

    party: int
    n: int                  # input domain bits
    out_ell: int            # output group width (32 or 64)
    lam: int                # PRG seed bits (always 128)
    seed: np.ndarray        # (count, 16) uint8
    cw_seed: np.ndarray     # (n, count, 16) uint8
    cw_value: np.ndarray    # (n, count, d) ring words
    cw_tl: np.ndarray       # (n, count) uint8
    cw_tr: np.ndarray       # (n, count) uint8
    cw_final: np.ndarray    # (count, d) ring words

    @property
    def count(self) -> int:
        return self.seed.shape[0]

    @property
    def payload_dim(self) -> int:
        return self.cw_value.shape[2]

    def nbytes(self) -> int:
        return (self.seed.nbytes + self.cw_seed.nbytes + self.cw_value.nbytes
                + self.cw_tl.nbytes + self.cw_tr.nbytes + self.cw_final.nbytes)

    def to_bytes(self) -> bytes:
        import struct
        head = struct.pack("<6I", self.party, self.n, self.out_ell,
                           self.count, self.payload_dim, self.lam)
        return head + b"".join(
            np.ascontiguousarray(a).tobytes()
            for a in (self.seed, self.cw_seed, self.cw_value,
                      self.cw_tl, self.cw_tr, self.cw_final))

    @classmethod
    def from_bytes(cls, raw: bytes) -> "DcfKey":
        import struct
        party, n, out_ell, count, d, lam = struct.unpack("<6I", raw[:24])
        dtype = _UNSIGNED[out_ell]
        off = 24
        def take(shape, dt):
            nonlocal off
            size = int(np.prod(shape)) * np.dtype(dt).itemsize
            arr = np.frombuffer(raw[off:off + size], dtype=dt).reshape(shape).copy()
            off += size
            return arr
        seed = take((count, 16), np.uint8)
        cw_seed = take((n, count, 16), np.uint8)
        cw_value = take((n, count, d), dtype)
        cw_tl = take((n, count), np.uint8)
        cw_tr = take((n, count), np.uint8)
        cw_final = take((count, d), dtype)
        return cls(party, n, out_ell, lam, seed, cw_seed, cw_value,
                   cw_tl, cw_tr, cw_final)


def _as_alpha_array(alpha, n: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(alpha, dtype=np.uint64))
    if n < 64 and np.any(arr >> np.uint64(n)):
        raise ValueError(f"alpha outside the {n}-bit domain")
    return arr


def _as_beta_array(beta, count: int, dtype: np.dtype) -> np.ndarray:
    arr = np.asarray(beta)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        # one payload vector shared by every instance, or per-instance scalars
        arr = arr.reshape(count, 1) if arr.shape[0] == count else arr.reshape(1, -1)
    if arr.shape[0] == 1 and count > 1:
        arr = np.broadcast_to(arr, (count, arr.shape[1]))
    if arr.shape[0] != count:
        raise ValueError(f"beta rows {arr.shape[0]} do not match count {count}")
    return np.ascontiguousarray(arr).astype(dtype)


def dcf_gen(lam: int, n: int, alpha, beta, seed, out_ell: int = 64):
    """Generate a DCF key pair for f(x) = beta * 1{x < alpha}.

    alpha may be a scalar or a (count,) vector of thresholds; beta a scalar,
    a (count,) vector, or a (count, d) payload matrix. Returns stacked keys
    covering all instances.
    """
    if lam != LAMBDA:
        raise ValueError(f"unsupported lambda {lam}; only {LAMBDA} is implemented")
    if out_ell not in _UNSIGNED:
        raise ValueError("out_ell must be 32 or 64")
    if not 1 <= n <= out_ell:
        raise ValueError(f"invalid bit width n={n} (need 1 <= n <= ell={out_ell})")
    dtype = _UNSIGNED[out_ell]
    rng = seed if isinstance(seed, PrgStream) else PrgStream(seed)

    alpha_arr = _as_alpha_array(alpha, n)
    count = alpha_arr.shape[0]
    beta_arr = _as_beta_array(beta, count, dtype)
    d = beta_arr.shape[1]

    s0 = rng.seeds(count)
    s1 = rng.seeds(count)
    key_seed0, key_seed1 = s0.copy(), s1.copy()
    t0 = np.zeros(count, dtype=np.uint8)
    t1 = np.ones(count, dtype=np.uint8)
    v_alpha = np.zeros((count, d), dtype=dtype)

    cw_seed = np.empty((n, count, 16), dtype=np.uint8)
    cw_value = np.empty((n, count, d), dtype=dtype)
    cw_tl = np.empty((n, count), dtype=np.uint8)
    cw_tr = np.empty((n, count), dtype=np.uint8)

    one = dtype.type(1)
    for i in range(n):
        s0_l, v0_l, t0_l, s0_r, v0_r, t0_r = _expand(s0)
        s1_l, v1_l, t1_l, s1_r, v1_r, t1_r = _expand(s1)
        abit = ((alpha_arr >> np.uint64(n - 1 - i)) & np.uint64(1)).astype(np.uint8)
        keep_l = abit == 0  # alpha bit 0: keep left, lose right

        def pick(when_l, when_r, cond=keep_l):
            return np.where(cond[..., None] if when_l.ndim > 1 else cond,
                            when_l, when_r)

        s0_lose = pick(s0_r, s0_l)
        s1_lose = pick(s1_r, s1_l)
        v0_lose = _convert(np.ascontiguousarray(pick(v0_r, v0_l)), d, dtype)
        v1_lose = _convert(np.ascontiguousarray(pick(v1_r, v1_l)), d, dtype)
        v0_keep = _convert(np.ascontiguousarray(pick(v0_l, v0_r)), d, dtype)
        v1_keep = _convert(np.ascontiguousarray(pick(v1_l, v1_r)), d, dtype)

        # sign = (-1)^{t1} as a ring element
        sign = np.where(t1 == 1, dtype.type(-1 & ((1 << out_ell) - 1)), one)[:, None]
        v_cw = sign * (v1_lose - v0_lose - v_alpha)
        # losing left means the evaluation branched below alpha: add beta
        v_cw = v_cw + np.where(keep_l[:, None], np.zeros_like(beta_arr), sign * beta_arr)
        v_alpha = v_alpha - v1_keep + v0_keep + sign * v_cw

        s_cw = s0_lose ^ s1_lose
        tl_cw = t0_l ^ t1_l ^ abit ^ 1
        tr_cw = t0_r ^ t1_r ^ abit

        cw_seed[i] = s_cw
        cw_value[i] = v_cw
        cw_tl[i] = tl_cw
        cw_tr[i] = tr_cw

        s0_keep = pick(s0_l, s0_r)
        s1_keep = pick(s1_l, s1_r)
        t0_keep = pick(t0_l, t0_r)
        t1_keep = pick(t1_l, t1_r)
        tcw_keep = np.where(keep_l, tl_cw, tr_cw)
        s0 = s0_keep ^ (t0[:, None] * s_cw)
        s1 = s1_keep ^ (t1[:, None] * s_cw)
        t0 = t0_keep ^ (t0 * tcw_keep)
        t1 = t1_keep ^ (t1 * tcw_keep)

    sign = np.where(t1 == 1, dtype.type(-1 & ((1 << out_ell) - 1)), one)[:, None]
    cw_final = sign * (_convert(s1, d, dtype) - _convert(s0, d, dtype) - v_alpha)

    k0 = DcfKey(0, n, out_ell, lam, key_seed0, cw_seed, cw_value, cw_tl, cw_tr, cw_final)
    k1 = DcfKey(1, n, out_ell, lam, key_seed1, cw_seed.copy(), cw_value.copy(),
                cw_tl.copy(), cw_tr.copy(), cw_final.copy())
    return k0, k1


def dcf_eval(party: int, key: DcfKey, x) -> np.ndarray:
    """Evaluate stacked instances at public points.

    x may be a scalar (applied to every instance), a (count,) vector (one
    point per instance), or a (count, P) grid. Returns ring-element shares
    shaped (count, d), squeezing to (count,) for scalar payloads, or
    (count, P, d) / (count, P) for grids.
    """
    if party != key.party:
        raise ValueError(f"party {party} evaluating a key issued to {key.party}")
    dtype = _UNSIGNED[key.out_ell]
    d = key.payload_dim
    count = key.count

    xs = np.asarray(x, dtype=np.uint64)
    grid = xs.ndim == 2
    if xs.ndim == 0:
        xs = np.full(count, xs, dtype=np.uint64)
    if key.n < 64 and np.any(xs >> np.uint64(key.n)):
        raise ValueError(f"input outside the {key.n}-bit domain")
    if xs.shape[0] != count:
        raise ValueError(f"x rows {xs.shape[0]} do not match key count {count}")

    if grid:
        points = xs.shape[1]
        flat_x = np.ascontiguousarray(xs).reshape(-1)
        idx = np.repeat(np.arange(count), points)
    else:
        flat_x = xs
        idx = np.arange(count)

    s = np.ascontiguousarray(key.seed[idx])
    t = np.full(flat_x.shape[0], party, dtype=np.uint8)
    v = np.zeros((flat_x.shape[0], d), dtype=dtype)
    neg = dtype.type(-1 & ((1 << key.out_ell) - 1))
    sign = dtype.type(1) if party == 0 else neg

    for i in range(key.n):
        s_cw = key.cw_seed[i][idx]
        v_cw = key.cw_value[i][idx]
        tl_cw = key.cw_tl[i][idx]
        tr_cw = key.cw_tr[i][idx]
        s_l, v_l, t_l, s_r, v_r, t_r = _expand(s)
        xbit = ((flat_x >> np.uint64(key.n - 1 - i)) & np.uint64(1)).astype(np.uint8)
        go_l = xbit == 0
        v_here = _convert(np.ascontiguousarray(np.where(go_l[:, None], v_l, v_r)), d, dtype)
        v = v + sign * (v_here + t[:, None].astype(dtype) * v_cw)
        s_next = np.where(go_l[:, None], s_l, s_r) ^ (t[:, None] * s_cw)
        t_next = np.where(go_l, t_l, t_r) ^ (t * np.where(go_l, tl_cw, tr_cw))
        s, t = np.ascontiguousarray(s_next), t_next

    v = v + sign * (_convert(s, d, dtype) + t[:, None].astype(dtype) * key.cw_final)

    if grid:
        v = v.reshape(count, points, d)
        return v[..., 0] if d == 1 else v
    return v[:, 0] if d == 1 else v


def dcf_eval_full(party: int, key: DcfKey) -> np.ndarray:
    """Evaluate every point of the 2^n domain by breadth-first expansion.

    Returns (count, 2^n) for scalar payloads, (count, 2^n, d) otherwise.
    Exhaustive verification helper; cost is O(count * 2^n) expansions total
    instead of O(count * n * 2^n) for point-wise evaluation.
    """
    if party != key.party:
        raise ValueError(f"party {party} evaluating a key issued to {key.party}")
    dtype = _UNSIGNED[key.out_ell]
    d = key.payload_dim
    count = key.count
    neg = dtype.type(-1 & ((1 << key.out_ell) - 1))
    sign = dtype.type(1) if party == 0 else neg

    s = key.seed[:, None, :].copy()               # (count, width, 16)
    t = np.full((count, 1), party, dtype=np.uint8)
    v = np.zeros((count, 1, d), dtype=dtype)

    for i in range(key.n):
        width = s.shape[1]
        flat = np.ascontiguousarray(s.reshape(count * width, 16))
        s_l, v_l, t_l, s_r, v_r, t_r = _expand(flat)
        cv_l = _convert(v_l, d, dtype).reshape(count, width, d)
        cv_r = _convert(v_r, d, dtype).reshape(count, width, d)
        s_l = s_l.reshape(count, width, 16)
        s_r = s_r.reshape(count, width, 16)
        t_l = t_l.reshape(count, width)
        t_r = t_r.reshape(count, width)

        s_cw = key.cw_seed[i][:, None, :]
        v_cw = key.cw_value[i][:, None, :]
        tl_cw = key.cw_tl[i][:, None]
        tr_cw = key.cw_tr[i][:, None]

        tmask = t[:, :, None]
        v_next_l = v + sign * (cv_l + tmask.astype(dtype) * v_cw)
        v_next_r = v + sign * (cv_r + tmask.astype(dtype) * v_cw)
        s_next_l = s_l ^ (tmask * s_cw)
        s_next_r = s_r ^ (tmask * s_cw)
        t_next_l = t_l ^ (t * tl_cw)
        t_next_r = t_r ^ (t * tr_cw)

        # interleave children so index order matches the numeric order of x
        s = np.stack([s_next_l, s_next_r], axis=2).reshape(count, 2 * width, 16)
        t = np.stack([t_next_l, t_next_r], axis=2).reshape(count, 2 * width)
        v = np.stack([v_next_l, v_next_r], axis=2).reshape(count, 2 * width, d)

    width = s.shape[1]
    final = _convert(np.ascontiguousarray(s.reshape(count * width, 16)), d, dtype)
    final = final.reshape(count, width, d)
    v = v + sign * (final + t[:, :, None].astype(dtype) * key.cw_final[:, None, :])
    return v[..., 0] if d == 1 else v
