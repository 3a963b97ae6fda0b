"""The trusted third party of the offline phase.

Samples the per-batch masks (r1, r2, r3), computes every piece of correlated
randomness the online gates consume (c1..c5 including the full c2 tensor,
segment keys with their payload vectors, Beaver triples for the baseline),
and splits everything into per-party bundles. All output is a deterministic
function of (seed, shapes): re-running the dealer reproduces bundles
bitwise.
"""

from __future__ import annotations

import json
import struct
import threading
from dataclasses import dataclass, field

import numpy as np

from .fss.icbatch import IcBatchKey, ic_gen_batch
from .fss.mic import segment_intervals
from .prg import PrgSeed, PrgStream, derive_seed
from .ring import DimensionError, FixedPointConfig, RingMatrix, DEFAULT_CONFIG
from .sharing import ShareMatrix, share


class BundleReuseError(RuntimeError):
    """A per-batch bundle or triple set was consumed twice."""


# -- element counting (published formulas) -----------------------------------

def v1_offline_elements(m: int, n: int) -> int:
    """Per-party correlated elements of a Taylor-gate bundle: mn+n^2+4n+3m.

    Matches the published count, which tallies r1 (mn), c5 (n^2), the four
    1xn vectors r2/w/c3/c4 (4n), and r3/c1 plus the cross-term object in its
    contracted 1xm form (3m). The materialized cross-term tensor is reported
    separately by c2_tensor_elements().
    """
    return m * n + n * n + 4 * n + 3 * m


def c2_tensor_elements(m: int, n: int) -> int:
    """Storage cost of the materialized n x m x n cross-term tensor."""
    return n * m * n


def ss_offline_elements(m: int, n: int) -> int:
    """Per-party Beaver elements per batch: 2mn+2n+2m (two full triples).

    The shipped triples reuse the x-side mask for the backward product, so
    the count a wire tap would see is mn+2n+2m; this function reports the
    published two-full-triples figure used for comparisons.
    """
    return 2 * m * n + 2 * n + 2 * m


def online_opened_elements(protocol: str, m: int, n: int) -> int:
    """Ring elements each party opens per batch."""
    if protocol in ("ss", "fss-v1"):
        return m * n + n + m
    if protocol == "fss-v2":
        return m * n + n + 2 * m
    raise ValueError(f"unknown protocol {protocol!r}")


def online_rounds(protocol: str) -> int:
    return {"ss": 2, "fss-v1": 1, "fss-v2": 2}[protocol]


# -- bundles ------------------------------------------------------------------

@dataclass
class LrKeyBundle:
    """One party's per-batch key material k_b for the FSS gates.

    Reconstructions satisfy c1 = r2 r1^T, c2[k,j,i] = r2[k] r1[j,i],
    c3 = r2 r1^T r1, c4 = r3^T r1, c5 = r1^T r1. The segment keys and the
    forward mask r_mic exist on segmented-gate (v2) bundles only.
    """

    party: int
    m: int
    n: int
    cfg: FixedPointConfig
    kind: str                       # "v1" or "v2"
    w: ShareMatrix                  # initial weights, shares of encode(0)
    r1: ShareMatrix                 # m x n input mask share
    r2: ShareMatrix                 # 1 x n weight mask share
    r3: ShareMatrix                 # m x 1 label mask share
    c1: ShareMatrix                 # 1 x m
    c2: np.ndarray                  # (n, m, n) tensor share, ring words
    c3: ShareMatrix                 # 1 x n
    c4: ShareMatrix                 # 1 x n
    c5: ShareMatrix                 # n x n
    eps: float | None = None
    inv_slope: int | None = None
    r_mic: ShareMatrix | None = None          # 1 x m forward mask share (v2)
    seg_keys: list | None = None              # three IcBatchKey (v2)
    used: bool = field(default=False, compare=False)

    def consume(self):
        if self.used:
            raise BundleReuseError("bundle already consumed; masks must be fresh")
        self.used = True

    def correlated_element_count(self) -> int:
        """Bundle elements counted by the published formula (c2 as 1xm)."""
        return v1_offline_elements(self.m, self.n) + (self.m if self.kind == "v2" else 0)

    def key_bytes(self) -> int:
        return sum(k.nbytes() for k in self.seg_keys) if self.seg_keys else 0

    def contract_c2(self, x_prime: RingMatrix) -> ShareMatrix:
        return contract_c2(self.c2, x_prime, self.party, self.cfg)


def contract_c2(c2_share: np.ndarray, x_prime: RingMatrix, party: int,
                cfg: FixedPointConfig = DEFAULT_CONFIG) -> ShareMatrix:
    """Contract the cross-term tensor share against the public opened input.

    Position i of the output is the share of sum_{j,k} x'[j,k] r2[k] r1[j,i];
    the two parties' outputs reconstruct to r2 (x')^T r1.
    """
    n, m, n2 = c2_share.shape
    if n != n2 or x_prime.shape != (m, n):
        raise DimensionError(
            f"tensor {c2_share.shape} incompatible with x' {x_prime.shape}")
    out = np.einsum("jk,kji->i", x_prime.data, c2_share)
    return ShareMatrix(party, RingMatrix(out.reshape(1, n), cfg))


def _split(value: RingMatrix, rng: PrgStream) -> tuple:
    s0 = rng.matrix(value.rows, value.cols, value.cfg)
    return ShareMatrix(0, s0), ShareMatrix(1, value - s0)


def gen_v1_bundle(m: int, n: int, seed: PrgSeed,
                  cfg: FixedPointConfig = DEFAULT_CONFIG) -> tuple:
    """Masks, correlated randomness, and initial weight shares for one batch."""
    if m < 1 or n < 1:
        raise ValueError("need m, n >= 1")
    rng = PrgStream(seed)

    r1 = rng.matrix(m, n, cfg)
    r2 = rng.matrix(1, n, cfg)
    r3 = rng.matrix(m, 1, cfg)

    c1 = r2 @ r1.T                                  # 1 x m
    c2 = np.einsum("k,ji->kji", r2.data[0], r1.data)  # (n, m, n)
    c3 = (r2 @ r1.T) @ r1                           # 1 x n
    c4 = r3.T @ r1                                  # 1 x n
    c5 = r1.T @ r1                                  # n x n

    # initial weights reconstruct to encode(0); shares cancel
    w0 = rng.matrix(1, n, cfg)
    w_shares = (ShareMatrix(0, w0), ShareMatrix(1, -w0))

    r1s = _split(r1, rng)
    r2s = _split(r2, rng)
    r3s = _split(r3, rng)
    c1s = _split(c1, rng)
    c2_0 = rng.words(n * m * n, cfg).reshape(n, m, n)
    c2s = (c2_0, c2 - c2_0)
    c3s = _split(c3, rng)
    c4s = _split(c4, rng)
    c5s = _split(c5, rng)

    bundles = tuple(
        LrKeyBundle(
            party=b, m=m, n=n, cfg=cfg, kind="v1",
            w=w_shares[b], r1=r1s[b], r2=r2s[b], r3=r3s[b],
            c1=c1s[b], c2=c2s[b], c3=c3s[b], c4=c4s[b], c5=c5s[b],
        )
        for b in (0, 1)
    )
    return bundles


def gen_v2_bundle(m: int, n: int, eps: float, seed: PrgSeed,
                  cfg: FixedPointConfig = DEFAULT_CONFIG,
                  inv_slope: int = 4) -> tuple:
    """V1 bundle plus per-element segment keys and the forward mask.

    The three segment intervals encode (-inf,-eps), [-eps,eps), [eps,inf)
    around the threshold at scale 2^(2f): the gate opens the forward value
    untruncated, so the comparison input is exact. The outer segment keys
    carry payload vectors (1, r_mic[i], r1[i,:], r_mic[i]*r1[i,:]) consumed
    by the gate's indicator-weighted correction terms.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    eps_enc = int(round(eps * (1 << (2 * cfg.f))))
    if not 0 < eps_enc < cfg.half:
        raise ValueError(f"eps={eps} not representable at scale 2^(2f)")

    b0, b1 = gen_v1_bundle(m, n, seed, cfg)
    rng = PrgStream(derive_seed(seed, "v2"))

    r_mic = rng.matrix(1, m, cfg)
    r_mic_s = _split(r_mic, rng)

    r1_full = (b0.r1.payload + b1.r1.payload).data       # dealer-known masks
    r_vec = r_mic.data[0]                                # (m,)
    intervals = segment_intervals(eps_enc, cfg.ell)

    ones = np.ones((m, 1), dtype=cfg.dtype)
    outer_payload = np.concatenate(
        [ones, r_vec[:, None], r1_full, r_vec[:, None] * r1_full], axis=1)

    seg0 = ic_gen_batch(cfg.ell, int(intervals[0, 0]), int(intervals[0, 1]),
                        r_vec, rng, payloads=outer_payload, out_ell=cfg.ell)
    seg1 = ic_gen_batch(cfg.ell, int(intervals[1, 0]), int(intervals[1, 1]),
                        r_vec, rng, out_ell=cfg.ell)
    seg2 = ic_gen_batch(cfg.ell, int(intervals[2, 0]), int(intervals[2, 1]),
                        r_vec, rng, payloads=outer_payload, out_ell=cfg.ell)

    for b, bundle in enumerate((b0, b1)):
        bundle.kind = "v2"
        bundle.eps = eps
        bundle.inv_slope = inv_slope
        bundle.r_mic = r_mic_s[b]
        bundle.seg_keys = [seg0[b], seg1[b], seg2[b]]
    return b0, b1


@dataclass
class BeaverTriples:
    """One party's triples for one baseline batch: forward product
    (1xn)(nxm) and backward product (1xm)(mxn) with the x-side mask reused
    (b2 = b1^T), so the second opening costs only m elements."""

    party: int
    m: int
    n: int
    cfg: FixedPointConfig
    a1: ShareMatrix   # 1 x n
    b1: ShareMatrix   # n x m
    c1: ShareMatrix   # 1 x m
    a2: ShareMatrix   # 1 x m
    b2: ShareMatrix   # m x n (= b1 transposed)
    c2: ShareMatrix   # 1 x n
    used: bool = field(default=False, compare=False)

    def consume(self):
        if self.used:
            raise BundleReuseError("triples already consumed; masks must be fresh")
        self.used = True


def gen_beaver(m: int, n: int, seed: PrgSeed,
               cfg: FixedPointConfig = DEFAULT_CONFIG) -> tuple:
    """Per-party triples shaped for the baseline's two matrix products."""
    rng = PrgStream(seed)
    a1 = rng.matrix(1, n, cfg)
    b1 = rng.matrix(n, m, cfg)
    c1 = a1 @ b1
    a2 = rng.matrix(1, m, cfg)
    b2 = b1.T
    c2 = a2 @ b2

    a1s, b1s, c1s = _split(a1, rng), _split(b1, rng), _split(c1, rng)
    a2s, c2s = _split(a2, rng), _split(c2, rng)
    b2s = (b1s[0].T, b1s[1].T)
    return tuple(
        BeaverTriples(b, m, n, cfg, a1s[b], b1s[b], c1s[b], a2s[b], b2s[b], c2s[b])
        for b in (0, 1)
    )


class BundleStore:
    """Lazy, deterministic per-(epoch, batch) dealer output.

    Conceptually the dealer pre-generates one bundle per mini-batch ahead of
    the online phase; materialization is lazy (derived from the master seed)
    purely to bound memory on large runs. The small cache holds the pair for
    the current lockstep step so both party threads see one generation.
    """

    def __init__(self, master: PrgSeed, protocol: str, m: int, n: int,
                 cfg: FixedPointConfig = DEFAULT_CONFIG,
                 eps: float = 4.0, inv_slope: int = 4):
        if protocol not in ("ss", "fss-v1", "fss-v2"):
            raise ValueError(f"no dealer material for protocol {protocol!r}")
        self.master = master
        self.protocol = protocol
        self.m, self.n, self.cfg = m, n, cfg
        self.eps, self.inv_slope = eps, inv_slope
        self._lock = threading.Lock()
        self._cache: dict = {}

    def _generate(self, epoch: int, batch: int):
        seed = derive_seed(self.master, "batch", epoch, batch)
        if self.protocol == "ss":
            return gen_beaver(self.m, self.n, seed, self.cfg)
        if self.protocol == "fss-v1":
            return gen_v1_bundle(self.m, self.n, seed, self.cfg)
        return gen_v2_bundle(self.m, self.n, self.eps, seed, self.cfg, self.inv_slope)

    def take(self, epoch: int, batch: int, party: int):
        """This party's half for (epoch, batch); generated once per pair."""
        key = (epoch, batch)
        with self._lock:
            if key not in self._cache:
                if len(self._cache) > 2:  # parties run in lockstep
                    self._cache.pop(next(iter(self._cache)))
                self._cache[key] = [self._generate(epoch, batch), [False, False]]
            pair, taken = self._cache[key]
            item = pair[party]
            taken[party] = True
            if all(taken):
                del self._cache[key]
        return item

    def initial_w(self, party: int) -> ShareMatrix:
        """Initial weight share, read from the first batch's bundle."""
        if self.protocol == "ss":
            seed = derive_seed(self.master, "w")
            w0 = PrgStream(seed).matrix(1, self.n, self.cfg)
            return ShareMatrix(0, w0) if party == 0 else ShareMatrix(1, -w0)
        seed = derive_seed(self.master, "batch", 0, 0)
        if self.protocol == "fss-v1":
            return gen_v1_bundle(self.m, self.n, seed, self.cfg)[party].w
        return gen_v2_bundle(self.m, self.n, self.eps, seed, self.cfg,
                             self.inv_slope)[party].w


# -- bundle serialization ------------------------------------------------------

def _pack_entries(entries: list) -> bytes:
    """entries: [(name, ndarray bytes-able)] -> header json + raw blobs."""
    header = []
    blobs = []
    for name, arr in entries:
        arr = np.ascontiguousarray(arr)
        header.append([name, str(arr.dtype), list(arr.shape)])
        blobs.append(arr.tobytes())
    head = json.dumps(header, separators=(",", ":")).encode()
    return struct.pack("<I", len(head)) + head + b"".join(blobs)


def _unpack_entries(raw: bytes) -> dict:
    (hlen,) = struct.unpack("<I", raw[:4])
    header = json.loads(raw[4:4 + hlen].decode())
    out = {}
    off = 4 + hlen
    for name, dtype, shape in header:
        size = int(np.prod(shape)) * np.dtype(dtype).itemsize
        out[name] = np.frombuffer(raw[off:off + size], dtype=dtype).reshape(shape).copy()
        off += size
    return out


def bundle_to_bytes(b: LrKeyBundle) -> bytes:
    meta = {
        "party": b.party, "m": b.m, "n": b.n, "ell": b.cfg.ell, "f": b.cfg.f,
        "kind": b.kind, "eps": b.eps, "inv_slope": b.inv_slope,
    }
    entries = [("meta", np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8))]
    for name in ("w", "r1", "r2", "r3", "c1", "c3", "c4", "c5"):
        entries.append((name, getattr(b, name).payload.data))
    entries.append(("c2", b.c2))
    if b.kind == "v2":
        entries.append(("r_mic", b.r_mic.payload.data))
        for j, key in enumerate(b.seg_keys):
            entries.append((f"seg{j}_low", np.frombuffer(key.dcf_low.to_bytes(), dtype=np.uint8)))
            entries.append((f"seg{j}_high", np.frombuffer(key.dcf_high.to_bytes(), dtype=np.uint8)))
            entries.append((f"seg{j}_corr", key.corr))
            entries.append((f"seg{j}_pq", np.array([key.p, key.q], dtype=np.uint64)))
    return _pack_entries(entries)


def bundle_from_bytes(raw: bytes) -> LrKeyBundle:
    from .fss.dcf import DcfKey

    got = _unpack_entries(raw)
    meta = json.loads(got["meta"].tobytes().decode())
    cfg = FixedPointConfig(meta["ell"], meta["f"])
    party = meta["party"]

    def sm(name, rows, cols):
        return ShareMatrix(party, RingMatrix(got[name].reshape(rows, cols), cfg))

    m, n = meta["m"], meta["n"]
    bundle = LrKeyBundle(
        party=party, m=m, n=n, cfg=cfg, kind=meta["kind"],
        w=sm("w", 1, n), r1=sm("r1", m, n), r2=sm("r2", 1, n), r3=sm("r3", m, 1),
        c1=sm("c1", 1, m), c2=got["c2"].astype(cfg.dtype),
        c3=sm("c3", 1, n), c4=sm("c4", 1, n), c5=sm("c5", n, n),
        eps=meta["eps"], inv_slope=meta["inv_slope"],
    )
    if meta["kind"] == "v2":
        bundle.r_mic = sm("r_mic", 1, m)
        keys = []
        for j in range(3):
            low = DcfKey.from_bytes(got[f"seg{j}_low"].tobytes())
            high = DcfKey.from_bytes(got[f"seg{j}_high"].tobytes())
            p, q = (int(v) for v in got[f"seg{j}_pq"])
            keys.append(IcBatchKey(party, cfg.ell, p, q, low, high,
                                   got[f"seg{j}_corr"].astype(cfg.dtype)))
        bundle.seg_keys = keys
    return bundle


def triples_to_bytes(t: BeaverTriples) -> bytes:
    meta = {"party": t.party, "m": t.m, "n": t.n, "ell": t.cfg.ell, "f": t.cfg.f}
    entries = [("meta", np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8))]
    for name in ("a1", "b1", "c1", "a2", "c2"):
        entries.append((name, getattr(t, name).payload.data))
    return _pack_entries(entries)


def triples_from_bytes(raw: bytes) -> BeaverTriples:
    got = _unpack_entries(raw)
    meta = json.loads(got["meta"].tobytes().decode())
    cfg = FixedPointConfig(meta["ell"], meta["f"])
    party, m, n = meta["party"], meta["m"], meta["n"]

    def sm(name, rows, cols):
        return ShareMatrix(party, RingMatrix(got[name].reshape(rows, cols), cfg))

    b1 = sm("b1", n, m)
    return BeaverTriples(party, m, n, cfg, sm("a1", 1, n), b1, sm("c1", 1, m),
                         sm("a2", 1, m), b1.T, sm("c2", 1, n))
