"""End-to-end training: ingestion, mini-batching, SGD over any gate, AUC.

Secure protocols run the two parties as lockstep threads (in-process
channels) or separate processes (TCP); the dealer material comes from a
BundleStore or pre-serialized bundle files. Weight updates stay in the
share domain; the model is reconstructed only for the convergence check at
epoch boundaries and at the end, over the non-round-counted result path.
"""

from __future__ import annotations

import csv
import json
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .dealer import BundleStore
from .lrgate import BatchInput, Hyper, eval_ss_baseline, eval_v1, eval_v2
from .prg import PrgSeed, derive_seed
from .ring import (FixedPointConfig, RingMatrix, decode, encode,
                   encode_scalar, truncate)
from .sharing import ShareMatrix, share
from .transport import Channel, CommStats, Tag, inprocess_pair

PROTOCOLS = ("plain", "plain-fixed", "ss", "fss-v1", "fss-v2")
_GATES = {"ss": eval_ss_baseline, "fss-v1": eval_v1, "fss-v2": eval_v2}


@dataclass
class Dataset:
    """Numeric features normalized per-column to [0,1], binary labels."""

    name: str
    features: np.ndarray   # (N, d) float64 in [0, 1]
    labels: np.ndarray     # (N,) float64 in {0, 1}
    normalization: list = field(default_factory=list)  # per-feature (min, max)

    @property
    def size(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass
class TrainConfig:
    protocol: str = "fss-v1"
    batch: int = 128
    lr: float = 0.5
    epochs: int = 1
    eps: float = 4.0
    inv_slope: int = 4
    ell: int = 64
    f: int = 16
    seed: int = 0
    auc_stop_delta: float = 1e-4
    bias: bool = False  # append a constant-one feature (bias folded into w)
    holdout: float = 0.0  # tail fraction held out for evaluation

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}; choose from {PROTOCOLS}")
        if self.batch < 1 or self.epochs < 1:
            raise ValueError("batch and epochs must be >= 1")
        if not 0.0 <= self.holdout < 1.0:
            raise ValueError("holdout must be in [0, 1)")

    @property
    def cfg(self) -> FixedPointConfig:
        return FixedPointConfig(self.ell, self.f)

    @property
    def hyper(self) -> Hyper:
        return Hyper(alpha=self.lr, eps=self.eps, inv_slope=self.inv_slope, cfg=self.cfg)

    def as_dict(self) -> dict:
        return {
            "protocol": self.protocol, "batch": self.batch, "lr": self.lr,
            "epochs": self.epochs, "eps": self.eps, "inv_slope": self.inv_slope,
            "ell": self.ell, "f": self.f, "seed": self.seed,
            "auc_stop_delta": self.auc_stop_delta, "bias": self.bias,
            "holdout": self.holdout,
        }

    def design_matrix(self, ds: "Dataset") -> np.ndarray:
        if not self.bias:
            return ds.features
        return np.hstack([ds.features, np.ones((ds.size, 1))])

    def split(self, ds: "Dataset") -> tuple:
        """(train X, train y, eval X, eval y); the eval set is the training
        set itself unless a holdout tail fraction is configured."""
        features = self.design_matrix(ds)
        if self.holdout == 0.0:
            return features, ds.labels, features, ds.labels
        n_eval = max(1, int(round(ds.size * self.holdout)))
        cut = ds.size - n_eval
        if cut < self.batch:
            raise ValueError("holdout leaves fewer rows than one batch")
        return (features[:cut], ds.labels[:cut],
                features[cut:], ds.labels[cut:])


@dataclass
class TrainReport:
    """Training outcome. Wall-clock fields are hardware noise and are
    excluded from canonical_bytes(), which is the determinism contract."""

    protocol: str
    dataset: str
    weights: list
    auc: float
    epochs_run: int
    comm: dict               # per-party CommStats plus totals
    online_seconds: float
    total_seconds: float
    config: dict

    def to_json(self, include_timings: bool = True) -> str:
        payload = {
            "protocol": self.protocol,
            "dataset": self.dataset,
            "weights": self.weights,
            "auc": self.auc,
            "epochs_run": self.epochs_run,
            "comm": self.comm,
            "config": self.config,
        }
        if include_timings:
            payload["online_seconds"] = self.online_seconds
            payload["total_seconds"] = self.total_seconds
        return json.dumps(payload, sort_keys=True)

    def canonical_bytes(self) -> bytes:
        return self.to_json(include_timings=False).encode()


# -- ingestion ------------------------------------------------------------------

def load_csv(path: str, label_column: str = "label") -> Dataset:
    """Numeric CSV with header; min-max normalizes features to [0,1].

    Raises on parse failures, non-binary labels, or missing label column.
    Row order is the file order (deterministic).
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    if label_column in header:
        label_idx = header.index(label_column)
    else:
        try:
            label_idx = int(label_column)
        except ValueError:
            raise ValueError(f"{path}: no column named {label_column!r}") from None
    try:
        data = np.array([[float(v) for v in row] for row in rows], dtype=np.float64)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric cell ({exc})") from None
    labels = data[:, label_idx]
    if not np.all(np.isin(labels, (0.0, 1.0))):
        bad = sorted(set(labels) - {0.0, 1.0})
        raise ValueError(f"{path}: labels must be 0/1, found {bad}")
    features = np.delete(data, label_idx, axis=1)
    normalization = []
    for j in range(features.shape[1]):
        lo, hi = float(features[:, j].min()), float(features[:, j].max())
        normalization.append((lo, hi))
        features[:, j] = 0.0 if hi == lo else (features[:, j] - lo) / (hi - lo)
    import os
    name = os.path.splitext(os.path.basename(path))[0]
    return Dataset(name, features, labels, normalization)


# -- evaluation -------------------------------------------------------------------

def auc(scores, labels) -> float:
    """Rank-based (Mann-Whitney) AUC with ties counted half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels == 1
    n1 = int(pos.sum())
    n0 = labels.shape[0] - n1
    if n1 == 0 or n0 == 0:
        raise ValueError("auc needs both classes present")
    order = np.argsort(scores, kind="mergesort")
    s_sorted = scores[order]
    ranks_sorted = np.empty(scores.shape[0], dtype=np.float64)
    i = 0
    while i < len(s_sorted):
        j = i
        while j < len(s_sorted) and s_sorted[j] == s_sorted[i]:
            j += 1
        ranks_sorted[i:j] = (i + 1 + j) / 2.0
        i = j
    ranks = np.empty_like(ranks_sorted)
    ranks[order] = ranks_sorted
    u = ranks[pos].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n0 * n1))


# -- plaintext loops ---------------------------------------------------------------

def _batches(n_rows: int, batch: int):
    for b in range(n_rows // batch):
        yield slice(b * batch, (b + 1) * batch)


def plain_fixed_step(x: np.ndarray, y: np.ndarray, w: RingMatrix,
                     hyper: Hyper) -> RingMatrix:
    """One Taylor SGD step on plaintext ring values, mirroring the one-round
    gate's arithmetic (degree-3 bracket at scale 2^(3f), shift, rate, shift)."""
    cfg = hyper.cfg
    m = x.shape[0]
    xe = encode(x, cfg)
    ye = encode(y.reshape(-1, 1), cfg)
    ones = RingMatrix.ones_row(m, cfg)
    coef1 = (hyper.inv_slope // 2) << (2 * cfg.f)
    ycoef = hyper.inv_slope << cfg.f
    bracket = (ones @ xe) * coef1 + (w @ xe.T) @ xe - (ye.T @ xe) * ycoef
    rate = encode_scalar(hyper.alpha / (hyper.inv_slope * m), cfg)
    dw = truncate(truncate(bracket, 2 * cfg.f) * rate, cfg.f)
    return w - dw


def _train_plain(ds: Dataset, cfg: TrainConfig) -> tuple:
    """Real-arithmetic SGD with the exact logistic."""
    train_x, train_y, eval_x, eval_y = cfg.split(ds)
    w = np.zeros(train_x.shape[1])
    last_auc = None
    epochs_run = 0
    for _ in range(cfg.epochs):
        for sl in _batches(train_x.shape[0], cfg.batch):
            x, y = train_x[sl], train_y[sl]
            u = x @ w
            grad = (cfg.lr / x.shape[0]) * ((1.0 / (1.0 + np.exp(-u)) - y) @ x)
            w = w - grad
        epochs_run += 1
        a = auc(eval_x @ w, eval_y)
        if last_auc is not None and abs(a - last_auc) < cfg.auc_stop_delta:
            break
        last_auc = a
    return w, epochs_run


def _train_plain_fixed(ds: Dataset, cfg: TrainConfig) -> tuple:
    """Fixed-point Taylor SGD without sharing: the quantization reference."""
    train_x, train_y, eval_x, eval_y = cfg.split(ds)
    w = RingMatrix.zeros(1, train_x.shape[1], cfg.cfg)
    last_auc = None
    epochs_run = 0
    for _ in range(cfg.epochs):
        for sl in _batches(train_x.shape[0], cfg.batch):
            w = plain_fixed_step(train_x[sl], train_y[sl], w, cfg.hyper)
        epochs_run += 1
        a = auc(eval_x @ decode(w)[0], eval_y)
        if last_auc is not None and abs(a - last_auc) < cfg.auc_stop_delta:
            break
        last_auc = a
    return decode(w)[0], epochs_run


# -- secure session -----------------------------------------------------------------

def share_dataset(ds: Dataset, cfg: TrainConfig, party: int) -> tuple:
    """This party's additive shares of the encoded training rows.

    Harness convention: both parties derive the split from the common run
    seed, standing in for data owners who distributed shares beforehand.
    """
    train_x, train_y, _, _ = cfg.split(ds)
    seed = derive_seed(PrgSeed.from_int(cfg.seed), "data", ds.name)
    xs = share(encode(train_x, cfg.cfg), derive_seed(seed, "x"))
    ys = share(encode(train_y.reshape(-1, 1), cfg.cfg), derive_seed(seed, "y"))
    return xs[party], ys[party]


class BundleFile:
    """Bundle source backed by a dealer-written file (see cli dealer)."""

    def __init__(self, path: str):
        from .dealer import bundle_from_bytes, triples_from_bytes
        self._items = {}
        self.manifest = None
        with open(path, "rb") as fh:
            raw = fh.read()
        off = 0
        import struct
        while off < len(raw):
            (length,) = struct.unpack("<I", raw[off:off + 4])
            tag = raw[off + 4]
            body = raw[off + 5:off + 5 + length]
            off += 5 + length
            if tag == int(Tag.CONTROL):
                self.manifest = json.loads(body.decode())
            elif tag == int(Tag.BUNDLE):
                head = json.loads(body[:body.index(b"\0")].decode())
                blob = body[body.index(b"\0") + 1:]
                item = (triples_from_bytes(blob) if head["protocol"] == "ss"
                        else bundle_from_bytes(blob))
                self._items[(head["epoch"], head["batch"])] = item
        if self.manifest is None:
            raise ValueError(f"{path}: missing manifest frame")

    def take(self, epoch: int, batch: int, party: int):
        try:
            return self._items[(epoch, batch)]
        except KeyError:
            raise RuntimeError(f"bundle for epoch {epoch} batch {batch} exhausted") from None

    def initial_w(self, party: int) -> ShareMatrix:
        item = self._items[(0, 0)]
        if hasattr(item, "w"):
            return item.w
        seed = PrgSeed(bytes.fromhex(self.manifest["w_seed"]))
        from .prg import PrgStream
        w0 = PrgStream(seed).matrix(1, self.manifest["n"], FixedPointConfig(
            self.manifest["ell"], self.manifest["f"]))
        return ShareMatrix(0, w0) if party == 0 else ShareMatrix(1, -w0)


def party_run(party: int, channel: Channel, ds: Dataset, cfg: TrainConfig,
              source) -> tuple:
    """One party's full training session over an established channel.

    Returns (final weight share, CommStats, epochs_run, online_seconds).
    source provides take(epoch, batch, party) and initial_w(party).
    """
    gate = _GATES[cfg.protocol]
    hyper = cfg.hyper
    train_x, _, eval_x, eval_y = cfg.split(ds)
    dim = train_x.shape[1]
    x_sh, y_sh = share_dataset(ds, cfg, party)
    w_sh = source.initial_w(party)
    ring_cfg = cfg.cfg
    n_batches = train_x.shape[0] // cfg.batch
    if n_batches == 0:
        raise ValueError(f"batch {cfg.batch} exceeds dataset size {train_x.shape[0]}")

    last_auc = None
    epochs_run = 0
    t0 = time.perf_counter()
    for epoch in range(cfg.epochs):
        for b in range(n_batches):
            sl = slice(b * cfg.batch, (b + 1) * cfg.batch)
            xb = ShareMatrix(party, RingMatrix(x_sh.payload.data[sl], ring_cfg))
            yb = ShareMatrix(party, RingMatrix(y_sh.payload.data[sl], ring_cfg))
            inp = BatchInput(xb, yb, w_sh, source.take(epoch, b, party), hyper)
            grad = gate(inp, channel)
            w_sh = ShareMatrix(party, w_sh.payload - grad.dw.payload)
        epochs_run += 1
        # convergence check over the result path (not a protocol round)
        peer = channel.exchange(Tag.RESULT, w_sh.payload.to_bytes(), count_round=False)
        w_plain = w_sh.payload + RingMatrix.from_bytes(peer, 1, dim, ring_cfg)
        w_real = decode(w_plain)[0]
        # closure: forward products must stay representable at scale 2^(2f)
        w_bound = float(1 << (ring_cfg.ell - 2 * ring_cfg.f - 2)) / dim
        if np.any(np.abs(w_real) >= w_bound):
            raise OverflowError("weights left the safe fixed-point range")
        a = auc(eval_x @ w_real, eval_y)
        if last_auc is not None and abs(a - last_auc) < cfg.auc_stop_delta:
            break
        last_auc = a
    online = time.perf_counter() - t0
    return w_sh, channel.stats, epochs_run, online


def train(ds: Dataset, cfg: TrainConfig) -> TrainReport:
    """Train on one dataset with the configured protocol.

    Secure protocols run dealer plus both parties in-process (the simulate
    path); use party_run directly for split TCP deployments.
    """
    t_start = time.perf_counter()
    train_x, _, eval_x, eval_y = cfg.split(ds)
    if train_x.shape[0] // cfg.batch == 0:
        raise ValueError(f"batch {cfg.batch} exceeds dataset size {train_x.shape[0]}")
    if cfg.protocol in ("plain", "plain-fixed"):
        runner = _train_plain if cfg.protocol == "plain" else _train_plain_fixed
        t0 = time.perf_counter()
        w, epochs_run = runner(ds, cfg)
        online = time.perf_counter() - t0
        report_auc = auc(eval_x @ np.asarray(w), eval_y)
        return TrainReport(
            protocol=cfg.protocol, dataset=ds.name,
            weights=[float(v) for v in np.asarray(w)],
            auc=report_auc, epochs_run=epochs_run,
            comm={"party0": CommStats().as_dict(), "party1": CommStats().as_dict(),
                  "total_bytes": 0, "rounds": 0},
            online_seconds=online, total_seconds=time.perf_counter() - t_start,
            config=cfg.as_dict(),
        )

    dim = train_x.shape[1]
    store = BundleStore(
        derive_seed(PrgSeed.from_int(cfg.seed), "dealer", ds.name),
        cfg.protocol, cfg.batch, dim, cfg.cfg, cfg.eps, cfg.inv_slope)
    ch0, ch1 = inprocess_pair()
    results = [None, None]
    errors = [None, None]

    def run(party, channel):
        try:
            results[party] = party_run(party, channel, ds, cfg, store)
        except Exception as exc:  # propagated after join
            errors[party] = exc

    threads = [threading.Thread(target=run, args=(b, ch)) for b, ch in ((0, ch0), (1, ch1))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for err in errors:
        if err is not None:
            raise err

    (w0, stats0, epochs_run, online0) = results[0]
    (w1, stats1, _, online1) = results[1]
    w_real = decode(w0.payload + w1.payload)[0]
    report_auc = auc(eval_x @ w_real, eval_y)
    return TrainReport(
        protocol=cfg.protocol, dataset=ds.name,
        weights=[float(v) for v in w_real],
        auc=report_auc, epochs_run=epochs_run,
        comm={"party0": stats0.as_dict(), "party1": stats1.as_dict(),
              "total_bytes": stats0.bytes_sent + stats1.bytes_sent,
              "rounds": stats0.rounds},
        online_seconds=max(online0, online1),
        total_seconds=time.perf_counter() - t_start,
        config=cfg.as_dict(),
    )
