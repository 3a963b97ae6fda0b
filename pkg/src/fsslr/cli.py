"""Operator entry point.

Subcommands: simulate (dealer plus both parties in-process), dealer (write
per-party bundle files), party (one TCP role), sigmoid-bench (approximation
error/time CSV), comm-bench (online byte/round scaling CSV), make-data
(materialize benchmark CSVs). Exit codes: 0 ok, 1 protocol/runtime error,
2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import struct
import sys
import time

import numpy as np


def _add_train_flags(p: argparse.ArgumentParser, need_dataset: bool = True):
    if need_dataset:
        p.add_argument("--dataset", required=True, help="CSV path (numeric, with header)")
        p.add_argument("--label", default="label", help="label column name or index")
    p.add_argument("--protocol", default="fss-v1",
                   choices=["plain", "plain-fixed", "ss", "fss-v1", "fss-v2"])
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--eps", type=float, default=4.0)
    p.add_argument("--inv-slope", type=int, default=4)
    p.add_argument("--ell", type=int, default=64, choices=[32, 64])
    p.add_argument("--f", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bias", action="store_true",
                   help="append a constant-one feature (bias folded into w)")
    p.add_argument("--holdout", type=float, default=0.0,
                   help="tail fraction held out for evaluation (default: none)")


def _config_from(args) -> "TrainConfig":
    from .trainer import TrainConfig

    return TrainConfig(
        protocol=args.protocol, batch=args.batch, lr=args.lr, epochs=args.epochs,
        eps=args.eps, inv_slope=args.inv_slope, ell=args.ell, f=args.f,
        seed=args.seed, bias=args.bias, holdout=args.holdout)


def _emit(text: str, output: str | None):
    if output:
        with open(output, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        print(text)


def cmd_simulate(args) -> int:
    from .trainer import load_csv, train

    ds = load_csv(args.dataset, args.label)
    report = train(ds, _config_from(args))
    _emit(report.to_json(), args.output)
    return 0


def cmd_make_data(args) -> int:
    from . import datasets

    made = datasets.make_all(args.outdir)
    if args.synthetic:
        for spec in args.synthetic:
            rows, cols = (int(v) for v in spec.lower().split("x"))
            path = f"{args.outdir}/synthetic_{rows}x{cols}.csv"
            made[f"synthetic_{rows}x{cols}"] = datasets.write_synthetic(
                path, rows, cols, args.seed)
    print(json.dumps(made, indent=2, sort_keys=True))
    return 0


def cmd_sigmoid_bench(args) -> int:
    from .ring import FixedPointConfig
    from .sigmoid import error_table

    rows = error_table(FixedPointConfig(args.ell, args.f))
    lines = ["variant,plaintext_error,fixed_error,fixed_eval_seconds"]
    for name, real_err, fixed_err, dt in rows:
        lines.append(f"{name},{real_err:.6f},{fixed_err:.6f},{dt:.4f}")
    _emit("\n".join(lines), args.output)
    return 0


def cmd_comm_bench(args) -> int:
    from .datasets import synthetic_arrays
    from .trainer import Dataset, TrainConfig, train

    sizes = []
    for spec in args.sizes.split(","):
        rows, cols = (int(v) for v in spec.lower().split("x"))
        sizes.append((rows, cols))
    protocols = args.protocols.split(",")

    lines = ["n,d,protocol,online_s,total_s,bytes,rounds,opened_elements_per_party"]
    for rows, cols in sizes:
        features, labels = synthetic_arrays(rows, cols, args.seed)
        features = (features - features.min(axis=0)) / np.ptp(features, axis=0)
        ds = Dataset(f"synthetic_{rows}x{cols}", features, labels)
        for protocol in protocols:
            cfg = TrainConfig(protocol=protocol, batch=args.batch, lr=args.lr,
                              epochs=args.epochs, eps=args.eps, ell=args.ell,
                              f=args.f, seed=args.seed)
            report = train(ds, cfg)
            lines.append(
                f"{rows},{cols},{protocol},{report.online_seconds:.4f},"
                f"{report.total_seconds:.4f},{report.comm['total_bytes']},"
                f"{report.comm['rounds']},{report.comm['party0']['opened_elements']}")
    _emit("\n".join(lines), args.output)
    return 0


def _write_dealer_file(path: str, party: int, manifest: dict, items: list):
    from .transport import Tag

    with open(path, "wb") as fh:
        body = json.dumps(manifest, sort_keys=True).encode()
        fh.write(struct.pack("<IB", len(body), int(Tag.CONTROL)) + body)
        for (epoch, batch), blob in items:
            head = json.dumps({"epoch": epoch, "batch": batch,
                               "protocol": manifest["protocol"]}).encode()
            frame = head + b"\0" + blob
            fh.write(struct.pack("<IB", len(frame), int(Tag.BUNDLE)) + frame)


def cmd_dealer(args) -> int:
    from .dealer import BundleStore, bundle_to_bytes, triples_to_bytes
    from .prg import PrgSeed, derive_seed
    from .trainer import load_csv

    ds = load_csv(args.dataset, args.label)
    cfg = _config_from(args)
    if cfg.protocol not in ("ss", "fss-v1", "fss-v2"):
        print("dealer produces material for secure protocols only", file=sys.stderr)
        return 2
    train_x, _, _, _ = cfg.split(ds)
    n_batches = train_x.shape[0] // cfg.batch
    if n_batches == 0:
        print(f"batch {cfg.batch} exceeds dataset size {train_x.shape[0]}", file=sys.stderr)
        return 2
    dim = train_x.shape[1]
    master = derive_seed(PrgSeed.from_int(cfg.seed), "dealer", ds.name)
    store = BundleStore(master, cfg.protocol, cfg.batch, dim, cfg.cfg,
                        cfg.eps, cfg.inv_slope)
    manifest = {
        "protocol": cfg.protocol, "m": cfg.batch, "n": dim,
        "epochs": cfg.epochs, "batches_per_epoch": n_batches,
        "ell": cfg.ell, "f": cfg.f, "eps": cfg.eps, "seed": cfg.seed,
        "dataset": ds.name,
        "w_seed": derive_seed(master, "w").seed.hex(),
    }
    to_bytes = triples_to_bytes if cfg.protocol == "ss" else bundle_to_bytes
    import os
    os.makedirs(args.outdir, exist_ok=True)
    paths = []
    for party in (0, 1):
        items = []
        for epoch in range(cfg.epochs):
            for b in range(n_batches):
                items.append(((epoch, b), to_bytes(store.take(epoch, b, party))))
        path = os.path.join(args.outdir, f"party{party}.bundles")
        _write_dealer_file(path, party, manifest, items)
        paths.append(path)
    print(json.dumps({"party0": paths[0], "party1": paths[1],
                      "manifest": manifest}, indent=2, sort_keys=True))
    return 0


def cmd_party(args) -> int:
    from .dealer import BundleStore
    from .prg import PrgSeed, derive_seed
    from .trainer import BundleFile, load_csv, party_run
    from .transport import TcpChannel

    ds = load_csv(args.dataset, args.label)
    cfg = _config_from(args)
    if cfg.protocol in ("plain", "plain-fixed"):
        print("party mode needs a secure protocol", file=sys.stderr)
        return 2

    dim = cfg.split(ds)[0].shape[1]
    if args.bundles:
        source = BundleFile(args.bundles)
    else:
        # harness shortcut: derive the dealer stream locally from the seed
        master = derive_seed(PrgSeed.from_int(cfg.seed), "dealer", ds.name)
        source = BundleStore(master, cfg.protocol, cfg.batch, dim, cfg.cfg,
                             cfg.eps, cfg.inv_slope)

    host, port = args.listen or args.connect
    t0 = time.perf_counter()
    if args.listen:
        channel = TcpChannel.listen(host, port, args.role)
    else:
        channel = TcpChannel.connect(host, port, args.role)
    try:
        w_sh, stats, epochs_run, online = party_run(args.role, channel, ds, cfg, source)
        from .transport import Tag
        from .ring import RingMatrix, decode
        peer = channel.exchange(Tag.RESULT, w_sh.payload.to_bytes(), count_round=False)
        w = decode(w_sh.payload + RingMatrix.from_bytes(peer, 1, dim, cfg.cfg))[0]
        from .trainer import auc as auc_fn
        _, _, eval_x, eval_y = cfg.split(ds)
        result = {
            "role": args.role,
            "protocol": cfg.protocol,
            "dataset": ds.name,
            "weights": [float(v) for v in w],
            "auc": auc_fn(eval_x @ w, eval_y),
            "epochs_run": epochs_run,
            "comm": stats.as_dict(),
            "online_seconds": online,
            "total_seconds": time.perf_counter() - t0,
        }
        _emit(json.dumps(result, sort_keys=True), args.output)
    finally:
        channel.close()
    return 0


def _hostport(value: str) -> tuple:
    host, _, port = value.rpartition(":")
    return host or "127.0.0.1", int(port)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fsslr",
        description="Two-party secure logistic regression benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="dealer + both parties in one process")
    _add_train_flags(p)
    p.add_argument("--output", help="write the report JSON here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("dealer", help="write per-party bundle files")
    _add_train_flags(p)
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_dealer)

    p = sub.add_parser("party", help="run one TCP party")
    _add_train_flags(p)
    p.add_argument("--role", type=int, required=True, choices=[0, 1])
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--listen", type=_hostport, metavar="HOST:PORT")
    group.add_argument("--connect", type=_hostport, metavar="HOST:PORT")
    p.add_argument("--bundles", help="dealer-written bundle file for this role")
    p.add_argument("--output")
    p.set_defaults(func=cmd_party)

    p = sub.add_parser("sigmoid-bench", help="approximation error/time CSV")
    p.add_argument("--ell", type=int, default=64, choices=[32, 64])
    p.add_argument("--f", type=int, default=16)
    p.add_argument("--output")
    p.set_defaults(func=cmd_sigmoid_bench)

    p = sub.add_parser("comm-bench", help="online communication scaling CSV")
    p.add_argument("--sizes", default="1000x100", help="comma list like 1000x100,10000x100")
    p.add_argument("--protocols", default="ss,fss-v1")
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--eps", type=float, default=4.0)
    p.add_argument("--ell", type=int, default=64, choices=[32, 64])
    p.add_argument("--f", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output")
    p.set_defaults(func=cmd_comm_bench)

    p = sub.add_parser("make-data", help="materialize benchmark CSVs")
    p.add_argument("--outdir", default="data")
    p.add_argument("--synthetic", nargs="*", metavar="ROWSxCOLS")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_make_data)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
