import threading

import numpy as np
import pytest

from fsslr import datasets
from fsslr.prg import PrgSeed, derive_seed
from fsslr.ring import FixedPointConfig, decode, encode
from fsslr.sharing import reconstruct, share
from fsslr.transport import inprocess_pair


@pytest.fixture(scope="session")
def data_dir(tmp_path_factory):
    """Benchmark CSVs materialized once per session."""
    out = tmp_path_factory.mktemp("data")
    paths = datasets.make_all(str(out))
    return paths


def run_two_party(fn0, fn1):
    """Run two callables(channel) in lockstep threads; re-raise failures."""
    ch0, ch1 = inprocess_pair()
    out = [None, None]
    err = [None, None]

    def wrap(i, fn, ch):
        try:
            out[i] = fn(ch)
        except Exception as exc:  # noqa: BLE001 - surfaced to the test below
            err[i] = exc

    threads = [threading.Thread(target=wrap, args=(0, fn0, ch0)),
               threading.Thread(target=wrap, args=(1, fn1, ch1))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for exc in err:
        if exc is not None:
            raise exc
    return out[0], out[1], ch0.stats, ch1.stats


def run_gate(gate, x, y, w, bundles, hyper, cfg=None):
    """Drive one gate for both parties on plaintext inputs; returns the
    reconstructed decoded gradient row plus both parties' CommStats."""
    cfg = cfg or FixedPointConfig()
    from fsslr.lrgate import BatchInput

    seed = PrgSeed.from_int(2**61 + 5)
    xs = share(encode(x, cfg), derive_seed(seed, "x"))
    ys = share(encode(np.asarray(y).reshape(-1, 1), cfg), derive_seed(seed, "y"))
    ws = share(encode(np.asarray(w).reshape(1, -1), cfg), derive_seed(seed, "w"))

    def party(b):
        def run(ch):
            return gate(BatchInput(xs[b], ys[b], ws[b], bundles[b], hyper), ch)
        return run

    g0, g1, s0, s1 = run_two_party(party(0), party(1))
    grad = decode(reconstruct(g0.dw, g1.dw))[0]
    return grad, s0, s1
