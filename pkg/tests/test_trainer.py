import numpy as np
import pytest

from fsslr.dealer import gen_beaver, gen_v1_bundle
from fsslr.lrgate import Hyper, eval_ss_baseline, eval_v1
from fsslr.prg import PrgSeed
from fsslr.ring import FixedPointConfig, RingMatrix, decode
from fsslr.trainer import (Dataset, TrainConfig, auc, load_csv,
                           plain_fixed_step, train)

from conftest import run_gate


# -- ingestion ----------------------------------------------------------------

def test_load_iris_shape(data_dir):
    ds = load_csv(data_dir["iris"])
    assert ds.features.shape == (100, 4)
    assert set(np.unique(ds.labels)) == {0.0, 1.0}
    assert ds.features.min() >= 0.0 and ds.features.max() <= 1.0


def test_load_breast_cancer_shape(data_dir):
    ds = load_csv(data_dir["breast_cancer"])
    assert ds.features.shape == (569, 30)


def test_load_csv_rejects_multiclass(tmp_path):
    p = tmp_path / "three.csv"
    p.write_text("f0,label\n1.0,0\n2.0,1\n3.0,2\n")
    with pytest.raises(ValueError, match="labels"):
        load_csv(str(p))


def test_load_csv_rejects_non_numeric(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("f0,label\noops,0\n")
    with pytest.raises(ValueError):
        load_csv(str(p))


def test_load_csv_constant_feature_normalizes_to_zero(tmp_path):
    p = tmp_path / "const.csv"
    p.write_text("f0,f1,label\n5.0,1.0,0\n5.0,2.0,1\n")
    ds = load_csv(str(p))
    assert np.all(ds.features[:, 0] == 0.0)
    assert ds.normalization[0] == (5.0, 5.0)


def test_load_csv_label_by_index(tmp_path):
    p = tmp_path / "idx.csv"
    p.write_text("a,b\n0,1.5\n1,2.5\n")
    ds = load_csv(str(p), label_column="0")
    assert ds.features.shape == (2, 1)


# -- AUC ------------------------------------------------------------------------

def test_auc_perfect_separation():
    assert auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0


def test_auc_all_ties_is_half():
    assert auc([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]) == 0.5


def test_auc_single_class_rejected():
    with pytest.raises(ValueError):
        auc([0.1, 0.2], [1, 1])


def test_auc_matches_pairwise_oracle():
    rng = np.random.default_rng(13)
    for _ in range(100):
        n = int(rng.integers(4, 30))
        scores = rng.choice([0.1, 0.25, 0.5, 0.9], size=n)
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        pos = scores[labels == 1]
        neg = scores[labels == 0]
        wins = sum((p > q) + 0.5 * (p == q) for p in pos for q in neg)
        want = wins / (len(pos) * len(neg))
        assert auc(scores, labels) == pytest.approx(want, abs=1e-12)


# -- training -----------------------------------------------------------------

def test_zero_learning_rate_keeps_weights(data_dir):
    ds = load_csv(data_dir["iris"])
    report = train(ds, TrainConfig(protocol="fss-v1", batch=32, lr=0.0,
                                   epochs=2, seed=5))
    assert report.weights == [0.0] * 4  # initial shares reconstruct to 0


def test_plain_iris_one_epoch_auc_is_one(data_dir):
    ds = load_csv(data_dir["iris"])
    report = train(ds, TrainConfig(protocol="plain", batch=32, epochs=1, seed=0))
    assert report.auc == 1.0


def test_batch_larger_than_dataset_rejected(data_dir):
    ds = load_csv(data_dir["iris"])
    with pytest.raises(ValueError):
        train(ds, TrainConfig(protocol="plain", batch=128, epochs=1))


def test_unknown_protocol_rejected():
    with pytest.raises(ValueError):
        TrainConfig(protocol="nope")


def test_secure_trajectories_match_plain_fixed():
    # per-step weights of the quantized plaintext reference, the baseline,
    # and the one-round gate agree within 2^-8 on a tiny dataset
    rng = np.random.default_rng(21)
    cfg = FixedPointConfig()
    hyper = Hyper(alpha=0.5)
    m, n, steps = 4, 3, 6
    xs = rng.uniform(-1, 1, (steps, m, n))
    ys = rng.integers(0, 2, (steps, m)).astype(float)

    w_ref = RingMatrix.zeros(1, n, cfg)
    w_v1 = np.zeros(n)
    w_ss = np.zeros(n)
    for step in range(steps):
        w_ref = plain_fixed_step(xs[step], ys[step], w_ref, hyper)
        seed = PrgSeed.from_int(7000 + step)
        g1, _, _ = run_gate(eval_v1, xs[step], ys[step], w_v1,
                            gen_v1_bundle(m, n, seed), hyper)
        w_v1 = w_v1 - g1
        g2, _, _ = run_gate(eval_ss_baseline, xs[step], ys[step], w_ss,
                            gen_beaver(m, n, seed), hyper)
        w_ss = w_ss - g2
        ref = decode(w_ref)[0]
        assert np.all(np.abs(ref - w_v1) <= 2**-8), step
        assert np.all(np.abs(ref - w_ss) <= 2**-8), step


def test_simulate_deterministic_reports(data_dir):
    ds = load_csv(data_dir["iris"])
    cfg = TrainConfig(protocol="fss-v1", batch=32, epochs=3, seed=123)
    r1 = train(ds, cfg)
    r2 = train(ds, cfg)
    assert r1.canonical_bytes() == r2.canonical_bytes()
    r3 = train(ds, TrainConfig(protocol="fss-v1", batch=32, epochs=3, seed=124))
    assert r1.canonical_bytes() != r3.canonical_bytes()


def test_convergence_stop_rule(data_dir):
    ds = load_csv(data_dir["iris"])
    report = train(ds, TrainConfig(protocol="plain", batch=32, epochs=50, seed=0))
    assert report.epochs_run < 50  # AUC plateaus at 1.0 and the loop stops


def test_comm_stats_round_formula(data_dir):
    ds = load_csv(data_dir["iris"])  # 100 rows, batch 32: 3 batches/epoch
    cfg = TrainConfig(protocol="fss-v1", batch=32, epochs=2, seed=9,
                      auc_stop_delta=0.0)
    r = train(ds, cfg)
    assert r.comm["rounds"] == 2 * (100 // 32)
    cfg_ss = TrainConfig(protocol="ss", batch=32, epochs=2, seed=9,
                         auc_stop_delta=0.0)
    r_ss = train(ds, cfg_ss)
    assert r_ss.comm["rounds"] == 2 * r.comm["rounds"]
    # both open mn+n+m elements per batch per party
    per_batch = 32 * 4 + 4 + 32
    assert r.comm["party0"]["opened_elements"] == per_batch * 6
    assert r_ss.comm["party0"]["opened_elements"] == per_batch * 6


def test_weight_range_guard():
    # artificial dataset that blows up under a huge learning rate trips the
    # runtime range assertion instead of wrapping silently
    rng = np.random.default_rng(2)
    features = rng.uniform(0, 1, (64, 4))
    labels = rng.integers(0, 2, 64).astype(float)
    ds = Dataset("explode", features, labels)
    with pytest.raises(OverflowError):
        train(ds, TrainConfig(protocol="fss-v1", batch=32, lr=2.0**28,
                              epochs=30, seed=0, auc_stop_delta=0.0))


def test_bias_column_changes_dimension(data_dir):
    ds = load_csv(data_dir["iris"])
    r = train(ds, TrainConfig(protocol="plain", batch=32, epochs=1, seed=0, bias=True))
    assert len(r.weights) == 5


def test_holdout_split(data_dir):
    ds = load_csv(data_dir["breast_cancer"])
    cfg = TrainConfig(protocol="plain", batch=64, epochs=2, seed=0, holdout=0.2)
    tx, ty, ex, ey = cfg.split(ds)
    assert tx.shape[0] + ex.shape[0] == ds.size
    assert ex.shape[0] == round(ds.size * 0.2)
    r = train(ds, cfg)
    assert 0.0 <= r.auc <= 1.0
    # secure run batches only the training rows
    r2 = train(ds, TrainConfig(protocol="fss-v1", batch=64, epochs=1, seed=0,
                               holdout=0.2, auc_stop_delta=0.0))
    per_batch = 64 * 30 + 30 + 64
    assert r2.comm["party0"]["opened_elements"] == per_batch * (tx.shape[0] // 64)
    with pytest.raises(ValueError):
        TrainConfig(holdout=1.0)


def test_gate_at_ell32(data_dir):
    # reduced 32-bit ring with 8 fractional bits end to end
    ds = load_csv(data_dir["iris"])
    cfg = TrainConfig(protocol="fss-v1", batch=32, epochs=3, seed=2, ell=32, f=8)
    r = train(ds, cfg)
    assert r.auc >= 0.99
