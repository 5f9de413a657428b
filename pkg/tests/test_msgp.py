import time

import numpy as np
import pytest

from multisparse import (Dataset, Hyperparameters, OptConfig, TrainedMSGP, gp_fit, msgp_batch_predict,
                         msgp_fit, msgp_predict, spgp_fit)
from multisparse.cluster import Partition
from multisparse.gp import gp_condition, gp_predict_batch
from multisparse.msgp import msgp_predict_mean, msgp_predict_uncached
from multisparse.spgp import spgp_predict_batch

from conftest import sine_data

CFG = OptConfig(restarts=0, max_iter=40)


def test_single_cluster_full_pseudo_frozen_equals_gp(rng):
    data = sine_data(120, 2)
    h = Hyperparameters(1.0, 0.05, [1.0, 1.5])
    frozen = OptConfig(max_iter=0, restarts=0)
    ms = msgp_fit(data, 120, 120, opt_cfg=frozen, optimize_pseudo=False, init=h)
    gp = gp_condition(data, h)
    Xq = rng.uniform(-3, 3, size=(30, 2))
    np.testing.assert_allclose(ms.predict_mean(Xq), gp_predict_batch(gp, Xq)[0], atol=1e-6)


def test_single_cluster_equals_spgp(rng):
    data = sine_data(150, 2)
    ms = msgp_fit(data, 150, 15, opt_cfg=CFG)
    sp = spgp_fit(data, 15, opt_cfg=CFG)
    Xq = rng.uniform(-3, 3, size=(30, 2))
    ref = spgp_predict_batch(sp, Xq)[0]
    np.testing.assert_allclose([msgp_predict(ms, x).mean for x in Xq], ref, atol=1e-10)
    np.testing.assert_allclose(ms.predict_mean(Xq), ref, atol=1e-10)


def heteroscedastic(n=1000, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-4, 4, size=(n, 1))
    noise = np.where(X[:, 0] < 0, 0.02, 0.5)
    return Dataset(X, np.sin(2 * X[:, 0]) + noise * rng.standard_normal(n))


def test_clusters_learn_their_own_noise():
    ms = msgp_fit(heteroscedastic(), 250, 50, strategy="kmeans", opt_cfg=CFG)
    assert ms.M == 4
    noise = np.array([m.hyper.noise_variance for m in ms.per_model])
    assert noise.max() > 1.1 * noise.min()
    for m in ms.per_model:
        assert m.m == 50


@pytest.fixture(scope="module")
def five_clusters():
    return msgp_fit(sine_data(500, 2, seed=11), 100, 20, seed=3, opt_cfg=CFG)


def test_componentwise_oracle(five_clusters, rng):
    ms = five_clusters
    assert ms.M == 5
    for x in rng.uniform(-3, 3, size=(10, 2)):
        p = msgp_predict(ms, x, N=5)
        w, mus = [], []
        for j, m in enumerate(ms.per_model):
            ls = m.hyper.scales_for(2)
            w.append(np.exp(-0.5 * np.sum(((x - ms.partition.centers[j]) / ls) ** 2)))
            mus.append(spgp_predict_batch(m, x[None, :])[0][0])
        w, mus = np.array(w), np.array(mus)
        assert p.mean == pytest.approx(w @ mus / w.sum(), abs=1e-12)
        assert mus.min() - 1e-12 <= p.mean <= mus.max() + 1e-12
        recomputed = sum(wi * mi for _, mi, wi in p.per_model) / sum(wi for *_, wi in p.per_model)
        assert p.mean == pytest.approx(recomputed, abs=1e-12)


def test_nearest_only(five_clusters, rng):
    x = rng.uniform(-3, 3, size=2)
    p = msgp_predict(five_clusters, x, N=1)
    j = p.per_model[0][0]
    assert p.mean == spgp_predict_batch(five_clusters.per_model[j], x[None, :])[0][0]


def test_vectorized_batch_and_uncached_agree(five_clusters, rng):
    ms = five_clusters
    Xq = rng.uniform(-3, 3, size=(40, 2))
    loop = np.array([p.mean for p in msgp_batch_predict(ms, Xq)])
    np.testing.assert_allclose(msgp_predict_mean(ms, Xq), loop, atol=1e-12)
    assert msgp_batch_predict(ms, Xq[:1])[0] == msgp_predict(ms, Xq[0])
    for x in Xq[:5]:
        assert msgp_predict_uncached(ms, x) == pytest.approx(msgp_predict(ms, x).mean, abs=1e-8)


def test_equal_weights_give_plain_average():
    data = Dataset(np.array([[-1.0], [-1.0], [1.0], [1.0]]), np.array([0.0, 0.2, 1.0, 1.2]))
    h = Hyperparameters(1.0, 0.1, [1.0])
    ms = msgp_fit(data, 2, 2, opt_cfg=OptConfig(max_iter=0, restarts=0), init=h,
                  optimize_pseudo=False)
    assert ms.M == 2
    # partition is random; centers sit at -1 and 1 only if the chunks split by sign
    c = ms.partition.centers[:, 0]
    if set(np.round(c, 12)) == {-1.0, 1.0}:
        p = msgp_predict(ms, [0.0], N=2)
        mus = [mu for _, mu, _ in p.per_model]
        assert p.mean == pytest.approx(np.mean(mus), abs=1e-12)


def test_permuting_clusters_changes_nothing(five_clusters, rng):
    ms = five_clusters
    perm = rng.permutation(ms.M)
    part = Partition([ms.partition.models[j] for j in perm], ms.partition.strategy, ms.M)
    shuffled = TrainedMSGP(part, [ms.per_model[j] for j in perm], ms.neighbor_count)
    Xq = rng.uniform(-3, 3, size=(25, 2))
    for N in (1, 3, 5):
        np.testing.assert_allclose(shuffled.predict_mean(Xq, N), ms.predict_mean(Xq, N),
                                   atol=1e-10)


def test_tiny_cluster_is_flagged():
    data = sine_data(5, 1)
    ms = msgp_fit(data, 2, 1, opt_cfg=CFG)
    # ceil(5 / 2) = 3 clusters of sizes 2, 2, 1
    assert ms.M == 3
    assert list(ms.info["flags"].values()) == ["too-few-points"]
    assert np.isfinite(msgp_predict(ms, [0.0]).mean)


def test_u_validated():
    with pytest.raises(ValueError):
        msgp_fit(sine_data(20, 1), 10, 11)


def test_neighbor_count_defaults_to_min_five_m():
    assert msgp_fit(sine_data(60, 1), 20, 5, opt_cfg=CFG).neighbor_count == 3


def test_cached_latency_beats_gp():
    data = sine_data(4000, 3)
    ms = msgp_fit(data, 250, 50, opt_cfg=OptConfig(max_iter=10, restarts=0))
    gp = gp_condition(data, gp_fit(data.subset(np.arange(300)), opt_cfg=CFG).hyper)
    Xq = np.random.default_rng(0).uniform(-3, 3, size=(200, 3))

    def per_query(f):
        t = time.perf_counter()
        for x in Xq:
            f(x[None, :])
        return (time.perf_counter() - t) / len(Xq)

    # GP single-query cost with its O(n^2) variance solve
    assert per_query(ms.predict_mean) * 10 < per_query(lambda x: gp_predict_batch(gp, x))
