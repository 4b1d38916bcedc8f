import itertools
import json
import math

import numpy as np
import pytest

from pdsi_extremes.cluster import (
    KMeansOptions,
    cluster_lnpv,
    clusters_csv,
    clusters_geojson,
    five_number,
    kmeans,
    select_k,
    silhouette_mean,
)
from pdsi_extremes.grid import GridCoordinate, GridDataset, SyntheticSpec, generate_synthetic, DEFAULT_PERIOD
from conftest import make_dataset


def brute_force_inertia(P, k):
    """Optimal K-means objective by enumerating all k^n labelings."""
    best = math.inf
    for lab in itertools.product(range(k), repeat=len(P)):
        lab = np.array(lab)
        if len(set(lab.tolist())) < k:
            continue
        cost = sum(((P[lab == c] - P[lab == c].mean(axis=0)) ** 2).sum() for c in range(k))
        best = min(best, cost)
    return best


def direct_silhouette(P, labels):
    """Textbook definition, one point at a time."""
    labels = list(labels)
    s = []
    for i, p in enumerate(P):
        own = [j for j in range(len(P)) if labels[j] == labels[i] and j != i]
        if not own:
            s.append(0.0)
            continue
        a = sum(math.dist(p, P[j]) for j in own) / len(own)
        b = min(
            sum(math.dist(p, P[j]) for j in range(len(P)) if labels[j] == c) / labels.count(c)
            for c in set(labels)
            if c != labels[i]
        )
        s.append((b - a) / max(a, b) if max(a, b) > 0 else 0.0)
    return sum(s) / len(s)


def test_separable_pair():
    m = kmeans([(1900, -5), (2000, -5)], 2, seed=1)
    assert sorted(map(tuple, m.centroids)) == [(1900.0, -5.0), (2000.0, -5.0)]
    assert m.inertia == 0


def test_k1_closed_form():
    P = np.random.default_rng(2).normal(size=(40, 2))
    m = kmeans(P, 1)
    np.testing.assert_allclose(m.centroids[0], P.mean(axis=0), atol=1e-12)
    assert m.inertia == pytest.approx(P.var(axis=0).sum() * len(P), rel=1e-12)
    assert m.mean_silhouette is None


def test_eight_points_k3_matches_enumeration():
    P = np.random.default_rng(8).normal(size=(8, 2))
    assert kmeans(P, 3, seed=3).inertia == pytest.approx(brute_force_inertia(P, 3), abs=1e-9)


def test_k_bounds():
    with pytest.raises(ValueError):
        kmeans([(0, 0), (1, 1)], 3)
    with pytest.raises(ValueError):
        kmeans([(0, 0), (1, 1)], 0)
    with pytest.raises(ValueError):
        kmeans([(0, 0), (0, 0), (1, 1)], 3)


@pytest.mark.parametrize("init", ["kmeans_pp", "random"])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_model_invariants(init, seed):
    rng = np.random.default_rng(seed)
    P = np.vstack([rng.normal(c, 1.0, size=(30, 2)) for c in ((0, 0), (6, 0), (0, 6), (6, 6))])
    m = kmeans(P, 4, KMeansOptions(init=init), seed=seed)
    labels = np.asarray(m.assignments)
    assert set(labels.tolist()) == {0, 1, 2, 3}
    # Lloyd fixed point
    d2 = ((P[:, None, :] - m.centroids[None]) ** 2).sum(-1)
    assert np.array_equal(d2.argmin(1), labels)
    for c in range(4):
        np.testing.assert_allclose(m.centroids[c], P[labels == c].mean(0), atol=1e-6)
    trace = np.array(m.inertia_trace)
    assert np.all(np.diff(trace) <= 1e-9 * trace[0])
    assert all(m.inertia <= r + 1e-12 for r in m.restart_inertias)
    assert -1 <= m.mean_silhouette <= 1


def test_label_permutation_invariance():
    rng = np.random.default_rng(4)
    P = rng.normal(size=(60, 2))
    m = kmeans(P, 3, seed=0)
    perm = rng.permutation(3)
    relabeled = perm[np.asarray(m.assignments)]
    assert silhouette_mean(P, relabeled) == pytest.approx(m.mean_silhouette, abs=1e-12)
    cost = sum(((P[relabeled == perm[c]] - m.centroids[c]) ** 2).sum() for c in range(3))
    assert cost == pytest.approx(m.inertia, rel=1e-12)


def test_standardize_scale_invariance():
    rng = np.random.default_rng(5)
    P = np.column_stack([rng.uniform(1900, 2014, 80), rng.normal(-6, 1, 80)])
    opts = KMeansOptions(scaling="standardize")
    a = kmeans(P, 3, opts, seed=2)
    Q = P.copy()
    Q[:, 1] *= 7.5
    b = kmeans(Q, 3, opts, seed=2)
    assert np.array_equal(a.assignments, b.assignments)
    # centroids reported in input units
    for c in range(3):
        np.testing.assert_allclose(a.centroids[c], P[np.asarray(a.assignments) == c].mean(0), atol=1e-6)


def test_threads_do_not_change_result():
    P = np.random.default_rng(6).normal(size=(200, 2))
    a, b = kmeans(P, 5, seed=9), kmeans(P, 5, seed=9, threads=4)
    assert np.array_equal(a.assignments, b.assignments) and a.inertia == b.inertia


def test_silhouette_limits():
    rng = np.random.default_rng(7)
    P = np.vstack([rng.normal(0, 0.01, (10, 2)), rng.normal(100, 0.01, (10, 2))])
    assert silhouette_mean(P, [0] * 10 + [1] * 10) > 0.9
    assert silhouette_mean([(0, 0), (1, 1)], [0, 1]) == 0.0
    with pytest.raises(ValueError):
        silhouette_mean(P, [0] * 20)


@pytest.mark.parametrize("seed", range(5))
def test_silhouette_random_20(seed):
    rng = np.random.default_rng(seed)
    P = rng.normal(size=(20, 2))
    lab = rng.integers(0, 3, 20)
    lab[:3] = [0, 1, 2]
    assert silhouette_mean(P, lab) == pytest.approx(direct_silhouette(P.tolist(), lab.tolist()), abs=1e-12)


def test_select_k_planted_blobs():
    rng = np.random.default_rng(1)
    P = np.vstack([rng.normal(c, 0.2, (25, 2)) for c in ((0, 0), (10, 0), (5, 9))])
    k, scores, models = select_k(P, range(2, 7), seed=0)
    assert k == 3
    assert set(scores) == {2, 3, 4, 5, 6}
    assert models[3].k == 3


def test_select_k_two_points():
    k, scores, _ = select_k([(0, 0), (1, 1)], range(2, 3))
    assert k == 2 and scores == {2: 0.0}


def test_select_k_tie_prefers_smaller(monkeypatch):
    import pdsi_extremes.cluster as mod

    real = mod.kmeans

    def flat_score(points, k, options=None, seed=0):
        m = real(points, k, options, seed)
        return mod.ClusterModel(k, m.centroids, m.assignments, m.inertia, 0.5, seed, 1, (), ())

    monkeypatch.setattr(mod, "kmeans", flat_score)
    k, scores, _ = select_k(np.arange(20.0).reshape(10, 2), range(2, 6))
    assert k == 2 and set(scores.values()) == {0.5}


def test_five_number():
    assert five_number([1, 2, 3, 4, 5]) == (1, 2, 3, 4, 5)
    assert five_number([1, 2, 3, 4]) == (1, 1.75, 2.5, 3.25, 4)


def _spike_dataset(spec):
    """cells with a single deep minimum at a given (month offset, depth)."""
    rows = {}
    for idx, (off, depth) in enumerate(spec):
        v = np.arange(1380) % 7 * -0.1
        v[off] = depth
        rows[(idx, 0)] = v
    return make_dataset(rows)


def test_cluster_lnpv_degenerate_singletons():
    ds = _spike_dataset([(10, -9.0), (400, -5.0), (800, -7.0), (1300, -8.0)])
    res = cluster_lnpv(ds, k=4, seed=0)
    assert len(set(res.cell_assignments.values())) == 4
    for s in res.lnpv:
        c = res.cell_assignments[s.cell]
        vals = [e.value for e in s.events]
        assert res.value_summary[c][0] == min(vals) and res.value_summary[c][4] == max(vals)


def test_cluster_lnpv_deterministic():
    ds = generate_synthetic(SyntheticSpec(n_cells=60), 2)
    a, b = cluster_lnpv(ds, k=None, seed=4), cluster_lnpv(ds, k=None, seed=4)
    assert a.cell_assignments == b.cell_assignments
    assert a.silhouettes == b.silhouettes


def test_cluster_lnpv_planted_two_epochs():
    base = generate_synthetic(SyntheticSpec(n_cells=100), 12)
    vals = base.values.copy()
    truth = {}
    rng = np.random.default_rng(0)
    for i, cell in enumerate(base.cells):
        early = i % 2 == 0
        lo, hi = ((1910 - 1900) * 12, (1920 - 1900) * 12) if early else ((2000 - 1900) * 12, (2010 - 1900) * 12)
        t = rng.integers(lo, hi)
        vals[i, t] = vals[i].min() - 1.0
        truth[cell] = early
    ds = GridDataset(base.period, base.cells, vals)
    res = cluster_lnpv(ds, k=2, seed=1)
    lab = np.array([res.cell_assignments[c] for c in ds.cells])
    tr = np.array([truth[c] for c in ds.cells])
    agree = max(np.mean(lab == tr), np.mean(lab != tr))
    assert agree >= 0.95


def test_cluster_all10_mode_and_exports(tiny_dataset):
    res = cluster_lnpv(tiny_dataset, k=2, points="all10", lnpv_k=5, seed=0)
    assert res.points.shape == (15, 2)
    assert set(res.cell_assignments) == set(tiny_dataset.cells)
    rows = clusters_csv(res).splitlines()
    assert rows[0] == "lon,lat,cluster,t,v" and len(rows) == 4
    fc = json.loads(clusters_geojson(res))
    assert all(f["geometry"]["type"] == "Point" for f in fc["features"])
    with pytest.raises(ValueError):
        cluster_lnpv(tiny_dataset, points="bogus")
