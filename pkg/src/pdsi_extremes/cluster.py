"""K-means over (fractional year, PDSI) points with silhouette-based k selection."""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .extremes import LnpvSet, feature_collection, fractional_year, lnpv_map, point_feature
from .grid import GridCoordinate, GridDataset

_logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class KMeansOptions:
    init: str = "kmeans_pp"
    n_restarts: int = 10
    max_iter: int = 300
    tol: float = 1e-6
    scaling: str = "none"

    def validate(self):
        if self.init not in ("kmeans_pp", "random"):
            raise ValueError(f"init must be 'kmeans_pp' or 'random', got {self.init!r}")
        if self.scaling not in ("none", "standardize"):
            raise ValueError(f"scaling must be 'none' or 'standardize', got {self.scaling!r}")
        if self.n_restarts < 1 or self.max_iter < 1 or not self.tol >= 0:
            raise ValueError("n_restarts and max_iter must be >= 1 and tol >= 0")


@dataclass(frozen=True, eq=False)
class ClusterModel:
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    mean_silhouette: float | None
    seed: int
    iterations: int
    inertia_trace: tuple[float, ...] = field(repr=False)
    restart_inertias: tuple[float, ...] = field(repr=False)


def _rng(seed: int, k: int, restart: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, k, restart]))


def _init_centroids(X: np.ndarray, k: int, method: str, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    if method == "random":
        return X[rng.choice(n, size=k, replace=False)].copy()
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n)]
    _, d2 = _kernels.assign_nearest(X, centroids[:1])
    for c in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centroids[c] = X[idx]
        _, d2 = _kernels.assign_nearest(X, centroids[: c + 1])
    return centroids


def _cluster_means(X, labels, k, centroids):
    sums = np.zeros((k, X.shape[1]))
    np.add.at(sums, labels, X)
    sizes = np.bincount(labels, minlength=k)
    out = centroids.copy()
    nz = sizes > 0
    out[nz] = sums[nz] / sizes[nz, None]
    return out, sizes


def _repair_empty(X, labels, d2, centroids, sizes):
    """Move each empty centroid onto the point farthest from its own centroid."""
    d2 = d2.copy()
    for c in np.flatnonzero(sizes == 0):
        # never strip the last point out of a cluster
        donors = sizes[labels] > 1
        cand = np.where(donors, d2, -1.0)
        i = int(np.argmax(cand))
        if cand[i] < 0:
            break
        sizes[labels[i]] -= 1
        labels[i] = c
        sizes[c] = 1
        d2[i] = 0.0
        centroids[c] = X[i]


def _inertia(X, labels, centroids):
    diff = X - centroids[labels]
    return float(np.einsum("nd,nd->", diff, diff))


def _hartigan(X, labels, centroids, sizes, trace, max_moves):
    """Single-point transfers that strictly lower inertia.

    Moving x from cluster a to b changes inertia by
    n_b/(n_b+1)|x-mu_b|^2 - n_a/(n_a-1)|x-mu_a|^2. Lloyd fixed points can still
    admit such moves; the result of this pass is again a Lloyd fixed point.
    Returns the number of moves made.
    """
    moved = 0
    scale = max(float(np.einsum("nd,nd->", X - X.mean(0), X - X.mean(0))), 1e-300)
    while moved < max_moves:
        diff = X[:, None, :] - centroids[None, :, :]
        d2 = np.einsum("nkd,nkd->nk", diff, diff)
        own = labels
        na = sizes[own].astype(np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            remove = np.where(na > 1, na / (na - 1) * d2[np.arange(len(X)), own], -np.inf)
        add = sizes / (sizes + 1.0) * d2
        delta = add - remove[:, None]
        delta[np.arange(len(X)), own] = np.inf
        i, b = np.unravel_index(np.argmin(delta), delta.shape)
        if not delta[i, b] < -1e-12 * scale:
            break
        a = own[i]
        x = X[i]
        centroids[a] = (centroids[a] * sizes[a] - x) / (sizes[a] - 1)
        centroids[b] = (centroids[b] * sizes[b] + x) / (sizes[b] + 1)
        sizes[a] -= 1
        sizes[b] += 1
        labels[i] = b
        moved += 1
    if moved:
        # recompute exactly to shed incremental rounding
        centroids[:], _ = _cluster_means(X, labels, len(centroids), centroids)
        trace.append(_inertia(X, labels, centroids))
    return moved


def _lloyd_pass(X, k, centroids, opts, trace):
    it = 0
    for it in range(1, opts.max_iter + 1):
        labels, d2 = _kernels.assign_nearest(X, centroids)
        new, sizes = _cluster_means(X, labels, k, centroids)
        if (sizes == 0).any():
            _repair_empty(X, labels, d2, new, sizes)
            new, sizes = _cluster_means(X, labels, k, new)
        trace.append(_inertia(X, labels, new))
        shift = float(np.sqrt(((new - centroids) ** 2).sum(axis=1)).max())
        centroids = new
        if shift <= opts.tol:
            break
    return centroids, it


def _lloyd(X, k, opts: KMeansOptions, rng):
    centroids = _init_centroids(X, k, opts.init, rng)
    trace = []
    total = 0
    for _ in range(opts.max_iter):
        centroids, it = _lloyd_pass(X, k, centroids, opts, trace)
        total += it
        labels, _ = _kernels.assign_nearest(X, centroids)
        centroids, sizes = _cluster_means(X, labels, k, centroids)
        if (sizes == 0).any() or not _hartigan(X, labels, centroids, sizes, trace, max_moves=10 * len(X)):
            break
    labels, _ = _kernels.assign_nearest(X, centroids)
    centroids, sizes = _cluster_means(X, labels, k, centroids)
    return labels, centroids, _inertia(X, labels, centroids), total, trace


def _features(points, scaling):
    X = np.ascontiguousarray(points, dtype=np.float64)
    if scaling == "standardize":
        mu = X.mean(axis=0)
        sd = X.std(axis=0)
        sd[sd == 0] = 1.0
        return (X - mu) / sd, mu, sd
    return X, np.zeros(X.shape[1]), np.ones(X.shape[1])


def kmeans(points, k: int, options: KMeansOptions | None = None, seed: int = 0, threads: int = 1) -> ClusterModel:
    """Best-of-restarts Lloyd K-means.

    Each restart ``r`` draws from its own generator keyed on (seed, k, r), so
    the result does not depend on ``threads``. With ``scaling='standardize'``
    clustering runs on z-scores and centroids are mapped back to input units.
    """
    opts = options or KMeansOptions()
    opts.validate()
    P = np.asarray(points, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] == 0:
        raise ValueError("points must be a non-empty (n, d) array")
    n = P.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in 1..{n}, got {k}")
    if not np.isfinite(P).all():
        raise ValueError("points must be finite")
    X, mu, sd = _features(P, opts.scaling)
    if k > len(np.unique(X, axis=0)):
        raise ValueError(f"k={k} exceeds the number of distinct points")

    def run(r):
        return _lloyd(X, k, opts, _rng(seed, k, r))

    if threads > 1 and opts.n_restarts > 1:
        with ThreadPoolExecutor(threads) as pool:
            runs = list(pool.map(run, range(opts.n_restarts)))
    else:
        runs = [run(r) for r in range(opts.n_restarts)]
    inertias = tuple(r[2] for r in runs)
    best = min(range(len(runs)), key=lambda i: (inertias[i], i))
    labels, cz, inertia, iters, trace = runs[best]
    sil = None
    if k >= 2:
        sil = float(np.mean(_kernels.silhouette_samples(X, labels, k)))
    centroids = cz * sd + mu
    labels.setflags(write=False)
    centroids.setflags(write=False)
    return ClusterModel(k, centroids, labels, inertia, sil, int(seed), iters, tuple(trace), inertias)


def silhouette_mean(points, assignments) -> float:
    """Mean silhouette coefficient (singleton-cluster points score 0)."""
    X = np.ascontiguousarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    labels = np.asarray(assignments)
    if X.shape[0] < 2:
        raise ValueError("silhouette needs at least 2 points")
    uniq, dense = np.unique(labels, return_inverse=True)
    if uniq.size < 2:
        raise ValueError("silhouette is undefined for a single cluster")
    return float(np.mean(_kernels.silhouette_samples(X, dense.astype(np.int64), uniq.size)))


def select_k(points, k_range=range(2, 11), options: KMeansOptions | None = None, seed: int = 0, threads: int = 1):
    """Pick k by maximum mean silhouette; ties go to the smaller k.

    :return: ``(k_best, {k: mean_silhouette}, {k: ClusterModel})``
    """
    n = len(points)
    ks = sorted(set(int(k) for k in k_range))
    if not ks or ks[0] < 2 or ks[-1] > n:
        raise ValueError(f"k_range must lie within 2..{n}, got {ks}")

    def fit(k):
        return kmeans(points, k, options, seed)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            models = dict(zip(ks, pool.map(fit, ks)))
    else:
        models = {k: fit(k) for k in ks}
    scores = {k: models[k].mean_silhouette for k in ks}
    k_best = max(ks, key=lambda k: (scores[k], -k))
    return k_best, scores, models


# ---------------------------------------------------------------------------
# LNPV clustering


def five_number(values) -> tuple[float, float, float, float, float]:
    """(min, Q1, median, Q3, max) with linearly interpolated quartiles."""
    v = np.asarray(values, dtype=np.float64)
    q = np.quantile(v, [0.0, 0.25, 0.5, 0.75, 1.0], method="linear")
    return tuple(float(x) for x in q)


@dataclass(frozen=True, eq=False)
class LnpvClustering:
    model: ClusterModel
    cells: tuple[GridCoordinate, ...]
    cell_assignments: dict
    points: np.ndarray
    value_summary: dict
    time_summary: dict
    silhouettes: dict
    lnpv: list[LnpvSet] = field(repr=False)


def cluster_points(sets: list[LnpvSet], mode: str = "rank1"):
    """Clustering input: each cell's worst month, or every LNPV event.

    :return: ``(points, owner)`` where ``owner[i]`` is the cell index of point i
    """
    if mode == "rank1":
        pts = [(fractional_year(s.rank1.when), s.rank1.value) for s in sets]
        owner = list(range(len(sets)))
    elif mode == "all10":
        pts, owner = [], []
        for i, s in enumerate(sets):
            for ev in s.events:
                pts.append((fractional_year(ev.when), ev.value))
                owner.append(i)
    else:
        raise ValueError(f"points mode must be 'rank1' or 'all10', got {mode!r}")
    return np.array(pts, dtype=np.float64).reshape(-1, 2), np.array(owner, dtype=np.int64)


def cluster_lnpv(
    dataset: GridDataset,
    k: int | None = 4,
    options: KMeansOptions | None = None,
    seed: int = 0,
    lnpv_k: int = 10,
    points: str = "rank1",
    k_range=range(2, 11),
    threads: int = 1,
) -> LnpvClustering:
    """Cluster cells by their LNPV and summarize each cluster's LNPV events.

    ``k=None`` selects k by silhouette over ``k_range``. A cell belongs to the
    cluster of its worst month; summaries pool all of a member cell's events.
    """
    sets = lnpv_map(dataset, lnpv_k, threads=threads)
    P, owner = cluster_points(sets, points)
    silhouettes = {}
    if k is None:
        hi = min(max(k_range), P.shape[0])
        k, silhouettes, models = select_k(P, range(min(k_range), hi + 1), options, seed, threads)
        model = models[k]
    else:
        model = kmeans(P, k, options, seed, threads)
        if model.mean_silhouette is not None:
            silhouettes = {k: model.mean_silhouette}
    rank1_index = np.flatnonzero(np.r_[True, owner[1:] != owner[:-1]])
    cell_labels = np.asarray(model.assignments)[rank1_index]
    assignments = {s.cell: int(c) for s, c in zip(sets, cell_labels)}
    vals, times = {}, {}
    for c in range(model.k):
        members = [s for s, lab in zip(sets, cell_labels) if lab == c]
        if not members:
            continue
        vals[c] = five_number([ev.value for s in members for ev in s.events])
        times[c] = five_number([fractional_year(ev.when) for s in members for ev in s.events])
    return LnpvClustering(
        model, tuple(s.cell for s in sets), assignments, P, vals, times, silhouettes, sets
    )


def clusters_csv(result: LnpvClustering) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lon", "lat", "cluster", "t", "v"])
    for s in result.lnpv:
        w.writerow(
            [repr(s.cell.lon_deg), repr(s.cell.lat_deg), result.cell_assignments[s.cell],
             repr(round(fractional_year(s.rank1.when), 6)), repr(s.rank1.value)]
        )
    return buf.getvalue()


def clusters_geojson(result: LnpvClustering) -> str:
    return feature_collection(
        [point_feature(s.cell, {"cluster": result.cell_assignments[s.cell]}) for s in result.lnpv]
    )


def silhouette_csv(scores: dict) -> str:
    lines = ["k,mean_silhouette"]
    lines += [f"{k},{scores[k]!r}" for k in sorted(scores)]
    return "\n".join(lines) + "\n"


def summary_csv(result: LnpvClustering) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cluster", "n_cells", "centroid_t", "centroid_v", "quantity", "min", "q1", "median", "q3", "max"])
    sizes = {}
    for c in result.cell_assignments.values():
        sizes[c] = sizes.get(c, 0) + 1
    for c in sorted(result.value_summary):
        ct, cv = result.model.centroids[c]
        for name, table in (("pdsi", result.value_summary), ("year", result.time_summary)):
            w.writerow([c, sizes.get(c, 0), repr(round(float(ct), 6)), repr(round(float(cv), 6)), name,
                        *(repr(round(x, 6)) for x in table[c])])
    return buf.getvalue()
