"""Pure numpy implementations of the hot loops.

Used when the compiled ``_ccore`` extension is missing or when the
``PDSI_EXTREMES_PURE`` environment variable is set.
"""

import numpy as np

# rows per block when building pairwise distances; bounds memory at ~8 * n * _CHUNK bytes
_CHUNK = 512


def mk_score(x):
    """Mann-Kendall S: sum of sign(x[j] - x[i]) over all pairs i < j."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    s = 0
    for i in range(x.size - 1):
        s += int(np.sign(x[i + 1:] - x[i]).sum())
    return s


def assign_nearest(X, C):
    """Index of the nearest centroid and the squared distance to it.

    Ties go to the lowest centroid index.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    C = np.ascontiguousarray(C, dtype=np.float64)
    diff = X[:, None, :] - C[None, :, :]
    d2 = np.einsum("nkd,nkd->nk", diff, diff)
    labels = np.argmin(d2, axis=1).astype(np.int64)
    return labels, d2[np.arange(X.shape[0]), labels]


def silhouette_samples(X, labels, k):
    """Per-point silhouette values; points in singleton clusters get 0."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = X.shape[0]
    sizes = np.bincount(labels, minlength=k)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels] = 1.0
    out = np.zeros(n)
    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        diff = X[lo:hi, None, :] - X[None, :, :]
        dist = np.sqrt(np.einsum("ind,ind->in", diff, diff))
        sums = dist @ onehot
        own = labels[lo:hi]
        rows = np.arange(hi - lo)
        own_size = sizes[own]
        with np.errstate(invalid="ignore", divide="ignore"):
            a = sums[rows, own] / (own_size - 1)
            mean_other = sums / sizes
        mean_other[rows, own] = np.inf
        mean_other[:, sizes == 0] = np.inf
        b = mean_other.min(axis=1)
        denom = np.maximum(a, b)
        with np.errstate(invalid="ignore", divide="ignore"):
            s = np.where(denom > 0, (b - a) / denom, 0.0)
        s[own_size <= 1] = 0.0
        out[lo:hi] = s
    return out
