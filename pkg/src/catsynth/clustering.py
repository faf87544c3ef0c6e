import numpy as np

from .errors import ConfigError


def _sq_dists(x, centers):
    # (n, k) squared distances without the (n, k, d) intermediate
    d = (x * x).sum(1)[:, None] - 2.0 * x @ centers.T + (centers * centers).sum(1)[None, :]
    return np.maximum(d, 0.0)


def kmeans_plusplus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    closest = _sq_dists(x, centers[:1])[:, 0]
    for i in range(1, k):
        total = closest.sum()
        if total <= 0:
            raise ConfigError(f"cannot seed {k} distinct centers")
        idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
        idx = min(idx, n - 1)
        if closest[idx] == 0:  # float edge case at the cumsum boundary
            idx = int(np.argmax(closest))
        centers[i] = x[idx]
        closest = np.minimum(closest, _sq_dists(x, centers[i:i + 1])[:, 0])
    return centers


def _fill_empty(x, labels, centers, k):
    """Move the farthest point of a multi-member cluster into each empty cluster."""
    counts = np.bincount(labels, minlength=k)
    for c in np.flatnonzero(counts == 0):
        dist = ((x - centers[labels]) ** 2).sum(1)
        dist[counts[labels] <= 1] = -1.0
        far = int(np.argmax(dist))
        counts[labels[far]] -= 1
        labels[far] = c
        counts[c] = 1
        centers[c] = x[far]
    return labels


def kmeans_labels(rows: np.ndarray, k: int, seed: int, max_iter: int = 100, tol: float = 1e-4) -> np.ndarray:
    """Lloyd's algorithm with k-means++ seeding; returns labels in ``{0..k-1}``.

    Stops after ``max_iter`` iterations or once no centroid moves by more than
    ``tol``. Every cluster ends up non-empty.
    """
    x = np.asarray(rows, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if k < 2:
        raise ConfigError(f"k must be >= 2, got {k}")
    n_distinct = len(np.unique(x, axis=0))
    if k > n_distinct:
        raise ConfigError(f"k={k} exceeds the number of distinct rows ({n_distinct})")
    rng = np.random.default_rng(seed)
    centers = kmeans_plusplus(x, k, rng)
    labels = np.argmin(_sq_dists(x, centers), axis=1)
    for _ in range(max_iter):
        labels = _fill_empty(x, labels, centers, k)
        sums = np.zeros_like(centers)
        np.add.at(sums, labels, x)
        new = sums / np.bincount(labels, minlength=k)[:, None]
        shift = np.sqrt(((new - centers) ** 2).sum(1)).max()
        centers = new
        labels = np.argmin(_sq_dists(x, centers), axis=1)
        if shift < tol:
            break
    return _fill_empty(x, labels, centers, k).astype(np.int64)
