"""Summarize a sample's patch features into a handful of part centers.

Lloyd's K-means with seeded k-means++ initialization, run on unit-norm rows
with squared-Euclidean distance. Rows are canonicalized (sorted
lexicographically by content) before any seeded draw, so the same seed
yields bit-identical centers no matter how the input rows were ordered.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, ParameterError
from .numeric import l2_normalize_rows

MAX_ITERATIONS = 100


@dataclass
class PartSummary:
    """m unit-norm part centers summarizing one sample's patches."""

    centers: np.ndarray   # (m, d) float64, unit-norm rows
    m: int


def _canonical_order(rows: np.ndarray) -> np.ndarray:
    # lexicographic by row content: first column is the primary key
    return np.lexsort(rows.T[::-1])


def _kmeanspp_init(x: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((m, x.shape[1]), dtype=np.float64)
    idx = int(rng.integers(n))
    centers[0] = x[idx]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for j in range(1, m):
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            u = rng.random() * total
            idx = min(int(np.searchsorted(np.cumsum(d2), u, side="right")), n - 1)
        centers[j] = x[idx]
        d2 = np.minimum(d2, ((x - centers[j]) ** 2).sum(axis=1))
    return centers


def kmeans_cluster(rows: np.ndarray, m: int, seed,
                   max_iter: int = MAX_ITERATIONS) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Seeded Lloyd's K-means over the rows of a 2-D array.

    Returns (centers, labels, objective_history) where centers are the raw
    cluster means (not renormalized), labels align with the input row order,
    and objective_history holds the sum of squared distances recorded after
    each assignment step (non-increasing). Empty clusters are re-seeded to
    the point currently farthest from its assigned center.
    """
    rows = np.asarray(rows, dtype=np.float64)
    n = rows.shape[0]
    if n == 0:
        raise DegenerateInputError("cannot cluster zero rows")
    if not 1 <= m <= n:
        raise ParameterError(f"cluster count must be in [1, {n}], got {m}")

    order = _canonical_order(rows)
    x = rows[order]
    rng = np.random.default_rng(seed)
    centers = _kmeanspp_init(x, m, rng)

    labels = np.zeros(n, dtype=np.int64)
    prev = None
    history: list[float] = []
    for _ in range(max_iter):
        d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = np.argmin(d2, axis=1)
        assigned_d2 = d2[np.arange(n), labels]
        history.append(float(assigned_d2.sum()))
        if prev is not None and np.array_equal(labels, prev):
            break
        prev = labels

        for j in range(m):
            mask = labels == j
            if mask.any():
                centers[j] = x[mask].mean(axis=0)
        for j in range(m):
            if not (labels == j).any():
                far = int(np.argmax(assigned_d2))
                centers[j] = x[far]
                assigned_d2[far] = 0.0

    out_labels = np.empty(n, dtype=np.int64)
    out_labels[order] = labels
    return centers, out_labels, history


def summarize_parts(patches: np.ndarray, m: int, seed) -> PartSummary:
    """Cluster a sample's (P, d) patch rows into min(m, P) unit-norm centers.

    Tiny patch sets degrade to one singleton cluster per row instead of
    erroring, so short samples never break a stream.
    """
    if m < 1:
        raise ParameterError(f"part count must be positive, got {m}")
    patches = np.asarray(patches, dtype=np.float64)
    if patches.ndim != 2 or patches.shape[0] == 0:
        raise DegenerateInputError("patch matrix must have at least one row")
    rows = l2_normalize_rows(patches)
    n = rows.shape[0]
    m_eff = min(m, n)
    if m_eff == n:
        centers = rows[_canonical_order(rows)]
    else:
        centers, labels, _ = kmeans_cluster(rows, m_eff, seed)
        norms = np.linalg.norm(centers, axis=1)
        for j in np.nonzero(norms < 1e-12)[0]:
            # exactly-cancelling cluster mean: fall back to a member row
            members = rows[labels == j]
            if members.shape[0] == 0:
                members = rows
            centers[j] = members[_canonical_order(members)[0]]
        centers = l2_normalize_rows(centers)
    return PartSummary(centers=centers, m=m_eff)
