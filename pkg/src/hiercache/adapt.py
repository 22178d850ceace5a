"""Cache-retrieval logits and their fusion with zero-shot probabilities.

A query's affinity to each cached key is exp(-beta * (1 - cosine)), which
lies in (0, 1]. Multiplying affinities against the cached one-hot labels
yields per-class evidence; the local path averages that evidence over the
query's part centers. Fusion is the literal weighted sum
zero_shot + alpha_g * global + alpha_l * local, with no renormalization.
"""

from dataclasses import dataclass

import numpy as np

from .cache import CacheSnapshot
from .errors import ParameterError, ShapeError


@dataclass(frozen=True)
class AdaptParams:
    """Fusion weights (alpha) and affinity sharpness coefficients (beta)."""

    alpha_global: float = 4.0
    alpha_local: float = 4.0
    beta_global: float = 3.0
    beta_local: float = 3.0

    def __post_init__(self):
        if self.alpha_global < 0 or self.alpha_local < 0:
            raise ParameterError("fusion weights must be nonnegative")
        if self.beta_global <= 0 or self.beta_local <= 0:
            raise ParameterError("sharpness coefficients must be positive")


def affinity(queries: np.ndarray, keys: np.ndarray, beta: float) -> np.ndarray:
    """exp(-beta * (1 - cos)) between query rows and key rows, in (0, 1]."""
    q = np.asarray(queries, dtype=np.float64)
    k = np.asarray(keys, dtype=np.float64)
    if q.ndim != 2 or k.ndim != 2 or q.shape[1] != k.shape[1]:
        raise ShapeError(f"incompatible shapes {q.shape} and {k.shape}")
    sims = np.clip(q @ k.T, -1.0, 1.0)
    return np.exp(-beta * (1.0 - sims))


def global_adapt(query: np.ndarray, snap: CacheSnapshot, beta_global: float) -> np.ndarray:
    """Class logits from the global store: affinity-weighted one-hot labels.

    An empty cache yields the zero vector, so fusion degrades to zero-shot.
    """
    q = np.asarray(query, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != snap.dim:
        raise ShapeError(f"query shape {q.shape} does not match cache dim {snap.dim}")
    if snap.global_features.shape[0] == 0:
        return np.zeros(snap.class_count, dtype=np.float64)
    a = affinity(q[None, :], snap.global_features, beta_global)
    return (a @ snap.global_onehot)[0]


def local_adapt(query_parts: np.ndarray, snap: CacheSnapshot, beta_local: float) -> np.ndarray:
    """Class logits from the local store, averaged over the query's parts."""
    parts = np.asarray(query_parts, dtype=np.float64)
    if parts.ndim != 2 or parts.shape[1] != snap.dim:
        raise ShapeError(
            f"query parts shape {parts.shape} do not match cache dim {snap.dim}")
    if snap.local_features.shape[0] == 0:
        return np.zeros(snap.class_count, dtype=np.float64)
    a = affinity(parts, snap.local_features, beta_local)
    return (a @ snap.local_onehot).mean(axis=0)


def fuse(zs_probs: np.ndarray, global_logits: np.ndarray, local_logits: np.ndarray,
         params: AdaptParams) -> tuple[np.ndarray, int]:
    """Weighted sum of the three evidence vectors and its argmax class.

    Probabilities and unnormalized cache logits are mixed on purpose; the
    alpha sweep operates on exactly this scale. Ties break to the lowest
    class index.
    """
    zs = np.asarray(zs_probs, dtype=np.float64)
    g = np.asarray(global_logits, dtype=np.float64)
    l = np.asarray(local_logits, dtype=np.float64)
    if not (zs.shape == g.shape == l.shape) or zs.ndim != 1:
        raise ShapeError(
            f"evidence lengths disagree: {zs.shape}, {g.shape}, {l.shape}")
    fused = zs + params.alpha_global * g + params.alpha_local * l
    return fused, int(np.argmax(fused))
