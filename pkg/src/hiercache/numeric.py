"""Dense vector primitives and entropy helpers shared by all engine modules.

Conventions: embeddings are numpy arrays whose rows are unit-norm feature
vectors. Storage may be float32, but every similarity/entropy computation
here runs in float64. All functions are pure and safe to call concurrently.
"""

import numpy as np

from .errors import DegenerateInputError, ParameterError, ShapeError


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """Scale a vector to unit Euclidean norm, preserving its direction.

    Raises DegenerateInputError for zero or non-finite input.
    """
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise DegenerateInputError("vector has non-finite entries")
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise DegenerateInputError("cannot normalize a zero vector")
    return v / norm


def l2_normalize_rows(mat: np.ndarray) -> np.ndarray:
    """Row-wise l2_normalize for a 2-D array."""
    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim != 2:
        raise ShapeError(f"expected a 2-D array, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise DegenerateInputError("matrix has non-finite entries")
    norms = np.linalg.norm(mat, axis=1)
    if np.any(norms == 0.0):
        raise DegenerateInputError("cannot normalize a zero row")
    return mat / norms[:, None]


def cosine_sim(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two unit-norm vectors (their dot product).

    The result is clamped to [-1, 1] to absorb floating-point drift.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.clip(np.dot(a, b), -1.0, 1.0))


def softmax(scores: np.ndarray, tau: float) -> np.ndarray:
    """Temperature softmax over a score vector.

    Numerically stable via max subtraction; the output sums to 1 and the
    argmax matches the input argmax for every tau > 0.
    """
    if tau <= 0:
        raise ParameterError(f"temperature must be positive, got {tau}")
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise DegenerateInputError("scores have non-finite entries")
    z = scores / tau
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def shannon_entropy(p: np.ndarray) -> float:
    """Entropy -sum(p * ln p) of a probability vector, with 0*ln0 := 0."""
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0.0]
    return float(-(nz * np.log(nz)).sum())


def top_k_entropy(p: np.ndarray, k: int) -> float:
    """Entropy of the k largest probabilities after renormalizing them to 1.

    Bounded by ln k; equals shannon_entropy(p) when k covers the full vector.
    """
    p = np.asarray(p, dtype=np.float64)
    if not 1 <= k <= p.size:
        raise ParameterError(f"k must be in [1, {p.size}], got {k}")
    top = np.partition(p, p.size - k)[p.size - k:]
    mass = top.sum()
    if mass <= 0.0:
        return 0.0
    return shannon_entropy(top / mass)
