"""Class banks, zero-shot scoring, and the geometric front end.

The front end turns a raw point cloud (an (N, 3) float array) into an
EncodedSample: farthest point sampling picks key points, kNN grouping forms
recentred local patches, and a fixed seeded random projection stands in for
a learned patch encoder. Precomputed feature streams skip this path entirely
and enter as EncodedSample records.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, DegenerateInputError, ParameterError, ShapeError
from .numeric import l2_normalize, l2_normalize_rows, shannon_entropy, softmax

DEFAULT_TAU = 0.01
DEFAULT_KEY_POINTS = 64
DEFAULT_NEIGHBORS = 32
DEFAULT_ENCODE_DIM = 64


@dataclass(frozen=True)
class ClassBank:
    """Per-class embedding rows a query is scored against.

    embeddings: (C, d) float32, one unit-norm row per class.
    class_names: C unique names.
    tau: softmax temperature used for zero-shot probabilities.
    """

    embeddings: np.ndarray
    class_names: tuple[str, ...]
    tau: float = DEFAULT_TAU

    def __post_init__(self):
        emb = np.ascontiguousarray(np.asarray(self.embeddings), dtype=np.float32)
        if emb.ndim != 2:
            raise ShapeError(f"bank embeddings must be 2-D, got shape {emb.shape}")
        if emb.shape[0] < 2:
            raise ParameterError("a class bank needs at least 2 classes")
        if len(self.class_names) != emb.shape[0]:
            raise ConsistencyError(
                f"bank has {emb.shape[0]} rows but {len(self.class_names)} class names")
        if len(set(self.class_names)) != len(self.class_names):
            raise ParameterError("class names must be unique")
        norms = np.linalg.norm(emb.astype(np.float64), axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-5):
            raise ParameterError("bank rows must be unit-norm within 1e-5")
        object.__setattr__(self, "embeddings", emb)
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if self.tau <= 0:
            raise ParameterError(f"tau must be positive, got {self.tau}")

    @property
    def num_classes(self) -> int:
        return self.embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]


@dataclass
class PatchSet:
    """M local patches of a cloud, each recentred on its key point.

    key_points: (M,) distinct indices into the source cloud.
    patches: (M, k, 3); the first point of each patch is its key point,
    so it is always the zero vector after recentring.
    """

    key_points: np.ndarray
    patches: np.ndarray


@dataclass
class EncodedSample:
    """One test item: a global feature, its patch features, and metadata."""

    global_feature: np.ndarray       # (d,) float32, unit norm
    patch_features: np.ndarray       # (P, d) float32, unit-norm rows
    sample_id: int
    true_label: int | None = None


def zero_shot_logits(query: np.ndarray, bank: ClassBank) -> tuple[np.ndarray, int, float]:
    """Score a unit-norm query against a class bank.

    Returns (probs, label, entropy): the softmax over cosine similarities
    at the bank's temperature, the argmax class (lowest index on ties), and
    the Shannon entropy of the probabilities.
    """
    q = np.asarray(query, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != bank.dim:
        raise ShapeError(f"query shape {q.shape} does not match bank dim {bank.dim}")
    sims = np.clip(bank.embeddings.astype(np.float64) @ q, -1.0, 1.0)
    probs = softmax(sims, bank.tau)
    label = int(np.argmax(sims))
    return probs, label, shannon_entropy(probs)


def _as_cloud(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise ShapeError(f"point cloud must be (N, dim) with N >= 1, got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise DegenerateInputError("point cloud has non-finite coordinates")
    return pts


def fps(cloud: np.ndarray, count: int) -> np.ndarray:
    """Farthest point sampling: deterministic greedy maximin key points.

    Starts at index 0; each subsequent pick maximizes the Euclidean distance
    to the already-selected set, breaking ties toward the lowest index.
    """
    pts = _as_cloud(cloud)
    n = pts.shape[0]
    if not 1 <= count <= n:
        raise ParameterError(f"sample count must be in [1, {n}], got {count}")
    chosen = np.empty(count, dtype=np.int64)
    chosen[0] = 0
    d2 = ((pts - pts[0]) ** 2).sum(axis=1)
    for i in range(1, count):
        nxt = int(np.argmax(d2))
        chosen[i] = nxt
        d2 = np.minimum(d2, ((pts - pts[nxt]) ** 2).sum(axis=1))
    return chosen


def knn_group(cloud: np.ndarray, key_indices: np.ndarray, k: int) -> PatchSet:
    """Group the k nearest neighbors of each key point into a recentred patch.

    Neighbor order is by distance, then index; the key point itself (distance
    zero) leads its patch. Patch coordinates have the key point subtracted.
    """
    pts = _as_cloud(cloud)
    n = pts.shape[0]
    if not 1 <= k <= n:
        raise ParameterError(f"neighbor count must be in [1, {n}], got {k}")
    keys = np.asarray(key_indices, dtype=np.int64)
    if keys.ndim != 1 or keys.size == 0:
        raise ShapeError("key_indices must be a nonempty 1-D index array")
    if np.any(keys < 0) or np.any(keys >= n):
        raise ParameterError("key index out of range")
    if len(set(keys.tolist())) != keys.size:
        raise ParameterError("key indices must be distinct")

    patches = np.empty((keys.size, k, pts.shape[1]), dtype=np.float64)
    order_all = np.arange(n)
    for j, key in enumerate(keys):
        d2 = ((pts - pts[key]) ** 2).sum(axis=1)
        order = np.lexsort((order_all, d2))
        members = order[:k]
        pos = np.nonzero(members == key)[0]
        if pos.size:
            # rotate the key point to the front, keeping the rest in order
            members = np.concatenate(([key], np.delete(members, pos[0])))
        else:
            # only reachable when >= k points coincide with the key point
            members = np.concatenate(([key], members[: k - 1]))
        patches[j] = pts[members] - pts[key]
    return PatchSet(key_points=keys, patches=patches)


def toy_encode(patchset: PatchSet, proj_seed: int, dim: int = DEFAULT_ENCODE_DIM,
               sample_id: int = 0, true_label: int | None = None) -> EncodedSample:
    """Encode patches with a fixed seeded random projection.

    Each patch is flattened, given a constant bias channel (so even a
    degenerate all-zero patch projects to a nonzero feature), projected to
    `dim`, and normalized. The global feature is the normalized mean of the
    patch features. Output is a pure function of (patchset, proj_seed, dim).
    """
    patches = np.asarray(patchset.patches, dtype=np.float64)
    if patches.ndim != 3 or patches.shape[0] == 0:
        raise DegenerateInputError("patch set is empty")
    if dim < 1:
        raise ParameterError(f"feature dim must be positive, got {dim}")
    m = patches.shape[0]
    flat = patches.reshape(m, -1)
    aug = np.concatenate([flat, np.ones((m, 1))], axis=1)
    rng = np.random.default_rng(proj_seed)
    proj = rng.standard_normal((aug.shape[1], dim))
    feats = l2_normalize_rows(aug @ proj)
    global_feat = l2_normalize(feats.mean(axis=0))
    return EncodedSample(
        global_feature=global_feat.astype(np.float32),
        patch_features=feats.astype(np.float32),
        sample_id=sample_id,
        true_label=true_label,
    )


def encode_cloud(cloud: np.ndarray, key_points: int = DEFAULT_KEY_POINTS,
                 neighbors: int = DEFAULT_NEIGHBORS, dim: int = DEFAULT_ENCODE_DIM,
                 proj_seed: int = 0, sample_id: int = 0,
                 true_label: int | None = None) -> EncodedSample:
    """Full front end: FPS key points -> kNN patches -> toy projection."""
    keys = fps(cloud, key_points)
    patchset = knn_group(cloud, keys, neighbors)
    return toy_encode(patchset, proj_seed, dim=dim, sample_id=sample_id,
                      true_label=true_label)
