"""Synthetic feature streams with controlled shift, plus cloud corruptions.

gen_stream builds a class bank from random unit prototypes and emits
interleaved samples whose features drift from the bank by per-sample noise
(sigma) and one fixed run-level shift direction (delta), emulating a
dataset-level domain gap. The seven corruption operators perturb raw point
clouds after normalizing them to zero centroid and unit max radius; their
magnitudes follow an engine-defined severity schedule, not any external
benchmark's exact parameters.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .encoding import ClassBank, EncodedSample
from .errors import DegenerateInputError, ParameterError, ShapeError
from .numeric import l2_normalize, l2_normalize_rows

LOCAL_OUTLIER_STD = 0.1


@dataclass(frozen=True)
class ShiftSpec:
    """Parameters of a synthetic shifted stream."""

    class_count: int = 40
    dim: int = 64
    samples_per_class: int = 25
    intra_class_noise: float = 0.55    # sigma
    shift_magnitude: float = 0.8       # delta, along one fixed direction
    patch_count: int = 8
    patch_noise: float = 0.7
    seed: int = 0

    def __post_init__(self):
        if self.class_count < 2:
            raise ParameterError("need at least 2 classes")
        if self.dim < 1 or self.samples_per_class < 1 or self.patch_count < 1:
            raise ParameterError("dim, samples_per_class, patch_count must be positive")
        if self.intra_class_noise < 0 or self.shift_magnitude < 0 or self.patch_noise < 0:
            raise ParameterError("noise magnitudes must be nonnegative")


def gen_stream(spec: ShiftSpec, tau: float = 0.01) -> tuple[list[EncodedSample], ClassBank]:
    """Generate an interleaved, labeled sample stream and its class bank.

    Deterministic per spec.seed; with zero noise and zero shift every global
    feature equals its class prototype exactly.
    """
    rng = np.random.default_rng(spec.seed)
    protos = l2_normalize_rows(rng.standard_normal((spec.class_count, spec.dim)))
    names = tuple(f"class_{i:03d}" for i in range(spec.class_count))
    bank = ClassBank(embeddings=protos.astype(np.float32), class_names=names, tau=tau)
    shift_dir = l2_normalize(rng.standard_normal(spec.dim))

    samples: list[EncodedSample] = []
    sample_id = 0
    for _ in range(spec.samples_per_class):
        for label in range(spec.class_count):
            raw = (protos[label]
                   + spec.intra_class_noise * rng.standard_normal(spec.dim)
                   + spec.shift_magnitude * shift_dir)
            g = l2_normalize(raw)
            patch_raw = g[None, :] + spec.patch_noise * rng.standard_normal(
                (spec.patch_count, spec.dim))
            patches = l2_normalize_rows(patch_raw)
            samples.append(EncodedSample(
                global_feature=g.astype(np.float32),
                patch_features=patches.astype(np.float32),
                sample_id=sample_id,
                true_label=label))
            sample_id += 1
    return samples, bank


class CorruptionType(str, Enum):
    ADD_GLOBAL = "add_global"
    ADD_LOCAL = "add_local"
    DROP_GLOBAL = "drop_global"
    DROP_LOCAL = "drop_local"
    ROTATE = "rotate"
    SCALE = "scale"
    JITTER = "jitter"


@dataclass(frozen=True)
class SeveritySchedule:
    """Engine-defined corruption magnitudes for severity level 1..5."""

    added_points: int
    drop_fraction: float
    max_angle_deg: float
    scale_limit: float
    jitter_std: float


def severity_schedule(severity: int) -> SeveritySchedule:
    if not 1 <= severity <= 5:
        raise ParameterError(f"severity must be in 1..5, got {severity}")
    return SeveritySchedule(
        added_points=10 * severity,
        drop_fraction=0.05 * severity,
        max_angle_deg=6.0 * severity,
        scale_limit=1.0 + 0.1 * severity,
        jitter_std=0.01 * severity,
    )


def _as_cloud(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 1:
        raise ShapeError(f"expected an (N, 3) cloud, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise DegenerateInputError("cloud has non-finite coordinates")
    return pts


def normalize_cloud(points) -> np.ndarray:
    """Shift to zero centroid and scale the farthest point to radius 1."""
    pts = _as_cloud(points)
    pts = pts - pts.mean(axis=0)
    radius = float(np.linalg.norm(pts, axis=1).max())
    if radius > 0.0:
        pts = pts / radius
    return pts


def add_global_outliers(points, n_added: int, rng: np.random.Generator) -> np.ndarray:
    """Append points drawn uniformly inside the cloud's bounding box."""
    pts = _as_cloud(points)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    extra = rng.uniform(lo, hi, size=(n_added, 3))
    return np.vstack([pts, extra])


def add_local_outliers(points, n_added: int, rng: np.random.Generator,
                       std: float = LOCAL_OUTLIER_STD) -> np.ndarray:
    """Append a Gaussian blob around one randomly chosen existing point."""
    pts = _as_cloud(points)
    center = pts[int(rng.integers(pts.shape[0]))]
    extra = center + rng.normal(0.0, std, size=(n_added, 3))
    return np.vstack([pts, extra])


def drop_global_structure(points, n_dropped: int) -> np.ndarray:
    """Remove the n points farthest from the centroid (lowest index first on ties)."""
    pts = _as_cloud(points)
    n = pts.shape[0]
    if n_dropped >= n:
        raise DegenerateInputError(f"cannot drop {n_dropped} of {n} points")
    if n_dropped <= 0:
        return pts.copy()
    d2 = ((pts - pts.mean(axis=0)) ** 2).sum(axis=1)
    order = np.lexsort((np.arange(n), -d2))
    keep = np.ones(n, dtype=bool)
    keep[order[:n_dropped]] = False
    return pts[keep]


def drop_local_patch(points, n_dropped: int, rng: np.random.Generator) -> np.ndarray:
    """Remove a contiguous nearest-neighbor ball around a random point."""
    pts = _as_cloud(points)
    n = pts.shape[0]
    if n_dropped >= n:
        raise DegenerateInputError(f"cannot drop {n_dropped} of {n} points")
    if n_dropped <= 0:
        return pts.copy()
    center = pts[int(rng.integers(n))]
    d2 = ((pts - center) ** 2).sum(axis=1)
    order = np.lexsort((np.arange(n), d2))
    keep = np.ones(n, dtype=bool)
    keep[order[:n_dropped]] = False
    return pts[keep]


def rotation_matrix(axis, angle_rad: float) -> np.ndarray:
    """Rodrigues rotation matrix about a (normalized) axis."""
    x, y, z = l2_normalize(np.asarray(axis, dtype=np.float64))
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    t = 1.0 - c
    return np.array([
        [c + x * x * t, x * y * t - z * s, x * z * t + y * s],
        [y * x * t + z * s, c + y * y * t, y * z * t - x * s],
        [z * x * t - y * s, z * y * t + x * s, c + z * z * t],
    ])


def random_rotation(points, max_angle_deg: float, rng: np.random.Generator) -> np.ndarray:
    """Rotate about a random axis by an angle uniform in +-max_angle_deg."""
    pts = _as_cloud(points)
    if max_angle_deg < 0:
        raise ParameterError("angle bound must be nonnegative")
    axis = rng.standard_normal(3)
    while np.linalg.norm(axis) == 0.0:
        axis = rng.standard_normal(3)
    angle = math.radians(rng.uniform(-max_angle_deg, max_angle_deg))
    return pts @ rotation_matrix(axis, angle).T


def anisotropic_scale(points, scale_limit: float, rng: np.random.Generator) -> np.ndarray:
    """Scale each axis by an independent factor in [1/s, s]."""
    pts = _as_cloud(points)
    if scale_limit < 1.0:
        raise ParameterError(f"scale limit must be >= 1, got {scale_limit}")
    factors = rng.uniform(1.0 / scale_limit, scale_limit, size=3)
    return pts * factors


def jitter_points(points, std: float, rng: np.random.Generator) -> np.ndarray:
    """Add isotropic Gaussian noise to every point."""
    pts = _as_cloud(points)
    if std < 0:
        raise ParameterError("jitter std must be nonnegative")
    return pts + rng.normal(0.0, std, size=pts.shape)


def corrupt(points, kind: CorruptionType | str, severity: int, seed) -> np.ndarray:
    """Apply one atomic corruption at the given severity, deterministically.

    The cloud is normalized (zero centroid, max radius 1) first, so severity
    magnitudes are scale-free; the result stays in that normalized frame.
    """
    kind = CorruptionType(kind)
    sched = severity_schedule(severity)
    pts = normalize_cloud(points)
    n = pts.shape[0]
    rng = np.random.default_rng(seed)
    if kind is CorruptionType.ADD_GLOBAL:
        return add_global_outliers(pts, sched.added_points, rng)
    if kind is CorruptionType.ADD_LOCAL:
        return add_local_outliers(pts, sched.added_points, rng)
    if kind is CorruptionType.DROP_GLOBAL:
        return drop_global_structure(pts, max(1, round(sched.drop_fraction * n)))
    if kind is CorruptionType.DROP_LOCAL:
        return drop_local_patch(pts, max(1, round(sched.drop_fraction * n)), rng)
    if kind is CorruptionType.ROTATE:
        return random_rotation(pts, sched.max_angle_deg, rng)
    if kind is CorruptionType.SCALE:
        return anisotropic_scale(pts, sched.scale_limit, rng)
    return jitter_points(pts, sched.jitter_std, rng)
