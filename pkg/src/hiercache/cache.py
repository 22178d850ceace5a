"""Per-class bounded stores of global and local fingerprints.

Admission keeps the global and local stores coupled: a sample's part centers
are stored if and only if its global fingerprint is stored, under the same
slot. When a class is at capacity, the resident with the highest prediction
entropy is replaced in place, and only by a strictly lower-entropy arrival.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConsistencyError, ParameterError, ShapeError


@dataclass(frozen=True)
class GlobalFingerprint:
    """(feature, pseudo-label, entropy) triple of one admitted sample."""

    feature: np.ndarray      # (d,) float32, unit norm
    label: int
    entropy: float
    sample_id: int


@dataclass(frozen=True)
class LocalFingerprint:
    """(part centers, pseudo-label) pair mirroring a global admission."""

    parts: np.ndarray        # (m, d) float32, unit-norm rows
    label: int
    sample_id: int


class AdmissionStatus(Enum):
    INSERTED = "inserted"
    REPLACED = "replaced"
    REJECTED = "rejected"


@dataclass(frozen=True)
class AdmissionOutcome:
    status: AdmissionStatus
    evicted_sample_id: int | None = None


@dataclass
class CacheSnapshot:
    """Flattened cache matrices in deterministic class-major, slot order.

    part_entry_index maps each local row to the global entry row it belongs
    to, so local row i carries global_onehot[part_entry_index[i]] as label.
    """

    global_features: np.ndarray    # (n_g, d) float32
    global_labels: np.ndarray      # (n_g,) int64
    global_onehot: np.ndarray      # (n_g, C) float64
    local_features: np.ndarray     # (n_l, d) float32, n_l = m * n_g
    local_onehot: np.ndarray       # (n_l, C) float64
    part_entry_index: np.ndarray   # (n_l,) int64
    class_count: int
    dim: int
    parts_per_entry: int


@dataclass
class _Slot:
    gf: GlobalFingerprint
    lf: LocalFingerprint
    seq: int


class HierarchicalCache:
    """Entropy-gated hierarchical store with per-class capacity."""

    def __init__(self, class_count: int, capacity_per_class: int,
                 parts_per_entry: int, dim: int):
        for name, value in (("class_count", class_count),
                            ("capacity_per_class", capacity_per_class),
                            ("parts_per_entry", parts_per_entry),
                            ("dim", dim)):
            if value < 1:
                raise ParameterError(f"{name} must be positive, got {value}")
        self.class_count = class_count
        self.capacity_per_class = capacity_per_class
        self.parts_per_entry = parts_per_entry
        self.dim = dim
        self._slots: list[list[_Slot]] = [[] for _ in range(class_count)]
        self._seq = 0

    def count(self, label: int) -> int:
        """Number of resident fingerprints for a class."""
        self._check_label(label)
        return len(self._slots[label])

    def total_entries(self) -> int:
        return sum(len(s) for s in self._slots)

    def entries(self, label: int) -> list[tuple[GlobalFingerprint, LocalFingerprint]]:
        """Resident (global, local) pairs of a class, in slot order."""
        self._check_label(label)
        return [(s.gf, s.lf) for s in self._slots[label]]

    def admit(self, gf: GlobalFingerprint, lf: LocalFingerprint) -> AdmissionOutcome:
        """Insert, replace, or reject a coupled fingerprint pair.

        Below capacity the pair is appended. At capacity, the resident with
        the highest entropy (oldest first among equals) is replaced in both
        stores, but only if the arrival's entropy is strictly lower;
        otherwise the cache is left untouched.
        """
        self._validate_pair(gf, lf)
        slots = self._slots[gf.label]
        if len(slots) < self.capacity_per_class:
            slots.append(_Slot(gf=gf, lf=lf, seq=self._next_seq()))
            return AdmissionOutcome(AdmissionStatus.INSERTED)

        worst = max(range(len(slots)),
                    key=lambda i: (slots[i].gf.entropy, -slots[i].seq))
        h_max = slots[worst].gf.entropy
        if gf.entropy < h_max:
            evicted = slots[worst].gf.sample_id
            slots[worst] = _Slot(gf=gf, lf=lf, seq=self._next_seq())
            return AdmissionOutcome(AdmissionStatus.REPLACED, evicted_sample_id=evicted)
        return AdmissionOutcome(AdmissionStatus.REJECTED)

    def snapshot(self) -> CacheSnapshot:
        """Materialize the cache as matrices, in class-major slot order."""
        g_feats, g_labels, l_feats, entry_index = [], [], [], []
        entry_row = 0
        for label in range(self.class_count):
            for slot in self._slots[label]:
                g_feats.append(slot.gf.feature)
                g_labels.append(label)
                l_feats.append(slot.lf.parts)
                entry_index.extend([entry_row] * self.parts_per_entry)
                entry_row += 1
        n_g = entry_row
        if n_g == 0:
            return CacheSnapshot(
                global_features=np.zeros((0, self.dim), dtype=np.float32),
                global_labels=np.zeros(0, dtype=np.int64),
                global_onehot=np.zeros((0, self.class_count), dtype=np.float64),
                local_features=np.zeros((0, self.dim), dtype=np.float32),
                local_onehot=np.zeros((0, self.class_count), dtype=np.float64),
                part_entry_index=np.zeros(0, dtype=np.int64),
                class_count=self.class_count, dim=self.dim,
                parts_per_entry=self.parts_per_entry)

        labels = np.asarray(g_labels, dtype=np.int64)
        onehot = np.zeros((n_g, self.class_count), dtype=np.float64)
        onehot[np.arange(n_g), labels] = 1.0
        part_index = np.asarray(entry_index, dtype=np.int64)
        return CacheSnapshot(
            global_features=np.vstack(g_feats),
            global_labels=labels,
            global_onehot=onehot,
            local_features=np.vstack(l_feats),
            local_onehot=onehot[part_index],
            part_entry_index=part_index,
            class_count=self.class_count, dim=self.dim,
            parts_per_entry=self.parts_per_entry)

    def check_invariants(self) -> None:
        """Assert the structural invariants; used by tests after mutations."""
        for label in range(self.class_count):
            slots = self._slots[label]
            assert len(slots) <= self.capacity_per_class
            gids = [s.gf.sample_id for s in slots]
            lids = [s.lf.sample_id for s in slots]
            assert gids == lids
            for s in slots:
                assert s.gf.label == label and s.lf.label == label
        assert self.total_entries() <= self.class_count * self.capacity_per_class

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def _check_label(self, label: int) -> None:
        if not 0 <= label < self.class_count:
            raise ParameterError(
                f"class index {label} out of range [0, {self.class_count})")

    def _validate_pair(self, gf: GlobalFingerprint, lf: LocalFingerprint) -> None:
        self._check_label(gf.label)
        if gf.label != lf.label:
            raise ConsistencyError(
                f"global/local labels disagree: {gf.label} vs {lf.label}")
        if gf.sample_id != lf.sample_id:
            raise ConsistencyError(
                f"global/local sample ids disagree: {gf.sample_id} vs {lf.sample_id}")
        feature = np.asarray(gf.feature)
        if feature.shape != (self.dim,):
            raise ShapeError(f"global feature shape {feature.shape}, expected ({self.dim},)")
        parts = np.asarray(lf.parts)
        if parts.shape != (self.parts_per_entry, self.dim):
            raise ShapeError(
                f"part matrix shape {parts.shape}, expected "
                f"({self.parts_per_entry}, {self.dim})")
        if not np.isfinite(gf.entropy) or gf.entropy < 0:
            raise ParameterError(f"entropy must be finite and nonnegative, got {gf.entropy}")


@dataclass(frozen=True)
class CacheSizeBreakdown:
    """Scalar-count accounting of a full hierarchical cache."""

    global_features: int   # C * K * d
    global_labels: int     # C * K
    global_entropies: int  # C * K
    local_features: int    # C * K * m * d
    local_labels: int      # C * K * m
    total: int


def param_count(class_count: int, capacity_per_class: int,
                parts_per_entry: int, dim: int) -> CacheSizeBreakdown:
    """Exact integer size of a full cache, itemized per stored array."""
    for name, value in (("class_count", class_count),
                        ("capacity_per_class", capacity_per_class),
                        ("parts_per_entry", parts_per_entry),
                        ("dim", dim)):
        if value < 1:
            raise ParameterError(f"{name} must be positive, got {value}")
    ck = class_count * capacity_per_class
    global_features = ck * dim
    global_labels = ck
    global_entropies = ck
    local_features = ck * parts_per_entry * dim
    local_labels = ck * parts_per_entry
    return CacheSizeBreakdown(
        global_features=global_features,
        global_labels=global_labels,
        global_entropies=global_entropies,
        local_features=local_features,
        local_labels=local_labels,
        total=(global_features + global_labels + global_entropies +
               local_features + local_labels),
    )
