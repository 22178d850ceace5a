"""Training-free streaming test-time adaptation over embedding streams.

An entropy-gated hierarchical cache stores global object features and
clustered local-part features of confident online samples; retrieval
affinities against the cache re-weight cached pseudo-labels and are fused
with zero-shot probabilities to adapt predictions under distribution shift.
"""

from .adapt import AdaptParams, affinity, fuse, global_adapt, local_adapt
from .cache import (AdmissionOutcome, AdmissionStatus, CacheSizeBreakdown,
                    CacheSnapshot, GlobalFingerprint, HierarchicalCache,
                    LocalFingerprint, param_count)
from .datagen import (CorruptionType, ShiftSpec, corrupt, gen_stream,
                      normalize_cloud, severity_schedule)
from .encoding import (ClassBank, EncodedSample, PatchSet, encode_cloud, fps,
                       knn_group, toy_encode, zero_shot_logits)
from .errors import (ConsistencyError, DegenerateInputError, EngineError,
                     FormatError, ParameterError, ShapeError)
from .fileio import (load_bank, load_stream, save_bank, save_stream,
                     write_report_csv, write_report_summary)
from .numeric import (cosine_sim, l2_normalize, l2_normalize_rows,
                      shannon_entropy, softmax, top_k_entropy)
from .partition import PartSummary, kmeans_cluster, summarize_parts
from .pipeline import (Engine, EngineConfig, Mode, ModeComparison, RunReport,
                       StepRecord, compare_modes, run_stream)

__version__ = "0.1.0"

__all__ = [
    "AdaptParams", "AdmissionOutcome", "AdmissionStatus", "CacheSizeBreakdown",
    "CacheSnapshot", "ClassBank", "ConsistencyError", "CorruptionType",
    "DegenerateInputError", "EncodedSample", "Engine", "EngineConfig",
    "EngineError", "FormatError", "GlobalFingerprint", "HierarchicalCache",
    "LocalFingerprint", "Mode", "ModeComparison", "ParameterError",
    "PartSummary", "PatchSet", "RunReport", "ShapeError", "ShiftSpec",
    "StepRecord", "affinity", "compare_modes", "corrupt", "cosine_sim",
    "encode_cloud", "fps", "fuse", "gen_stream", "global_adapt",
    "kmeans_cluster", "knn_group", "l2_normalize", "l2_normalize_rows",
    "load_bank", "load_stream", "local_adapt", "normalize_cloud",
    "param_count", "run_stream", "save_bank", "save_stream",
    "severity_schedule", "shannon_entropy", "softmax", "summarize_parts",
    "top_k_entropy", "toy_encode", "write_report_csv", "write_report_summary",
    "zero_shot_logits",
]
