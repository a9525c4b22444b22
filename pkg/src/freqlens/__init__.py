"""Frequency-band importance and bias auditing for face verification models."""

from .aggregate import (
    GroupImportanceMatrix,
    ImportanceDelta,
    RankTable,
    importance_delta,
    mean_importance,
    rank_groups,
)
from .dataset import PairList, PairRecord, load_image, load_pairs
from .embedder import (
    BackendDescriptor,
    PrecomputedEmbedder,
    ReferenceEmbedder,
    SubprocessEmbedder,
    batch_embed,
    create_backend,
    parse_backend,
    similarity,
)
from .importance import (
    ImportanceVector,
    PairExplanation,
    explain_pair,
    explain_pairs,
    normalize,
    raw_importance,
)
from .metrics import (
    BiasReport,
    VerificationResult,
    best_threshold_accuracy,
    bias_report,
    bias_summary,
    group_verification,
)
from .report import (
    AuditReport,
    read_audit_json,
    read_pair_csv,
    render_distribution_svg,
    render_ranking_svg,
    write_audit_json,
    write_pair_csv,
)
from .spectral import (
    BandMask,
    BandPartition,
    SpatialImage,
    Spectrum,
    band_energy,
    build_partition,
    forward_dft,
    inverse_dft,
    mask_band,
    reconstruct_without_band,
)
from .synthfix import SplitMix64, SyntheticSpec, generate_fixture, merge_fixtures

__version__ = "0.1.0"

__all__ = [
    "AuditReport",
    "BackendDescriptor",
    "BandMask",
    "BandPartition",
    "BiasReport",
    "GroupImportanceMatrix",
    "ImportanceDelta",
    "ImportanceVector",
    "PairExplanation",
    "PairList",
    "PairRecord",
    "PrecomputedEmbedder",
    "RankTable",
    "ReferenceEmbedder",
    "SpatialImage",
    "Spectrum",
    "SplitMix64",
    "SubprocessEmbedder",
    "SyntheticSpec",
    "VerificationResult",
    "band_energy",
    "batch_embed",
    "best_threshold_accuracy",
    "bias_report",
    "bias_summary",
    "build_partition",
    "create_backend",
    "explain_pair",
    "explain_pairs",
    "forward_dft",
    "generate_fixture",
    "group_verification",
    "importance_delta",
    "inverse_dft",
    "load_image",
    "load_pairs",
    "mask_band",
    "mean_importance",
    "merge_fixtures",
    "normalize",
    "parse_backend",
    "rank_groups",
    "raw_importance",
    "read_audit_json",
    "read_pair_csv",
    "reconstruct_without_band",
    "render_distribution_svg",
    "render_ranking_svg",
    "similarity",
    "write_audit_json",
    "write_pair_csv",
]
