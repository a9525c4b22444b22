"""Group-level aggregation, per-band group ranking, and cross-model deltas."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyInputError, IncompatibleReportError, InvalidConfigError, InvalidInputError
from .importance import PairExplanation

LABEL_FILTERS = ("all", "genuine", "imposter")


@dataclass(frozen=True)
class GroupImportanceMatrix:
    """Mean and dispersion of normalized importances per (group, band).

    ``mean`` and ``stddev`` are E×B arrays, one row per group; ``count``
    holds the number of aggregated pairs per group. Dispersion is the
    population standard deviation, matching the bias metrics convention.
    """

    groups: tuple[str, ...]
    mean: np.ndarray
    stddev: np.ndarray
    count: np.ndarray

    @property
    def num_bands(self) -> int:
        return self.mean.shape[1]


@dataclass(frozen=True)
class RankTable:
    """Per-band ordinal ranking of groups; rank 1 is the highest mean."""

    groups: tuple[str, ...]
    ranks: np.ndarray

    @property
    def num_bands(self) -> int:
        return self.ranks.shape[1]


@dataclass(frozen=True)
class ImportanceDelta:
    """Elementwise subject-minus-baseline change of the mean matrices."""

    groups: tuple[str, ...]
    delta: np.ndarray

    @property
    def num_bands(self) -> int:
        return self.delta.shape[1]


def mean_importance(
    explanations: Sequence[PairExplanation],
    label_filter: str = "all",
) -> GroupImportanceMatrix:
    """Per-group mean of normalized importance vectors.

    Explanations are re-sorted by pair id before reduction, so the result is
    independent of input order. ``label_filter`` keeps only genuine or only
    imposter pairs when requested.
    """
    if label_filter not in LABEL_FILTERS:
        raise InvalidConfigError(f"label_filter must be one of {LABEL_FILTERS}, got {label_filter!r}")
    ordered = sorted(explanations, key=lambda e: e.pair_id)
    if label_filter != "all":
        ordered = [e for e in ordered if e.label == label_filter]
    if not ordered:
        raise EmptyInputError(f"no explanations left after label filter {label_filter!r}")
    num_bands = ordered[0].importance.num_bands
    for explanation in ordered:
        if explanation.importance.num_bands != num_bands:
            raise InvalidInputError(
                f"pair {explanation.pair_id} has {explanation.importance.num_bands} bands, "
                f"expected {num_bands}"
            )
    groups: list[str] = []
    for explanation in ordered:
        if explanation.group not in groups:
            groups.append(explanation.group)
    mean = np.empty((len(groups), num_bands))
    stddev = np.empty((len(groups), num_bands))
    count = np.empty(len(groups), dtype=np.int64)
    for row, group in enumerate(groups):
        vectors = np.stack(
            [e.importance.normalized for e in ordered if e.group == group]
        )
        mean[row] = vectors.mean(axis=0)
        stddev[row] = vectors.std(axis=0)
        count[row] = vectors.shape[0]
    return GroupImportanceMatrix(
        groups=tuple(groups), mean=mean, stddev=stddev, count=count
    )


def rank_groups(matrix: GroupImportanceMatrix) -> RankTable:
    """Rank groups per band by mean importance, descending.

    Ties keep the matrix's group order (stable), so equal means rank in
    listing order.
    """
    num_groups = len(matrix.groups)
    if num_groups < 2:
        raise InvalidInputError(f"ranking needs at least 2 groups, got {num_groups}")
    ranks = np.empty_like(matrix.mean, dtype=np.int64)
    for band in range(matrix.num_bands):
        order = np.argsort(-matrix.mean[:, band], kind="stable")
        ranks[order, band] = np.arange(1, num_groups + 1)
    return RankTable(groups=matrix.groups, ranks=ranks)


def importance_delta(
    subject: GroupImportanceMatrix, baseline: GroupImportanceMatrix
) -> ImportanceDelta:
    """Change in mean importance of a subject model against a baseline model."""
    if subject.groups != baseline.groups:
        raise IncompatibleReportError(
            f"group mismatch: {subject.groups} vs {baseline.groups}"
        )
    if subject.num_bands != baseline.num_bands:
        raise IncompatibleReportError(
            f"band count mismatch: {subject.num_bands} vs {baseline.num_bands}"
        )
    return ImportanceDelta(groups=subject.groups, delta=subject.mean - baseline.mean)
