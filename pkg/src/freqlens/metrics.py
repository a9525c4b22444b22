"""Per-group verification accuracy and bias summary metrics (Mean/STD/SER)."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInputError

GENUINE = "genuine"
IMPOSTER = "imposter"


@dataclass(frozen=True)
class VerificationResult:
    """Best-threshold accuracy (in percent) of one group's pair list."""

    group: str
    threshold: float
    accuracy: float
    num_pairs: int

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 100.0:
            raise InvalidInputError(f"accuracy must be in [0, 100], got {self.accuracy}")
        if self.num_pairs < 1:
            raise InvalidInputError(f"num_pairs must be at least 1, got {self.num_pairs}")


@dataclass(frozen=True)
class BiasReport:
    """Per-group accuracies with their Mean, STD, and Skewed Error Ratio.

    STD is the population standard deviation of the group accuracies. SER is
    the highest group error rate divided by the lowest; 1 means unbiased,
    ``inf`` flags a group with zero error (accuracy 100%).
    """

    results: tuple[VerificationResult, ...]
    mean_accuracy: float
    std: float
    ser: float


def best_threshold_accuracy(scores: Iterable[tuple[float, str]]) -> tuple[float, float]:
    """Best single decision threshold and its accuracy in percent.

    Predicts genuine iff similarity >= threshold. Candidates are the observed
    scores plus +inf (reject everything); among equally accurate candidates
    the smallest threshold wins.
    """
    genuine = []
    imposter = []
    for value, label in scores:
        if label == GENUINE:
            genuine.append(value)
        elif label == IMPOSTER:
            imposter.append(value)
        else:
            raise InvalidInputError(f"unknown label {label!r}")
    if not genuine or not imposter:
        raise InvalidInputError("need at least one genuine and one imposter score")
    genuine = np.sort(np.asarray(genuine, dtype=np.float64))
    imposter = np.sort(np.asarray(imposter, dtype=np.float64))
    candidates = np.concatenate(
        [np.unique(np.concatenate([genuine, imposter])), [np.inf]]
    )
    genuine_accepted = genuine.size - np.searchsorted(genuine, candidates, side="left")
    imposter_rejected = np.searchsorted(imposter, candidates, side="left")
    correct = genuine_accepted + imposter_rejected
    best = int(np.argmax(correct))  # first maximum = smallest threshold
    total = genuine.size + imposter.size
    return float(candidates[best]), float(correct[best]) / total * 100.0


def group_verification(
    rows: Iterable[tuple[str, str, float]]
) -> list[VerificationResult]:
    """Best-threshold accuracy per group, thresholds chosen independently.

    ``rows`` are (group, label, similarity) triples; groups keep their
    first-appearance order. Every group must contain both labels.
    """
    by_group: dict[str, list[tuple[float, str]]] = {}
    for group, label, value in rows:
        by_group.setdefault(group, []).append((value, label))
    results = []
    for group, scores in by_group.items():
        labels = {label for _, label in scores}
        if labels != {GENUINE, IMPOSTER}:
            raise InvalidInputError(
                f"group {group!r} needs both genuine and imposter pairs, has {sorted(labels)}"
            )
        threshold, accuracy = best_threshold_accuracy(scores)
        results.append(
            VerificationResult(
                group=group, threshold=threshold, accuracy=accuracy, num_pairs=len(scores)
            )
        )
    return results


def bias_summary(accuracies: Sequence[float]) -> tuple[float, float, float]:
    """Mean, population STD, and SER of externally computed accuracies (in %)."""
    if len(accuracies) < 2:
        raise InvalidInputError(f"bias summary needs at least 2 groups, got {len(accuracies)}")
    values = np.asarray(accuracies, dtype=np.float64)
    if not np.isfinite(values).all() or (values < 0).any() or (values > 100).any():
        raise InvalidInputError("accuracies must be percentages in [0, 100]")
    errors = 100.0 - values
    if errors.min() == 0.0:
        warnings.warn(
            "a group has accuracy 100%: SER is undefined and reported as infinity",
            stacklevel=2,
        )
        ser = math.inf
    else:
        ser = float(errors.max() / errors.min())
    return float(values.mean()), float(values.std()), ser


def bias_report(results: Sequence[VerificationResult]) -> BiasReport:
    """Summarize per-group verification results into Mean, STD, and SER."""
    mean, std, ser = bias_summary([r.accuracy for r in results])
    return BiasReport(results=tuple(results), mean_accuracy=mean, std=std, ser=ser)
