"""Per-pair frequency-band importance.

For each band, both images of a pair are masked at that band, re-embedded,
and the absolute change of the pair's similarity against the unmasked
baseline is recorded. Raw deltas are then scaled to sum to one.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dataset import PairRecord, load_image
from .embedder import BackendDescriptor, create_backend, similarity
from .errors import FreqlensError, InvalidInputError, PairProcessingError
from .spectral import (
    BandPartition,
    SpatialImage,
    forward_dft,
    reconstruct_without_band,
)


@dataclass(frozen=True)
class ImportanceVector:
    """Raw per-band similarity deltas and their unit-sum normalization."""

    raw: np.ndarray
    normalized: np.ndarray

    @property
    def num_bands(self) -> int:
        return self.raw.shape[0]


@dataclass(frozen=True)
class PairExplanation:
    """Everything the aggregation stage needs about one explained pair."""

    pair_id: int
    group: str
    label: str
    base_similarity: float
    importance: ImportanceVector


def raw_importance(
    probe: SpatialImage,
    reference: SpatialImage,
    partition: BandPartition,
    backend,
) -> tuple[float, np.ndarray]:
    """Unmasked pair similarity and per-band absolute similarity deltas.

    Each image's spectrum is computed once and reused across bands; the
    per-band reconstruction is numerically identical to masking from scratch.
    """
    for name, image in (("probe", probe), ("reference", reference)):
        if (image.height, image.width) != (partition.height, partition.width):
            raise InvalidInputError(
                f"{name} image is {image.height}×{image.width} but partition covers "
                f"{partition.height}×{partition.width}"
            )
    base = similarity(backend.embed(probe), backend.embed(reference))
    probe_spectrum = forward_dft(probe)
    reference_spectrum = forward_dft(reference)
    deltas = np.empty(partition.num_bands, dtype=np.float64)
    for band in range(partition.num_bands):
        try:
            masked_probe = reconstruct_without_band(probe_spectrum, partition, band)
            masked_reference = reconstruct_without_band(reference_spectrum, partition, band)
            masked = similarity(backend.embed(masked_probe), backend.embed(masked_reference))
        except FreqlensError as exc:
            raise type(exc)(f"band {band}: {exc}") from exc
        deltas[band] = abs(base - masked)
    return base, deltas


def normalize(raw: np.ndarray) -> np.ndarray:
    """Scale non-negative deltas to sum to 1; an all-zero vector becomes uniform."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 1 or raw.size == 0:
        raise InvalidInputError(f"importance vector must be 1-D and non-empty, got {raw.shape}")
    if not np.isfinite(raw).all():
        raise InvalidInputError("importance vector contains non-finite entries")
    if (raw < 0).any():
        raise InvalidInputError("importance vector contains negative entries")
    total = raw.sum()
    if total == 0.0:
        return np.full(raw.size, 1.0 / raw.size)
    return raw / total


def explain_pair(
    record: PairRecord,
    partition: BandPartition,
    backend,
    images_root: str | Path = ".",
) -> PairExplanation:
    """Load a pair's images and compute its importance vector.

    Any dataset, spectral, or backend failure is re-raised tagged with the
    pair id so batch runs can name the offending pair.
    """
    root = Path(images_root)
    try:
        expected = (partition.height, partition.width)
        probe = load_image(root / record.probe_path, expected=expected)
        reference = load_image(root / record.reference_path, expected=expected)
        base, raw = raw_importance(probe, reference, partition, backend)
    except (FreqlensError, OSError) as exc:
        raise PairProcessingError(f"pair {record.pair_id}: {exc}", pair_id=record.pair_id) from exc
    return PairExplanation(
        pair_id=record.pair_id,
        group=record.group,
        label=record.label,
        base_similarity=base,
        importance=ImportanceVector(raw=raw, normalized=normalize(raw)),
    )


_worker_state: dict = {}


def _init_worker(descriptor: BackendDescriptor, partition: BandPartition, images_root: str):
    _worker_state["backend"] = create_backend(descriptor)
    _worker_state["partition"] = partition
    _worker_state["images_root"] = images_root


def _explain_in_worker(record: PairRecord) -> PairExplanation:
    return explain_pair(
        record,
        _worker_state["partition"],
        _worker_state["backend"],
        _worker_state["images_root"],
    )


def explain_pairs(
    records: Sequence[PairRecord],
    partition: BandPartition,
    descriptor: BackendDescriptor,
    images_root: str | Path = ".",
    workers: int = 1,
    progress=None,
) -> list[PairExplanation]:
    """Explain many pairs, in parallel when asked.

    Pairs are independent: with a reference or precomputed backend each
    worker process builds its own backend from the descriptor. A subprocess
    backend keeps a single child connection, so parallelism falls back to
    threads that share it. Results always come back in pair-id order.

    ``progress`` is an optional callable invoked as ``progress(done, total)``.
    """
    records = sorted(records, key=lambda r: r.pair_id)
    total = len(records)

    def note(done: int):
        if progress is not None:
            progress(done, total)

    results: list[PairExplanation] = []
    if workers <= 1 or total <= 1:
        backend = create_backend(descriptor)
        try:
            for done, record in enumerate(records, start=1):
                results.append(explain_pair(record, partition, backend, images_root))
                note(done)
        finally:
            if hasattr(backend, "close"):
                backend.close()
    elif descriptor.kind == "subprocess":
        backend = create_backend(descriptor)
        try:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = [
                    pool.submit(explain_pair, record, partition, backend, images_root)
                    for record in records
                ]
                for done, future in enumerate(futures, start=1):
                    results.append(future.result())
                    note(done)
        finally:
            backend.close()
    else:
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=_init_worker,
            initargs=(descriptor, partition, str(images_root)),
        ) as pool:
            chunk = max(1, total // (workers * 4))
            for done, explanation in enumerate(
                pool.map(_explain_in_worker, records, chunksize=chunk), start=1
            ):
                results.append(explanation)
                note(done)
    return sorted(results, key=lambda e: e.pair_id)
