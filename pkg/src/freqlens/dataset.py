"""Verification pair lists and conforming image loading.

The pair-list format is a strict UTF-8 CSV: header exactly
``probe,reference,label,group``, then four comma-separated fields per row
(paths must not contain commas); label is ``genuine`` or ``imposter``.
Images must arrive pre-aligned; there is no resizing or face detection here.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ImageDecodeError, ImageShapeError, PairListParseError
from .spectral import SpatialImage

PAIR_CSV_HEADER = "probe,reference,label,group"
LABELS = ("genuine", "imposter")


@dataclass(frozen=True)
class PairRecord:
    """One verification pair with its demographic group label."""

    pair_id: int
    probe_path: str
    reference_path: str
    label: str
    group: str


@dataclass(frozen=True)
class PairList:
    """All pairs of a protocol file, with groups in first-appearance order."""

    records: tuple[PairRecord, ...]
    groups: tuple[str, ...]


def _build_pair_list(records: Sequence[PairRecord]) -> PairList:
    groups: list[str] = []
    for record in records:
        if record.group not in groups:
            groups.append(record.group)
    return PairList(records=tuple(records), groups=tuple(groups))


def load_pairs(path: str | Path) -> PairList:
    """Parse a pair-list CSV; pair ids are assigned by row order from 0."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or lines[0] != PAIR_CSV_HEADER:
        raise PairListParseError(
            f"line 1: header must be exactly {PAIR_CSV_HEADER!r}", line=1
        )
    records = []
    for line_no, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != 4:
            raise PairListParseError(
                f"line {line_no}: expected 4 comma-separated fields, got {len(fields)}",
                line=line_no,
            )
        probe, reference, label, group = fields
        if not probe or not reference:
            raise PairListParseError(f"line {line_no}: empty path", line=line_no)
        if label not in LABELS:
            raise PairListParseError(
                f"line {line_no}: label must be one of {LABELS}, got {label!r}",
                line=line_no,
            )
        if not group:
            raise PairListParseError(f"line {line_no}: empty group", line=line_no)
        records.append(
            PairRecord(
                pair_id=len(records),
                probe_path=probe,
                reference_path=reference,
                label=label,
                group=group,
            )
        )
    return _build_pair_list(records)


def write_pairs_csv(records: Iterable[PairRecord], path: str | Path) -> None:
    """Write records back out in the pair-list CSV format."""
    lines = [PAIR_CSV_HEADER]
    for record in records:
        lines.append(f"{record.probe_path},{record.reference_path},{record.label},{record.group}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_image(path: str | Path, expected: tuple[int, int] | None = None) -> SpatialImage:
    """Load an 8-bit raster as an H×W×3 tensor in [-1, 1].

    Pixel value p maps to p/127.5 - 1. Grayscale sources are replicated to
    3 channels. ``expected`` is (height, width); a mismatch is an error —
    alignment and resizing are the caller's responsibility.
    """
    try:
        with Image.open(path) as img:
            img.load()
            if img.mode == "L":
                raw = np.asarray(img, dtype=np.uint8)
                raw = np.repeat(raw[:, :, np.newaxis], 3, axis=2)
            else:
                if img.mode not in ("RGB", "RGBA", "P", "1"):
                    raise ImageDecodeError(f"{path}: unsupported image mode {img.mode!r}")
                raw = np.asarray(img.convert("RGB"), dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise ImageDecodeError(f"{path}: cannot decode image: {exc}") from exc
    if expected is not None and raw.shape[:2] != tuple(expected):
        raise ImageShapeError(
            f"{path}: image is {raw.shape[0]}×{raw.shape[1]}, "
            f"expected {expected[0]}×{expected[1]}"
        )
    pixels = raw.astype(np.float64) / 127.5 - 1.0
    return SpatialImage(pixels)
