"""Serialization of audit results and SVG rendering of the two figure types.

All writers are deterministic: identical inputs produce byte-identical
output. JSON is canonical (sorted keys, shortest round-trip floats); SVG
coordinates are formatted with fixed precision and contain no timestamps.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .aggregate import GroupImportanceMatrix, ImportanceDelta, RankTable
from .errors import IncompatibleReportError, InvalidInputError
from .importance import ImportanceVector, PairExplanation
from .metrics import BiasReport, VerificationResult

PAIR_CSV_META_FIELDS = ("pair_id", "group", "label", "base_similarity")

PALETTE = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#ff7f0e",
    "#9467bd",
    "#8c564b",
    "#17becf",
    "#7f7f7f",
)

_DIST_PLOT_HEIGHT = 1000.0


@dataclass(frozen=True)
class AuditReport:
    """Bundle of one audit run: config snapshot plus all derived results.

    The config snapshot must be enough to rerun the audit deterministically
    on the same inputs. ``delta`` is present only when the run compared
    against a baseline report.
    """

    config: dict
    importance: GroupImportanceMatrix
    ranking: RankTable
    bias: BiasReport
    delta: ImportanceDelta | None = None


def _fmt(value: float) -> str:
    return format(float(value), ".9g")


def write_pair_csv(explanations: Sequence[PairExplanation], path: str | Path) -> None:
    """Write per-pair normalized importances as CSV, rows in pair-id order.

    Floats are printed with 9 significant digits. With no explanations only
    the metadata header is written (the band count is unknowable).
    """
    ordered = sorted(explanations, key=lambda e: e.pair_id)
    if ordered:
        num_bands = ordered[0].importance.num_bands
        for explanation in ordered:
            if explanation.importance.num_bands != num_bands:
                raise InvalidInputError("explanations disagree on band count")
        header = list(PAIR_CSV_META_FIELDS) + [f"band_{b}" for b in range(num_bands)]
    else:
        header = list(PAIR_CSV_META_FIELDS)
    lines = [",".join(header)]
    for e in ordered:
        fields = [str(e.pair_id), e.group, e.label, _fmt(e.base_similarity)]
        fields.extend(_fmt(v) for v in e.importance.normalized)
        lines.append(",".join(fields))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_pair_csv(path: str | Path) -> list[PairExplanation]:
    """Parse a pair CSV back into explanations.

    The CSV stores only normalized importances, so the raw field of each
    returned vector holds the normalized values again.
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise InvalidInputError(f"{path}: empty pair CSV")
    header = lines[0].split(",")
    if tuple(header[:4]) != PAIR_CSV_META_FIELDS:
        raise InvalidInputError(f"{path}: unexpected pair CSV header {lines[0]!r}")
    explanations = []
    for line in lines[1:]:
        fields = line.split(",")
        if len(fields) != len(header):
            raise InvalidInputError(f"{path}: row has {len(fields)} fields, expected {len(header)}")
        normalized = np.asarray([float(v) for v in fields[4:]], dtype=np.float64)
        explanations.append(
            PairExplanation(
                pair_id=int(fields[0]),
                group=fields[1],
                label=fields[2],
                base_similarity=float(fields[3]),
                importance=ImportanceVector(raw=normalized.copy(), normalized=normalized),
            )
        )
    return explanations


def _json_float(value: float):
    value = float(value)
    if math.isinf(value):
        return "Infinity" if value > 0 else "-Infinity"
    return value


def _matrix_rows(matrix: np.ndarray) -> list[list[float]]:
    return [[_json_float(v) for v in row] for row in np.asarray(matrix)]


def report_to_dict(report: AuditReport) -> dict:
    """Plain JSON-able dictionary form of an audit report."""
    body = {
        "config": report.config,
        "importance": {
            "groups": list(report.importance.groups),
            "num_bands": int(report.importance.num_bands),
            "mean": _matrix_rows(report.importance.mean),
            "stddev": _matrix_rows(report.importance.stddev),
            "count": [int(c) for c in report.importance.count],
        },
        "ranking": {
            "groups": list(report.ranking.groups),
            "ranks": [[int(r) for r in row] for row in report.ranking.ranks],
        },
        "bias": {
            "results": [
                {
                    "group": r.group,
                    "threshold": _json_float(r.threshold),
                    "accuracy": _json_float(r.accuracy),
                    "num_pairs": int(r.num_pairs),
                }
                for r in report.bias.results
            ],
            "mean_accuracy": _json_float(report.bias.mean_accuracy),
            "std": _json_float(report.bias.std),
            "ser": _json_float(report.bias.ser),
        },
    }
    if report.delta is not None:
        body["delta"] = {
            "groups": list(report.delta.groups),
            "num_bands": int(report.delta.num_bands),
            "delta": _matrix_rows(report.delta.delta),
        }
    return body


def write_audit_json(report: AuditReport, path: str | Path) -> None:
    """Write an audit report as canonical JSON (byte-stable for equal reports)."""
    text = json.dumps(report_to_dict(report), sort_keys=True, separators=(",", ":"), allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _parse_float(value) -> float:
    if value == "Infinity":
        return math.inf
    if value == "-Infinity":
        return -math.inf
    return float(value)


def read_audit_json(path: str | Path) -> AuditReport:
    """Parse an audit JSON file back into an :class:`AuditReport`."""
    try:
        body = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise IncompatibleReportError(f"{path}: not a valid audit JSON: {exc}") from exc
    try:
        imp = body["importance"]
        importance = GroupImportanceMatrix(
            groups=tuple(imp["groups"]),
            mean=np.asarray(imp["mean"], dtype=np.float64),
            stddev=np.asarray(imp["stddev"], dtype=np.float64),
            count=np.asarray(imp["count"], dtype=np.int64),
        )
        ranking = RankTable(
            groups=tuple(body["ranking"]["groups"]),
            ranks=np.asarray(body["ranking"]["ranks"], dtype=np.int64),
        )
        bias_body = body["bias"]
        bias = BiasReport(
            results=tuple(
                VerificationResult(
                    group=r["group"],
                    threshold=_parse_float(r["threshold"]),
                    accuracy=float(r["accuracy"]),
                    num_pairs=int(r["num_pairs"]),
                )
                for r in bias_body["results"]
            ),
            mean_accuracy=float(bias_body["mean_accuracy"]),
            std=float(bias_body["std"]),
            ser=_parse_float(bias_body["ser"]),
        )
        delta = None
        if "delta" in body:
            delta = ImportanceDelta(
                groups=tuple(body["delta"]["groups"]),
                delta=np.asarray(body["delta"]["delta"], dtype=np.float64),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise IncompatibleReportError(f"{path}: malformed audit JSON: {exc}") from exc
    return AuditReport(
        config=body.get("config", {}),
        importance=importance,
        ranking=ranking,
        bias=bias,
        delta=delta,
    )


def _escape(text: str) -> str:
    return (
        text.replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def _svg_text(x: float, y: float, text: str, size: int = 13, anchor: str = "middle") -> str:
    return (
        f'<text x="{x:.2f}" y="{y:.2f}" text-anchor="{anchor}" '
        f'font-size="{size}" font-family="Helvetica,Arial,sans-serif">{_escape(text)}</text>'
    )


def render_ranking_svg(table: RankTable, path: str | Path) -> None:
    """Render a rank-per-band line chart, one polyline per group.

    Rank 1 sits at the top of the y axis. Colors come from a fixed palette
    indexed by group position, so output bytes depend only on the table.
    """
    num_groups = len(table.groups)
    num_bands = table.num_bands
    if num_groups < 1 or num_bands < 1:
        raise InvalidInputError("ranking table is empty")
    left, right, top, bottom = 70.0, 170.0, 46.0, 64.0
    plot_w = max(360.0, 30.0 * num_bands)
    plot_h = max(140.0, 44.0 * num_groups)
    width = left + plot_w + right
    height = top + plot_h + bottom

    def x_at(band: int) -> float:
        return left + (band + 0.5) * plot_w / num_bands

    def y_at(rank: int) -> float:
        if num_groups == 1:
            return top + plot_h / 2
        return top + (rank - 1) * plot_h / (num_groups - 1)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
        f'viewBox="0 0 {width:.0f} {height:.0f}">',
        '<rect width="100%" height="100%" fill="#ffffff"/>',
        _svg_text(left + plot_w / 2, 24, "Relative group ranking per frequency band", 16),
    ]
    for rank in range(1, num_groups + 1):
        y = y_at(rank)
        parts.append(
            f'<line x1="{left:.2f}" y1="{y:.2f}" x2="{left + plot_w:.2f}" y2="{y:.2f}" '
            'stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(_svg_text(left - 12, y + 4, str(rank), anchor="end"))
    tick_step = max(1, num_bands // 24)
    for band in range(0, num_bands, tick_step):
        parts.append(_svg_text(x_at(band), top + plot_h + 20, str(band)))
    parts.append(_svg_text(left + plot_w / 2, height - 14, "frequency band"))
    parts.append(
        f'<text x="20" y="{top + plot_h / 2:.2f}" text-anchor="middle" font-size="13" '
        f'font-family="Helvetica,Arial,sans-serif" '
        f'transform="rotate(-90 20 {top + plot_h / 2:.2f})">rank (1 = most important)</text>'
    )
    for row, group in enumerate(table.groups):
        color = PALETTE[row % len(PALETTE)]
        points = " ".join(
            f"{x_at(band):.2f},{y_at(int(table.ranks[row, band])):.2f}"
            for band in range(num_bands)
        )
        parts.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="2.5"/>'
        )
        legend_y = top + 16.0 * row
        legend_x = left + plot_w + 24
        parts.append(
            f'<line x1="{legend_x:.2f}" y1="{legend_y:.2f}" x2="{legend_x + 22:.2f}" '
            f'y2="{legend_y:.2f}" stroke="{color}" stroke-width="2.5"/>'
        )
        parts.append(_svg_text(legend_x + 28, legend_y + 4, group, anchor="start"))
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")


def render_distribution_svg(
    matrix: GroupImportanceMatrix,
    baseline: GroupImportanceMatrix | None,
    path: str | Path,
    show_stddev: bool = False,
) -> None:
    """Render the mean-importance distribution as grouped bars.

    Groups sit side by side within each band slot. When a baseline matrix is
    given, its bars are drawn behind the subject's with a diagonal stripe
    pattern, the overlay convention for model-vs-baseline comparisons.
    ``show_stddev`` adds per-bar dispersion whiskers.
    """
    if baseline is not None and (
        baseline.groups != matrix.groups or baseline.num_bands != matrix.num_bands
    ):
        raise IncompatibleReportError("baseline matrix shape does not match subject")
    num_groups = len(matrix.groups)
    num_bands = matrix.num_bands
    bar_w = 14.0
    slot_gap = 18.0
    slot_w = num_groups * bar_w + slot_gap
    left, right, top, bottom = 90.0, 210.0, 50.0, 80.0
    plot_h = _DIST_PLOT_HEIGHT
    plot_w = num_bands * slot_w
    width = left + plot_w + right
    height = top + plot_h + bottom

    peak = float(matrix.mean.max())
    if show_stddev:
        peak = max(peak, float((matrix.mean + matrix.stddev).max()))
    if baseline is not None:
        peak = max(peak, float(baseline.mean.max()))
    y_max = peak * 1.05 if peak > 0 else 1.0

    def bar_height(value: float) -> float:
        return max(0.0, float(value)) / y_max * plot_h

    def bar_x(band: int, row: int) -> float:
        return left + band * slot_w + slot_gap / 2 + row * bar_w

    baseline_y = top + plot_h
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
        f'viewBox="0 0 {width:.0f} {height:.0f}">',
        '<rect width="100%" height="100%" fill="#ffffff"/>',
    ]
    if baseline is not None:
        defs = ["<defs>"]
        for row in range(num_groups):
            color = PALETTE[row % len(PALETTE)]
            defs.append(
                f'<pattern id="stripe{row}" patternUnits="userSpaceOnUse" width="7" height="7" '
                'patternTransform="rotate(45)">'
                f'<rect width="7" height="7" fill="#ffffff"/>'
                f'<line x1="0" y1="0" x2="0" y2="7" stroke="{color}" stroke-width="3.5"/>'
                "</pattern>"
            )
        defs.append("</defs>")
        parts.extend(defs)
    parts.append(_svg_text(left + plot_w / 2, 28, "Mean frequency-band importance per group", 16))
    for i in range(6):
        value = y_max * i / 5
        y = baseline_y - bar_height(value)
        parts.append(
            f'<line x1="{left:.2f}" y1="{y:.2f}" x2="{left + plot_w:.2f}" y2="{y:.2f}" '
            'stroke="#e5e5e5" stroke-width="1"/>'
        )
        parts.append(_svg_text(left - 10, y + 4, f"{value:.3f}", anchor="end"))
    tick_step = max(1, num_bands // 24)
    for band in range(0, num_bands, tick_step):
        parts.append(
            _svg_text(left + band * slot_w + slot_w / 2, baseline_y + 22, str(band))
        )
    parts.append(_svg_text(left + plot_w / 2, height - 18, "frequency band"))
    parts.append(
        f'<text x="26" y="{top + plot_h / 2:.2f}" text-anchor="middle" font-size="13" '
        f'font-family="Helvetica,Arial,sans-serif" '
        f'transform="rotate(-90 26 {top + plot_h / 2:.2f})">mean normalized importance</text>'
    )
    for band in range(num_bands):
        for row in range(num_groups):
            color = PALETTE[row % len(PALETTE)]
            x = bar_x(band, row)
            if baseline is not None:
                h = bar_height(baseline.mean[row, band])
                parts.append(
                    f'<rect class="baseline" x="{x:.2f}" y="{baseline_y - h:.2f}" '
                    f'width="{bar_w:.2f}" height="{h:.2f}" fill="url(#stripe{row})" '
                    f'stroke="{color}" stroke-width="0.6"/>'
                )
            h = bar_height(matrix.mean[row, band])
            opacity = ' fill-opacity="0.72"' if baseline is not None else ""
            parts.append(
                f'<rect class="subject" x="{x:.2f}" y="{baseline_y - h:.2f}" '
                f'width="{bar_w:.2f}" height="{h:.2f}" fill="{color}"{opacity}/>'
            )
            if show_stddev:
                center = x + bar_w / 2
                low = baseline_y - bar_height(matrix.mean[row, band] - matrix.stddev[row, band])
                high = baseline_y - bar_height(matrix.mean[row, band] + matrix.stddev[row, band])
                parts.append(
                    f'<line x1="{center:.2f}" y1="{low:.2f}" x2="{center:.2f}" y2="{high:.2f}" '
                    'stroke="#333333" stroke-width="1"/>'
                )
                for y_end in (low, high):
                    parts.append(
                        f'<line x1="{center - 3:.2f}" y1="{y_end:.2f}" x2="{center + 3:.2f}" '
                        f'y2="{y_end:.2f}" stroke="#333333" stroke-width="1"/>'
                    )
    parts.append(
        f'<line x1="{left:.2f}" y1="{baseline_y:.2f}" x2="{left + plot_w:.2f}" '
        f'y2="{baseline_y:.2f}" stroke="#000000" stroke-width="1.5"/>'
    )
    for row, group in enumerate(matrix.groups):
        color = PALETTE[row % len(PALETTE)]
        legend_y = top + 20.0 * row
        legend_x = left + plot_w + 26
        parts.append(
            f'<rect x="{legend_x:.2f}" y="{legend_y - 9:.2f}" width="14" height="14" fill="{color}"/>'
        )
        parts.append(_svg_text(legend_x + 20, legend_y + 3, group, anchor="start"))
    if baseline is not None:
        legend_y = top + 20.0 * num_groups
        legend_x = left + plot_w + 26
        parts.append(
            f'<rect x="{legend_x:.2f}" y="{legend_y - 9:.2f}" width="14" height="14" '
            f'fill="url(#stripe0)" stroke="#888888" stroke-width="0.6"/>'
        )
        parts.append(_svg_text(legend_x + 20, legend_y + 3, "baseline", anchor="start"))
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")
