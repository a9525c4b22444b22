"""Command-line entry points.

Subcommands: ``explain`` (per-pair importance CSV), ``audit`` (aggregation,
ranking, bias metrics, figures), ``metrics`` (standalone Mean/STD/SER from
given accuracies), and ``synth`` (synthetic fixtures). Progress goes to
stderr; machine-readable output goes to files. Exit codes: 0 success,
1 processing failure, 2 configuration or usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .aggregate import LABEL_FILTERS, importance_delta, mean_importance, rank_groups
from .dataset import load_image, load_pairs
from .embedder import parse_backend
from .errors import BackendIOError, FreqlensError, InvalidConfigError, PairProcessingError
from .importance import explain_pairs
from .metrics import bias_report, bias_summary, group_verification
from .report import (
    AuditReport,
    read_audit_json,
    render_distribution_svg,
    render_ranking_svg,
    write_audit_json,
    write_pair_csv,
)
from .spectral import build_partition
from .synthfix import SyntheticSpec, generate_fixture, merge_fixtures

PAIR_CSV_NAME = "pair_importance.csv"
AUDIT_JSON_NAME = "audit.json"
RANKING_SVG_NAME = "ranking.svg"
DISTRIBUTION_SVG_NAME = "distribution.svg"

EXIT_OK = 0
EXIT_PROCESSING = 1
EXIT_CONFIG = 2


def _default_threads() -> int:
    value = os.environ.get("FREQLENS_THREADS", "")
    try:
        return max(1, int(value))
    except ValueError:
        return 1


def _add_pipeline_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--pairs", required=True, help="pair-list CSV")
    parser.add_argument(
        "--images-root",
        default=None,
        help="directory image paths are relative to (default: the pair list's directory)",
    )
    parser.add_argument(
        "--backend",
        default="reference",
        help="reference | precomputed:<dir> | subprocess:<command>",
    )
    parser.add_argument("--band-size", type=float, default=4.0, help="radial band width (default 4)")
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker count (default: FREQLENS_THREADS or 1)",
    )
    parser.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="freqlens",
        description="Frequency-band importance and bias auditing for face verification models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    explain = sub.add_parser("explain", help="compute per-pair band importances")
    _add_pipeline_options(explain)

    audit = sub.add_parser("audit", help="full audit: importance, ranking, bias, figures")
    _add_pipeline_options(audit)
    audit.add_argument(
        "--label-filter",
        choices=LABEL_FILTERS,
        default="all",
        help="which pairs enter the importance aggregation (default all)",
    )
    audit.add_argument(
        "--baseline",
        default=None,
        help="audit JSON of a baseline run to compute importance deltas against",
    )
    audit.add_argument(
        "--render",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="write SVG figures (default on)",
    )

    metrics = sub.add_parser(
        "metrics", help="Mean/STD/SER from externally computed per-group accuracies"
    )
    metrics.add_argument(
        "accuracies",
        nargs="+",
        metavar="GROUP=ACCURACY",
        help="e.g. African=92.92 Asian=93.30 (at least two groups)",
    )

    synth = sub.add_parser("synth", help="generate a deterministic synthetic fixture")
    synth.add_argument("--out", required=True, help="fixture directory")
    synth.add_argument("--seed", type=int, default=1, help="generator seed (default 1)")
    synth.add_argument(
        "--group",
        action="append",
        required=True,
        metavar="NAME=BANDS",
        help="group with its energy profile: 'low=1-3', 'high=8-10', 'all=uniform'; repeatable",
    )
    synth.add_argument("--identities", type=int, default=4)
    synth.add_argument("--pairs-per-label", type=int, default=8)
    synth.add_argument("--band-size", type=float, default=4.0)
    return parser


def _progress(stream):
    def note(done: int, total: int):
        step = max(1, total // 10)
        if done % step == 0 or done == total:
            print(f"explained {done}/{total} pairs", file=stream)

    return note


def _resolve_run(args) -> dict:
    pairs_path = Path(args.pairs)
    if not pairs_path.is_file():
        raise InvalidConfigError(f"pair list not found: {pairs_path}")
    images_root = Path(args.images_root) if args.images_root else pairs_path.parent
    threads = args.threads if args.threads is not None else _default_threads()
    if threads < 1:
        raise InvalidConfigError(f"--threads must be at least 1, got {threads}")
    if args.band_size <= 0:
        raise InvalidConfigError(f"--band-size must be positive, got {args.band_size}")
    return {
        "pairs_path": pairs_path,
        "images_root": images_root,
        "descriptor": parse_backend(args.backend),
        "band_size": float(args.band_size),
        "threads": threads,
        "out_dir": Path(args.out),
    }


def _run_explanations(args, run: dict):
    pair_list = load_pairs(run["pairs_path"])
    if not pair_list.records:
        raise InvalidConfigError(f"pair list {run['pairs_path']} has no pairs")
    first = pair_list.records[0]
    try:
        probe = load_image(run["images_root"] / first.probe_path)
    except (FreqlensError, OSError) as exc:
        raise PairProcessingError(f"pair {first.pair_id}: {exc}", pair_id=first.pair_id) from exc
    partition = build_partition(probe.height, probe.width, run["band_size"])
    print(
        f"auditing {len(pair_list.records)} pairs, {partition.num_bands} bands, "
        f"{run['threads']} worker(s)",
        file=sys.stderr,
    )
    explanations = explain_pairs(
        pair_list.records,
        partition,
        run["descriptor"],
        images_root=run["images_root"],
        workers=run["threads"],
        progress=_progress(sys.stderr),
    )
    return pair_list, partition, explanations


def _config_snapshot(args, run: dict, extra: dict | None = None) -> dict:
    snapshot = {
        "backend": args.backend,
        "band_size": run["band_size"],
        "images_root": str(run["images_root"]),
        "out": str(run["out_dir"]),
        "pairs": str(run["pairs_path"]),
        "threads": run["threads"],
    }
    if extra:
        snapshot.update(extra)
    return snapshot


def _write_outputs(out_dir: Path, writers: list) -> None:
    """Run (path, write_callable) pairs, removing everything on failure."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        for path, write in writers:
            write(path)
            written.append(path)
    except BaseException:
        for path in written:
            try:
                path.unlink()
            except OSError:
                pass
        raise


def cmd_explain(args) -> int:
    run = _resolve_run(args)
    _, _, explanations = _run_explanations(args, run)
    out_dir = run["out_dir"]
    _write_outputs(
        out_dir, [(out_dir / PAIR_CSV_NAME, lambda p: write_pair_csv(explanations, p))]
    )
    print(f"wrote {out_dir / PAIR_CSV_NAME}", file=sys.stderr)
    return EXIT_OK


def cmd_audit(args) -> int:
    run = _resolve_run(args)
    baseline_report = None
    if args.baseline:
        baseline_path = Path(args.baseline)
        if not baseline_path.is_file():
            raise InvalidConfigError(f"baseline report not found: {baseline_path}")
        baseline_report = read_audit_json(baseline_path)
    _, _, explanations = _run_explanations(args, run)

    matrix = mean_importance(explanations, label_filter=args.label_filter)
    ranking = rank_groups(matrix)
    results = group_verification(
        (e.group, e.label, e.base_similarity) for e in explanations
    )
    bias = bias_report(results)
    delta = None
    extra = {"label_filter": args.label_filter, "render": bool(args.render)}
    if baseline_report is not None:
        delta = importance_delta(matrix, baseline_report.importance)
        extra["baseline"] = str(args.baseline)
    report = AuditReport(
        config=_config_snapshot(args, run, extra),
        importance=matrix,
        ranking=ranking,
        bias=bias,
        delta=delta,
    )

    out_dir = run["out_dir"]
    writers = [
        (out_dir / PAIR_CSV_NAME, lambda p: write_pair_csv(explanations, p)),
        (out_dir / AUDIT_JSON_NAME, lambda p: write_audit_json(report, p)),
    ]
    if args.render:
        writers.append((out_dir / RANKING_SVG_NAME, lambda p: render_ranking_svg(ranking, p)))
        baseline_matrix = baseline_report.importance if baseline_report is not None else None
        writers.append(
            (
                out_dir / DISTRIBUTION_SVG_NAME,
                lambda p: render_distribution_svg(matrix, baseline_matrix, p),
            )
        )
    _write_outputs(out_dir, writers)
    for path, _ in writers:
        print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


def cmd_metrics(args) -> int:
    entries = []
    for raw in args.accuracies:
        name, sep, value = raw.partition("=")
        if not sep or not name:
            raise InvalidConfigError(f"expected GROUP=ACCURACY, got {raw!r}")
        try:
            entries.append((name, float(value)))
        except ValueError:
            raise InvalidConfigError(f"accuracy is not a number in {raw!r}") from None
    if len(entries) < 2:
        raise InvalidConfigError("need at least two GROUP=ACCURACY arguments")
    mean, std, ser = bias_summary([value for _, value in entries])
    for name, value in entries:
        print(f"{name} {value:.2f}")
    print(f"Mean {mean:.2f}")
    print(f"STD {std:.2f}")
    print(f"SER {'inf' if ser == float('inf') else format(ser, '.2f')}")
    return EXIT_OK


def _parse_profile(text: str, num_bands: int) -> tuple[float, ...]:
    if text == "uniform":
        return tuple(1.0 for _ in range(num_bands))
    profile = [0.0] * num_bands
    for part in text.split(","):
        lo, sep, hi = part.partition("-")
        try:
            start = int(lo)
            end = int(hi) if sep else start
        except ValueError:
            raise InvalidConfigError(f"bad band range {part!r} in profile {text!r}") from None
        if not (0 <= start <= end < num_bands):
            raise InvalidConfigError(
                f"band range {part!r} outside [0, {num_bands}) in profile {text!r}"
            )
        for band in range(start, end + 1):
            profile[band] = 1.0
    return tuple(profile)


def cmd_synth(args) -> int:
    out_dir = Path(args.out)
    num_bands = build_partition(112, 112, args.band_size).num_bands
    pair_lists = []
    for index, spec_text in enumerate(args.group):
        name, sep, profile_text = spec_text.partition("=")
        if not sep or not name:
            raise InvalidConfigError(f"expected NAME=BANDS, got {spec_text!r}")
        spec = SyntheticSpec(
            seed=args.seed + index,
            group_name=name,
            band_profile=_parse_profile(profile_text, num_bands),
            num_identities=args.identities,
            pairs_per_label=args.pairs_per_label,
            band_size=args.band_size,
        )
        pair_lists.append(generate_fixture(spec, out_dir))
        print(f"generated group {name!r}", file=sys.stderr)
    merged = merge_fixtures(pair_lists, out_dir)
    print(f"wrote {out_dir / 'pairs.csv'} ({len(merged.records)} pairs)", file=sys.stderr)
    return EXIT_OK


_COMMANDS = {
    "explain": cmd_explain,
    "audit": cmd_audit,
    "metrics": cmd_metrics,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (PairProcessingError, BackendIOError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROCESSING
    except FreqlensError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROCESSING


if __name__ == "__main__":
    sys.exit(main())
