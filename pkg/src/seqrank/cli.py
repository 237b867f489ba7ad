"""``seqrank`` command line.

Subcommands: rank, scan, correlate, synth, report. Results go to stdout as
JSON lines, diagnostics to stderr. Exit status is 0 on success, 2 on bad
usage or input, 1 on internal failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import InputError
from .ingest.container import read_container
from .ingest.metrics import read_metrics
from .ingest.sampling import sample_sequences
from .monitor.history import read_history
from .monitor.manifest import RunManifest
from .monitor.report import (
    correlate_run,
    emit_report,
    write_performance_scatter,
    write_rank_series,
)
from .monitor.scan import scan_run
from .stats import Grouping
from .synth import MANIFEST_NAME, SIDECAR_NAME, TrajectoryPlan, plant_run
from .temporal import rankme_t

log = logging.getLogger("seqrank")

GROUPS = {
    "layer": Grouping.PER_LAYER,
    "task": Grouping.PER_TASK,
    "layer_task": Grouping.PER_LAYER_AND_TASK,
    "pooled": Grouping.POOLED,
}


class UsageError(InputError):
    pass


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"{text} is not an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text} must be >= 1")
    return value


def _emit(doc: dict) -> None:
    print(json.dumps(doc), flush=True)


def _require_file(path: Path, what: str) -> Path:
    if not path.is_file():
        raise UsageError(f"{what} {path} does not exist or is not a file")
    return path


def cmd_rank(args) -> int:
    seqs = read_container(_require_file(args.input, "container"))
    n_total = len(seqs)
    if args.sample is not None:
        seqs = sample_sequences(seqs, args.sample, args.seed)
    rank = rankme_t(seqs, pool=args.pool)
    _emit(
        {
            "rank": rank.value,
            "retained": rank.retained_count,
            "n": len(seqs),
            "d": seqs.dim,
            "seed": args.seed,
            "pool": args.pool,
            "n_total": n_total,
        }
    )
    return 0


def cmd_scan(args) -> int:
    manifest = RunManifest.load(_require_file(args.manifest, "manifest"))
    result = scan_run(manifest, workers=args.workers, history=args.history)
    for r in result.records:
        _emit(
            {
                "run_id": r.run_id,
                "step": r.step,
                "layer": r.layer,
                "rank": r.rank_value,
                "retained": r.retained_count,
                "n": r.n_sequences_used,
                "d": r.dim,
            }
        )
    for g in result.gaps:
        _emit({"gap": True, "step": g.step, "layer": g.layer, "path": str(g.path)})
    print(
        f"scanned {len(result.records)} cells, {len(result.gaps)} gaps; "
        f"history: {result.history_path}",
        file=sys.stderr,
    )
    return 0


def cmd_correlate(args) -> int:
    ranks = read_history(_require_file(args.history, "history"))
    metrics = read_metrics(_require_file(args.metrics, "metrics table"))
    report = correlate_run(ranks, metrics, GROUPS[args.group])
    text = emit_report(report, args.format)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(text)
    if args.plots is not None:
        write_rank_series(ranks, args.plots)
        write_performance_scatter(report, args.plots)
    _emit(
        {
            "report": str(args.out),
            "groups": len(report.groups),
            "insufficient": len(report.insufficient),
            "observations": len(report.observations),
            "best_layer_disagreements": [row.task for row in report.best_layers if not row.agree],
        }
    )
    return 0


def cmd_synth(args) -> int:
    plan = TrajectoryPlan.load(_require_file(args.plan, "plan"))
    manifest = plant_run(plan, args.out)
    _emit(
        {
            "manifest": str(args.out / MANIFEST_NAME),
            "sidecar": str(args.out / SIDECAR_NAME),
            "containers": len(manifest.cells()),
            "metrics": bool(plan.metrics),
        }
    )
    return 0


def cmd_report(args) -> int:
    records = read_history(_require_file(args.history, "history"))
    if not records:
        raise UsageError(f"history {args.history} contains no records")
    paths = write_rank_series(records, args.plots)
    if args.metrics is not None:
        report = correlate_run(records, read_metrics(_require_file(args.metrics, "metrics table")))
        paths += write_performance_scatter(report, args.plots)
    for p in paths:
        _emit({"plot_data": str(p)})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqrank",
        description="Label-free embedding quality via RankMe-t effective rank.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rank", help="RankMe-t of one RKMT container")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--sample", type=_positive, default=None, help="sample k sequences (default: all)")
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--pool", choices=["sum", "mean"], default="sum")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("scan", help="rank every (step, layer) of a run manifest")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--workers", type=_positive, default=1)
    p.add_argument("--history", type=Path, default=None, help="override the manifest's history path")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("correlate", help="Kendall's tau between ranks and downstream metrics")
    p.add_argument("--history", type=Path, required=True)
    p.add_argument("--metrics", type=Path, required=True)
    p.add_argument("--group", choices=sorted(GROUPS), default="layer_task")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--plots", type=Path, default=None, help="also write plot-data CSVs here")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("synth", help="write a synthetic run with planted spectra")
    p.add_argument("--plan", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="plot-data CSVs from a rank history")
    p.add_argument("--history", type=Path, required=True)
    p.add_argument("--plots", type=Path, required=True)
    p.add_argument("--metrics", type=Path, default=None, help="add performance-vs-rank scatter data")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
