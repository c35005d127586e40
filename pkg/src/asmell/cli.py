"""Command-line entry point: ``asmell run|extract|detect|track|evolve|render``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .detect import DetectConfig
from .errors import AsmellError
from .pipeline import EXIT_FATAL, STAGES, RunConfig, diagnostics, read_snapshot_list, run_pipeline

log = logging.getLogger("asmell")


class _Parser(argparse.ArgumentParser):
    # exit code 2 means partial success here, so usage errors exit with 1
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_FATAL, f"{self.prog}: error: {message}\n")


def _probability(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in [0, 1]")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"{text} must be >= 1")
    return v


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
    p.add_argument("--project", default=None, help="project id (default: the only project under OUT/graphs, else 'project')")
    p.add_argument("-v", "--verbose", action="store_true", help="also print diagnostics to stderr")


def _snapshot_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--snapshots", nargs="*", default=[], metavar="DIR",
                   help="snapshot directories oldest-first, or one file listing them")
    p.add_argument("--config", type=Path, default=None, help="extractor config file")
    p.add_argument("--jobs", type=_positive, default=1, help="worker processes for per-snapshot stages")
    p.add_argument("--seed", type=int, default=0, help="seed for sampled diagnostics")


def _detect_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cd-mode", choices=("scc", "elementary"), default="scc")
    p.add_argument("--cd-max-len", type=_positive, default=None, help="longest elementary cycle to enumerate")
    p.add_argument("--cd-max-count", type=_positive, default=None, help="cap on elementary cycles per graph")
    p.add_argument("--ud-threshold", type=_probability, default=0.3)
    p.add_argument("--gc-min-loc", type=float, default=0.0, help="floor for the god-component LOC threshold")


def _track_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--track-threshold", type=_probability, default=0.5, help="minimum Jaccard similarity")
    p.add_argument("--track-exact", action="store_true", help="match identical artefact sets only")


def _evolve_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k-max", type=_positive, default=None, help="largest precedence window (default: #versions)")
    p.add_argument("--precedence-pairs", action="store_true", help="count instance pairs instead of row instances")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="asmell", description="Architectural smell detection and evolution analysis for C/C++ snapshots.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run every stage")
    for f in (_common, _snapshot_args, _detect_args, _track_args, _evolve_args):
        f(run)

    ext = sub.add_parser("extract", help="sources -> .fgraph/.cgraph (cached)")
    _common(ext)
    _snapshot_args(ext)

    det = sub.add_parser("detect", help="graphs -> smells.csv, characteristics.csv, metrics.csv")
    _common(det)
    _detect_args(det)
    det.add_argument("--graphs", type=Path, default=None, help="directory of <i>.fgraph/.cgraph files")
    det.add_argument("--jobs", type=_positive, default=1)
    det.add_argument("--seed", type=int, default=0)

    trk = sub.add_parser("track", help="smells -> temporal.csv")
    _common(trk)
    _track_args(trk)

    evo = sub.add_parser("evolve", help="temporal instances -> trends, survival, co-occurrence, precedence")
    _common(evo)
    _evolve_args(evo)

    ren = sub.add_parser("render", help="CSV tables -> report.html, summary.json")
    _common(ren)
    return parser


def _project_id(args: argparse.Namespace) -> str:
    if args.project:
        return args.project
    gdir = args.out / "graphs"
    found = sorted(p.name for p in gdir.iterdir() if p.is_dir()) if gdir.is_dir() else []
    return found[0] if len(found) == 1 else "project"


def config_from_args(args: argparse.Namespace) -> RunConfig:
    get = lambda name, default=None: getattr(args, name, default)  # noqa: E731
    detect = DetectConfig(
        cd_mode=get("cd_mode", "scc"),
        cd_max_len=get("cd_max_len"),
        cd_max_count=get("cd_max_count"),
        ud_threshold=get("ud_threshold", 0.3),
        gc_min_loc=get("gc_min_loc", 0.0),
    )
    return RunConfig(
        project_id=_project_id(args),
        snapshots=read_snapshot_list(get("snapshots", [])) if get("snapshots") else [],
        config_path=get("config"),
        out_dir=args.out,
        detect=detect,
        track_threshold=get("track_threshold", 0.5),
        track_exact=get("track_exact", False),
        k_max=get("k_max"),
        precedence_pairs=get("precedence_pairs", False),
        jobs=get("jobs", 1),
        seed=get("seed", 0),
        graphs_dir=get("graphs"),
    )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command in ("run", "extract") and not args.snapshots:
        parser.error("no snapshots given (--snapshots DIR [DIR ...] or --snapshots LISTFILE)")
    cfg = config_from_args(args)
    if args.command in ("run", "extract") and not cfg.snapshots:
        parser.error("the snapshot list is empty")
    stderr = None
    if args.verbose:
        stderr = logging.StreamHandler(sys.stderr)
        stderr.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        log.addHandler(stderr)
    try:
        with diagnostics(cfg.out_dir, fresh=args.command in ("run", "extract")):
            fn = run_pipeline if args.command == "run" else STAGES[args.command]
            code = fn(cfg)
    except AsmellError as exc:
        print(f"asmell: {exc}", file=sys.stderr)
        return EXIT_FATAL
    finally:
        if stderr is not None:
            log.removeHandler(stderr)
    if code == 2:
        print(f"asmell: some snapshots failed; see {cfg.out_dir / 'diagnostics.log'}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
