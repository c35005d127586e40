"""Stage orchestration: extract -> detect -> track -> evolve -> render.

Each stage reads the files written by the previous one, so any stage can be
re-run on its own and graph-only workflows can start at ``detect``.

Output tree under ``out``::

    graphs/<project>/<i>.fgraph, <i>.cgraph
    csv/*.csv
    summary.json, report.html, diagnostics.log
"""

from __future__ import annotations

import contextlib
import json
import logging
import os
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

from .detect import DetectConfig, SmellType, detect_version
from .errors import AsmellError, EmptyInputError, FormatError, MissingStageInputError
from .evolve import (
    classify_temporal_trends,
    cooccurrence_matrix,
    precedence_matrices,
    shape_transitions,
    survival_by_stratum,
)
from .extract import ExtractConfig, ExtractStats, extract_snapshot, load_config, snapshot_digest
from .graph import (
    COMPONENT_GRAPH_SUFFIX,
    FILE_GRAPH_SUFFIX,
    DependencyGraph,
    Level,
    dumps_graph,
    graph_paths,
    load_graph,
    loads_graph,
    project_to_components,
    save_graph,
)
from .metrics import node_metrics
from .report import build_bundle, load_tables, write_report
from .tables import (
    Table,
    cooc_table,
    metrics_rows,
    precedence_table,
    read_smells,
    read_table,
    read_temporal,
    read_versions,
    shape_tables,
    smells_tables,
    survival_table,
    temporal_table,
    trend_tallies_table,
    trends_table,
    versions_table,
)
from .track import build_temporal_instances

log = logging.getLogger(__name__)

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2
CACHE_ENV = "ASMELL_CACHE_DIR"
TREND_MIN_AGE = 3
SHAPE_MIN_AGE = 3
DIAGNOSTIC_SAMPLE = 5


@dataclass
class RunConfig:
    project_id: str = "project"
    snapshots: list[Path] = field(default_factory=list)
    config_path: Path | None = None
    out_dir: Path = Path("out")
    detect: DetectConfig = field(default_factory=DetectConfig)
    track_threshold: float = 0.5
    track_exact: bool = False
    k_max: int | None = None
    precedence_pairs: bool = False
    jobs: int = 1
    seed: int = 0
    graphs_dir: Path | None = None

    @property
    def csv_dir(self) -> Path:
        return Path(self.out_dir) / "csv"

    @property
    def graph_dir(self) -> Path:
        return Path(self.graphs_dir) if self.graphs_dir else Path(self.out_dir) / "graphs" / self.project_id

    @property
    def cache_dir(self) -> Path:
        env = os.environ.get(CACHE_ENV)
        return Path(env) if env else Path(self.out_dir) / ".cache"


# -- logging plumbing -------------------------------------------------------------------

class _Capture(logging.Handler):
    def __init__(self) -> None:
        super().__init__(logging.DEBUG)
        self.records: list[logging.LogRecord] = []

    def emit(self, record: logging.LogRecord) -> None:
        record.msg = record.getMessage()
        record.args = None
        self.records.append(record)


@contextlib.contextmanager
def _captured_logs():
    """Collect asmell log records instead of emitting them.

    Workers return their records so the parent can replay them in snapshot
    order, which keeps diagnostics.log independent of the number of jobs.
    """
    root = logging.getLogger("asmell")
    saved = root.handlers[:], root.propagate, root.level
    cap = _Capture()
    root.handlers = [cap]
    root.propagate = False
    root.setLevel(logging.INFO)
    try:
        yield cap.records
    finally:
        root.handlers, root.propagate, _ = saved
        root.setLevel(saved[2])


def _replay(records: Sequence[logging.LogRecord]) -> None:
    for r in records:
        logging.getLogger(r.name).handle(r)


@contextlib.contextmanager
def diagnostics(out_dir: Path, fresh: bool = False):
    """Write asmell warnings and info lines to ``out_dir/diagnostics.log``.

    Stage commands append; ``fresh`` starts a new log.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out_dir / "diagnostics.log", mode="w" if fresh else "a", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("asmell")
    old_level = root.level
    root.addHandler(handler)
    root.setLevel(logging.INFO)
    try:
        yield
    finally:
        root.removeHandler(handler)
        root.setLevel(old_level)
        handler.close()


def _run_ordered(fn: Callable, items: Sequence, jobs: int) -> list:
    """Map ``fn`` over ``items`` in a pool; results come back in input order."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# -- extract ------------------------------------------------------------------------------

@dataclass
class SnapshotResult:
    root: str
    label: str
    graph_text: str | None = None
    stats: dict | None = None
    error: str | None = None
    cached: bool = False
    records: list = field(default_factory=list)


def read_snapshot_list(items: Sequence[str | os.PathLike]) -> list[Path]:
    """Snapshot directories, oldest first.

    A single argument naming a regular file is read as a list with one
    directory per line (blank lines and ``#`` comments skipped); relative
    entries resolve against the list file's directory.
    """
    if len(items) == 1 and Path(items[0]).is_file():
        listing = Path(items[0])
        out = []
        for line in listing.read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if line and not line.startswith("#"):
                p = Path(line)
                out.append(p if p.is_absolute() else listing.parent / p)
        return out
    return [Path(p) for p in items]


def snapshot_label(root: Path) -> str:
    label = Path(os.path.abspath(root)).name or "snapshot"
    return "_".join(label.split())


def _extract_one(args: tuple[str, ExtractConfig, str]) -> SnapshotResult:
    root, config, cache_dir = args
    res = SnapshotResult(root, snapshot_label(Path(root)))
    with _captured_logs() as records:
        try:
            digest = snapshot_digest(root, config)
            cache_file = Path(cache_dir) / f"{digest}{FILE_GRAPH_SUFFIX}"
            stats_file = Path(cache_dir) / f"{digest}.json"
            if cache_file.exists() and stats_file.exists():
                res.graph_text = cache_file.read_text(encoding="utf-8")
                res.stats = json.loads(stats_file.read_text(encoding="utf-8"))
                res.cached = True
            else:
                graph, stats = extract_snapshot(root, config)
                res.graph_text = dumps_graph(graph)
                res.stats = asdict(stats)
                Path(cache_dir).mkdir(parents=True, exist_ok=True)
                # write-then-rename so a concurrent reader never sees half a file
                for path, text in ((cache_file, res.graph_text), (stats_file, json.dumps(res.stats, sort_keys=True))):
                    tmp = path.with_suffix(path.suffix + f".{os.getpid()}.tmp")
                    tmp.write_text(text, encoding="utf-8")
                    os.replace(tmp, path)
        except (AsmellError, OSError, UnicodeError) as exc:
            res.error = f"{type(exc).__name__}: {exc}"
    res.records = records
    return res


def stage_extract(cfg: RunConfig) -> int:
    if not cfg.snapshots:
        raise EmptyInputError("no snapshots given")
    config = load_config(cfg.config_path) if cfg.config_path else ExtractConfig()
    work = [(str(s), config, str(cfg.cache_dir)) for s in cfg.snapshots]
    results = _run_ordered(_extract_one, work, cfg.jobs)

    gdir = cfg.graph_dir
    gdir.mkdir(parents=True, exist_ok=True)
    for stale in list(gdir.glob(f"*{FILE_GRAPH_SUFFIX}")) + list(gdir.glob(f"*{COMPONENT_GRAPH_SUFFIX}")):
        stale.unlink()
    labels: list[str] = []
    failed = 0
    for res in results:
        _replay(res.records)
        if res.error is not None:
            failed += 1
            log.warning("snapshot %s skipped: %s", res.root, res.error)
            continue
        idx = len(labels)
        graph = loads_graph(res.graph_text or "", Level.FILE, idx)
        graph = replace(graph, version_index=idx, version_label=res.label)
        fpath, cpath = graph_paths(gdir, idx)
        save_graph(graph, fpath)
        save_graph(project_to_components(graph), cpath)
        labels.append(res.label)
        stats = ExtractStats(**(res.stats or {}))
        log.info(
            "v%d %s: %d files (%d headers), %d includes, %d unresolved, %d ambiguous%s",
            idx, res.label, stats.files, stats.headers, stats.includes, stats.unresolved,
            stats.ambiguous, " [cache hit]" if res.cached else "",
        )
    if failed:
        log.warning("%d of %d snapshots failed; versions re-indexed 0..%d", failed, len(results), len(labels) - 1)
    versions_table(labels).write(cfg.csv_dir)
    if not labels:
        log.error("no snapshot could be extracted")
        return EXIT_FATAL
    return EXIT_PARTIAL if failed else EXIT_OK


# -- detect -------------------------------------------------------------------------------

def discover_versions(graph_dir: Path) -> list[str]:
    """Version labels from a directory of ``<i>.fgraph`` files numbered 0..n-1."""
    indices = sorted(int(p.stem) for p in graph_dir.glob(f"*{FILE_GRAPH_SUFFIX}") if p.stem.isdigit())
    if not indices:
        raise MissingStageInputError(graph_dir / f"0{FILE_GRAPH_SUFFIX}")
    if indices != list(range(len(indices))):
        raise FormatError(f"graph files must be numbered 0..n-1, found {indices}", None, str(graph_dir))
    return [load_graph(graph_paths(graph_dir, i)[0], Level.FILE, i).version_label for i in indices]


def load_version(graph_dir: Path, idx: int, label: str | None = None) -> tuple[DependencyGraph, DependencyGraph]:
    fpath, cpath = graph_paths(graph_dir, idx)
    if not fpath.exists():
        raise MissingStageInputError(fpath)
    fg = load_graph(fpath, Level.FILE, idx)
    if label is not None and fg.version_label != label:
        fg = replace(fg, version_label=label)
    if cpath.exists():
        cg = load_graph(cpath, Level.COMPONENT, idx)
        cg = replace(cg, version_label=fg.version_label)
    else:
        cg = project_to_components(fg)
    return fg, cg


def _detect_one(args: tuple[str, int, str, DetectConfig]):
    gdir, idx, label, config = args
    with _captured_logs() as records:
        fg, cg = load_version(Path(gdir), idx, label)
        found = detect_version(fg, cg, config)
        rows = metrics_rows(idx, Level.FILE, node_metrics(fg, config.damping))
        rows += metrics_rows(idx, Level.COMPONENT, node_metrics(cg, config.damping))
    return found, rows, records


def stage_detect(cfg: RunConfig) -> int:
    vpath = cfg.csv_dir / "versions.csv"
    if vpath.exists() and cfg.graphs_dir is None:
        labels = read_versions(read_table("versions", cfg.csv_dir))
    else:
        labels = discover_versions(cfg.graph_dir)
        versions_table(labels).write(cfg.csv_dir)
    if not labels:
        raise EmptyInputError("no versions to analyse")
    work = [(str(cfg.graph_dir), i, lab, cfg.detect) for i, lab in enumerate(labels)]
    results = _run_ordered(_detect_one, work, cfg.jobs)
    per_version = []
    metrics = Table("metrics")
    rng = random.Random(cfg.seed)
    for idx, (found, rows, records) in enumerate(results):
        _replay(records)
        per_version.append(found)
        metrics.rows.extend(rows)
        counts = {t.value: sum(1 for i in found if i.type is t) for t in SmellType}
        log.info("v%d %s: %s", idx, labels[idx], " ".join(f"{k}={v}" for k, v in counts.items()))
        if found:
            sample = rng.sample(found, min(DIAGNOSTIC_SAMPLE, len(found)))
            log.info("v%d sample: %s", idx, " ".join(f"{i.id}:{i.type.value}/{i.level.value}" for i in sample))
    smells, chars = smells_tables(per_version, labels)
    for t in (smells, chars, metrics):
        t.write(cfg.csv_dir)
    return EXIT_OK


# -- track / evolve ---------------------------------------------------------------------------

def _load_instances(cfg: RunConfig):
    labels = read_versions(read_table("versions", cfg.csv_dir))
    per_version = read_smells(read_table("smells", cfg.csv_dir), read_table("characteristics", cfg.csv_dir), len(labels))
    return labels, per_version


def stage_track(cfg: RunConfig) -> int:
    _labels, per_version = _load_instances(cfg)
    temporal = build_temporal_instances(per_version, cfg.track_threshold, cfg.track_exact)
    temporal_table(temporal).write(cfg.csv_dir)
    log.info("tracked %d temporal instances (%d censored)", len(temporal), sum(t.censored for t in temporal))
    return EXIT_OK


def stage_evolve(cfg: RunConfig) -> int:
    temporal_path = cfg.csv_dir / "temporal.csv"
    if not temporal_path.exists():
        raise MissingStageInputError(temporal_path)
    labels, per_version = _load_instances(cfg)
    temporal = read_temporal(read_table("temporal", cfg.csv_dir), per_version)
    records = classify_temporal_trends(temporal, TREND_MIN_AGE)
    comp, file_ = cooccurrence_matrix(per_version)
    k_max = cfg.k_max if cfg.k_max is not None else max(1, len(labels))
    precedence = precedence_matrices(temporal, K=k_max, pairs=cfg.precedence_pairs)
    trans, pop = shape_tables(shape_transitions([t for t in temporal if t.type is SmellType.CD], SHAPE_MIN_AGE))
    tables = [
        trends_table(records),
        trend_tallies_table(records),
        survival_table(survival_by_stratum(temporal)),
        cooc_table("cooc_component", comp),
        cooc_table("cooc_file", file_),
        precedence_table(precedence),
        trans,
        pop,
    ]
    for t in tables:
        t.write(cfg.csv_dir)
    return EXIT_OK


# -- render -----------------------------------------------------------------------------------

EVOLVE_TABLES = ("versions", "smells", "characteristics", "metrics", "temporal", "trends", "trend_tallies",
                 "survival", "cooc_component", "cooc_file", "precedence_k", "shape_transitions", "shape_population")


def stage_render(cfg: RunConfig) -> int:
    tables = load_tables(cfg.csv_dir, EVOLVE_TABLES)
    labels = read_versions(tables["versions"])
    per_version = read_smells(tables["smells"], tables["characteristics"], len(labels))
    latest = load_version(cfg.graph_dir, len(labels) - 1, labels[-1]) if labels else None
    bundle = build_bundle(cfg.project_id, tables, per_version, labels, latest)
    write_report(bundle, cfg.out_dir)
    return EXIT_OK


STAGES: dict[str, Callable[[RunConfig], int]] = {
    "extract": stage_extract,
    "detect": stage_detect,
    "track": stage_track,
    "evolve": stage_evolve,
    "render": stage_render,
}


def run_pipeline(cfg: RunConfig) -> int:
    """All stages in order. Returns 0, 1 (fatal) or 2 (some snapshots failed)."""
    code = stage_extract(cfg)
    if code == EXIT_FATAL:
        return code
    for name in ("detect", "track", "evolve", "render"):
        STAGES[name](cfg)
    return code
