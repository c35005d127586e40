"""C/C++ snapshot scanning, include resolution and header hoisting.

The extractor works on plain text: no preprocessor evaluation, no AST. All
conditional branches contribute includes, which over-approximates the real
dependency set.
"""

from __future__ import annotations

import enum
import fnmatch
import hashlib
import logging
import os
import posixpath
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

from .errors import FormatError, SourceTreeError
from .graph import DependencyGraph, Level, Node, build_graph, tarjan_scc

log = logging.getLogger(__name__)

DEFAULT_IMPL_EXT = (".c", ".cc", ".cpp", ".cxx")
DEFAULT_HEADER_EXT = (".h", ".hh", ".hpp", ".hxx")


class FileKind(str, enum.Enum):
    IMPL = "Impl"
    HEADER = "Header"


class IncludeForm(str, enum.Enum):
    QUOTED = "Quoted"
    ANGLED = "Angled"


class SourceFile(NamedTuple):
    path: str
    kind: FileKind
    loc: int


class RawInclude(NamedTuple):
    source: str
    spec: str
    form: IncludeForm


@dataclass
class ExtractConfig:
    roots: list[str] = field(default_factory=lambda: ["."])
    exclude: list[str] = field(default_factory=list)
    impl_ext: tuple[str, ...] = DEFAULT_IMPL_EXT
    header_ext: tuple[str, ...] = DEFAULT_HEADER_EXT
    include_roots: list[str] = field(default_factory=list)
    component_map: dict[str, str] = field(default_factory=dict)
    extra_edges: list[tuple[str, str]] = field(default_factory=list)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for item in (
            self.roots,
            self.exclude,
            self.impl_ext,
            self.header_ext,
            self.include_roots,
            sorted(self.component_map.items()),
            sorted(self.extra_edges),
        ):
            h.update(repr(item).encode())
            h.update(b"\0")
        return h.hexdigest()


_LIST_KEYS = {"roots", "exclude", "impl-ext", "header-ext", "include-roots"}
_PATH_KEYS = {"component-map", "extra-edges-file"}


def load_config(path: str | os.PathLike) -> ExtractConfig:
    """Parse a ``key = value`` config file.

    List values are comma or whitespace separated. ``component-map`` and
    ``extra-edges-file`` are paths relative to the config file.
    """
    path = Path(path)
    cfg = ExtractConfig()
    base = path.parent
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or key not in _LIST_KEYS | _PATH_KEYS:
            raise FormatError(f"unknown config entry {line!r}", lineno, str(path))
        if key in _LIST_KEYS:
            items = [v for v in re.split(r"[,\s]+", value) if v]
            if key == "roots":
                cfg.roots = items or ["."]
            elif key == "exclude":
                cfg.exclude = items
            elif key == "impl-ext":
                cfg.impl_ext = tuple(_dot(e) for e in items)
            elif key == "header-ext":
                cfg.header_ext = tuple(_dot(e) for e in items)
            else:
                cfg.include_roots = items
        elif key == "component-map":
            cfg.component_map = load_component_map(base / value)
        else:
            cfg.extra_edges = load_extra_edges(base / value)
    return cfg


def _dot(ext: str) -> str:
    return ext if ext.startswith(".") else "." + ext


def load_component_map(path: str | os.PathLike) -> dict[str, str]:
    mapping = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        parts = raw.split("\t")
        if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
            raise FormatError("expected path-prefix<TAB>component-name", lineno, str(path))
        mapping[_norm(parts[0].strip())] = parts[1].strip()
    return mapping


def load_extra_edges(path: str | os.PathLike) -> list[tuple[str, str]]:
    """Read ``E`` records from an interchange-format file."""
    text = Path(path).read_text(encoding="utf-8")
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] != "E" or len(parts) != 3:
            raise FormatError("extra edges file accepts only 'E <src> <dst>' records", lineno, str(path))
        edges.append((_norm(parts[1]), _norm(parts[2])))
    return edges


def _norm(path: str) -> str:
    path = path.replace("\\", "/")
    norm = posixpath.normpath(path)
    return "" if norm == "." else norm


# -- scanning ----------------------------------------------------------------

@dataclass
class SourceInventory:
    files: list[SourceFile]
    include_roots: list[str]
    root: Path | None = None

    def __post_init__(self) -> None:
        self.by_path = {f.path: f for f in self.files}

    def kind(self, path: str) -> FileKind:
        return self.by_path[path].kind


def _excluded(rel: str, patterns: Iterable[str]) -> bool:
    parts = rel.split("/")
    prefixes = ["/".join(parts[: i + 1]) for i in range(len(parts))]
    for pat in patterns:
        pat = pat.rstrip("/")
        if any(fnmatch.fnmatchcase(p, pat) for p in prefixes):
            return True
    return False


def scan_sources(root: str | os.PathLike, config: ExtractConfig | None = None) -> SourceInventory:
    config = config or ExtractConfig()
    root = Path(root)
    if not root.is_dir() or not os.access(root, os.R_OK | os.X_OK):
        raise SourceTreeError(f"cannot read snapshot root {root}")
    impl = {e.lower() for e in config.impl_ext}
    header = {e.lower() for e in config.header_ext}
    found: dict[str, SourceFile] = {}
    for sub in config.roots:
        start = root / sub
        if not start.is_dir():
            log.warning("source root %s missing under %s", sub, root)
            continue
        for dirpath, dirnames, filenames in os.walk(start):
            rel_dir = _norm(os.path.relpath(dirpath, root))
            dirnames[:] = sorted(
                d for d in dirnames if not _excluded(posixpath.join(rel_dir, d) if rel_dir else d, config.exclude)
            )
            for name in sorted(filenames):
                rel = posixpath.join(rel_dir, name) if rel_dir else name
                ext = posixpath.splitext(name)[1].lower()
                if ext in impl:
                    kind = FileKind.IMPL
                elif ext in header:
                    kind = FileKind.HEADER
                else:
                    continue
                if rel in found or _excluded(rel, config.exclude):
                    continue
                if any(ch.isspace() for ch in rel):
                    log.warning("skipping %s: whitespace in path", rel)
                    continue
                text = read_text(root / rel)
                found[rel] = SourceFile(rel, kind, count_loc(text))
    if not found:
        log.warning("no C/C++ sources found under %s", root)
    files = [found[p] for p in sorted(found)]
    return SourceInventory(files, [_norm(r) for r in config.include_roots], root)


def read_text(path: Path) -> str:
    return path.read_bytes().decode("utf-8", errors="replace")


# -- lexical helpers -----------------------------------------------------------

def strip_comments(text: str) -> str:
    """Blank out // and /* */ comments, keeping line structure and string literals."""
    out: list[str] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        nxt = text[i + 1] if i + 1 < n else ""
        if ch == "/" and nxt == "/":
            j = text.find("\n", i)
            j = n if j < 0 else j
            out.append(" " * (j - i))
            i = j
        elif ch == "/" and nxt == "*":
            j = text.find("*/", i + 2)
            j = n if j < 0 else j + 2
            out.append("".join(c if c == "\n" else " " for c in text[i:j]))
            i = j
        elif ch in "\"'":
            j = i + 1
            while j < n and text[j] != ch and text[j] != "\n":
                j += 2 if text[j] == "\\" and j + 1 < n and text[j + 1] != "\n" else 1
            j = j + 1 if j < n and text[j] == ch else j
            out.append(text[i:j])
            i = j
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def count_loc(file_text: str) -> int:
    """Count lines that are neither blank nor comment-only."""
    return sum(1 for line in strip_comments(file_text).splitlines() if line.strip())


_DIRECTIVE = re.compile(r"^\s*#\s*include\b(.*)$")
_QUOTED = re.compile(r'^\s*"([^"]+)"')
_ANGLED = re.compile(r"^\s*<([^>]+)>")


def extract_includes(file_text: str, source: str = "") -> list[RawInclude]:
    found = []
    for lineno, line in enumerate(strip_comments(file_text).splitlines(), start=1):
        m = _DIRECTIVE.match(line)
        if not m:
            continue
        rest = m.group(1)
        q = _QUOTED.match(rest)
        a = _ANGLED.match(rest) if not q else None
        if q:
            found.append(RawInclude(source, q.group(1).strip(), IncludeForm.QUOTED))
        elif a:
            found.append(RawInclude(source, a.group(1).strip(), IncludeForm.ANGLED))
        else:
            log.debug("%s:%d: malformed include directive %r", source, lineno, line.strip())
    return found


# -- resolution ----------------------------------------------------------------

@dataclass
class Resolution:
    edges: list[tuple[str, str]]
    unresolved: int = 0
    ambiguous: list[tuple[str, str, tuple[str, ...]]] = field(default_factory=list)


def resolve_includes(inventory: SourceInventory, raw_includes: Iterable[RawInclude]) -> Resolution:
    """Map include specs onto inventory files.

    Tiers, first hit wins: the includer's directory (quoted only), then the
    configured include roots as one tier. Without include roots a suffix match
    over the whole inventory is used instead. Several hits within one tier pick
    the lexicographically first path and are reported as ambiguous.
    """
    known = inventory.by_path
    suffix_index: dict[str, list[str]] = {}
    if not inventory.include_roots:
        for path in known:
            parts = path.split("/")
            for i in range(len(parts)):
                suffix_index.setdefault("/".join(parts[i:]), []).append(path)
    res = Resolution([])
    for inc in raw_includes:
        spec = _norm(inc.spec)
        tiers: list[list[str]] = []
        if inc.form is IncludeForm.QUOTED:
            local = _norm(posixpath.join(posixpath.dirname(inc.source), spec))
            tiers.append([local])
        if inventory.include_roots:
            tiers.append([_norm(posixpath.join(r, spec)) for r in inventory.include_roots])
        else:
            tiers.append(suffix_index.get(spec, []))
        target = None
        for tier in tiers:
            hits = sorted({p for p in tier if p in known})
            if hits:
                target = hits[0]
                if len(hits) > 1:
                    res.ambiguous.append((inc.source, inc.spec, tuple(hits)))
                    log.info("AmbiguousInclude %s: %r matches %s; using %s", inc.source, inc.spec, hits, target)
                break
        if target is None:
            res.unresolved += 1
        elif target != inc.source:
            res.edges.append((inc.source, target))
    return res


# -- component assignment -------------------------------------------------------

def assign_component(path: str, config: ExtractConfig) -> str:
    """Explicit mapping (longest prefix) first, else the first directory below a source root."""
    best = None
    for prefix, name in config.component_map.items():
        if path == prefix or path.startswith(prefix + "/") or prefix == "":
            if best is None or len(prefix) > len(best[0]):
                best = (prefix, name)
    if best is not None:
        return best[1]
    roots = sorted((_norm(r) for r in config.roots), key=len, reverse=True)
    for root in roots:
        if root and not path.startswith(root + "/"):
            continue
        rest = path[len(root) + 1:] if root else path
        head, sep, _ = rest.partition("/")
        if not sep:
            return root or "."
        return posixpath.join(root, head) if root else head
    return "."


# -- hoisting --------------------------------------------------------------------

def _stem(path: str) -> str:
    return posixpath.splitext(posixpath.basename(path))[0]


def implementers(header: str, graph: DependencyGraph, is_header) -> list[str]:
    stem = _stem(header)
    comp = graph.nodes[header].component
    if comp is not None:
        pool = graph.members.get(comp, ())
    else:
        folder = posixpath.dirname(header)
        pool = [p for p in graph.paths if posixpath.dirname(p) == folder]
    return [p for p in pool if not is_header(p) and _stem(p) == stem]


def hoist_header_deps(
    graph: DependencyGraph,
    header_ext: Iterable[str] = DEFAULT_HEADER_EXT,
) -> DependencyGraph:
    """Carry header dependencies over to implementation files and drop headers.

    An edge into a header resolves to the header's implementers (same stem,
    same component). A header without implementers is pure glue: edges into it
    resolve to whatever its own includes resolve to, transitively. Header-only
    include cycles are collapsed and treated as one header.
    """
    exts = {e.lower() for e in header_ext}

    def is_header(p: str) -> bool:
        return posixpath.splitext(p)[1].lower() in exts

    headers = [p for p in graph.paths if is_header(p)]
    header_succ = {h: [d for d in graph.successors[h] if is_header(d)] for h in headers}
    sccs = tarjan_scc(headers, header_succ)
    unit_of: dict[str, int] = {}
    for i, comp in enumerate(sccs):
        if len(comp) > 1:
            log.warning("CycleInHeaderChain: %s", " -> ".join(comp))
        for h in comp:
            unit_of[h] = i

    impl_of = {h: implementers(h, graph, is_header) for h in headers}
    # targets[i]: implementation files an edge into header unit i stands for
    targets: list[frozenset[str]] = []
    for comp in sccs:  # reverse topological: dependencies first
        impls = sorted({i for h in comp for i in impl_of[h]})
        if impls:
            targets.append(frozenset(impls))
            continue
        acc: set[str] = set()
        for h in comp:
            for d in graph.successors[h]:
                if not is_header(d):
                    acc.add(d)
                elif unit_of[d] != unit_of[h]:
                    acc |= targets[unit_of[d]]
        targets.append(frozenset(acc))

    def resolve(p: str) -> Iterable[str]:
        return targets[unit_of[p]] if is_header(p) else (p,)

    edges: set[tuple[str, str]] = set()
    for src, dst in graph.edges:
        if not is_header(src):
            for t in resolve(dst):
                edges.add((src, t))
    for comp in sccs:
        owners = sorted({i for h in comp for i in impl_of[h]})
        if not owners:
            continue
        for h in comp:
            for d in graph.successors[h]:
                if is_header(d) and unit_of[d] == unit_of[h]:
                    continue
                for t in resolve(d):
                    for owner in owners:
                        edges.add((owner, t))
    keep = [graph.nodes[p] for p in graph.paths if not is_header(p)]
    edges = {(s, d) for s, d in edges if s != d}
    return build_graph(Level.FILE, keep, edges, graph.version_index, graph.version_label)


# -- whole snapshot ---------------------------------------------------------------

@dataclass
class ExtractStats:
    files: int = 0
    headers: int = 0
    includes: int = 0
    unresolved: int = 0
    ambiguous: int = 0
    extra_edges_skipped: int = 0


def raw_file_graph(
    root: str | os.PathLike,
    config: ExtractConfig | None = None,
    version_index: int = 0,
    version_label: str = "",
) -> tuple[DependencyGraph, ExtractStats]:
    """Scan and resolve one snapshot into a graph that still contains headers."""
    config = config or ExtractConfig()
    inventory = scan_sources(root, config)
    stats = ExtractStats(
        files=len(inventory.files),
        headers=sum(f.kind is FileKind.HEADER for f in inventory.files),
    )
    raw: list[RawInclude] = []
    for f in inventory.files:
        raw.extend(extract_includes(read_text(Path(root) / f.path), f.path))
    stats.includes = len(raw)
    res = resolve_includes(inventory, raw)
    stats.unresolved = res.unresolved
    stats.ambiguous = len(res.ambiguous)
    edges = list(res.edges)
    for src, dst in config.extra_edges:
        if src in inventory.by_path and dst in inventory.by_path:
            edges.append((src, dst))
        else:
            stats.extra_edges_skipped += 1
            log.warning("extra edge %s -> %s names a file outside the snapshot", src, dst)
    nodes = [Node(f.path, Level.FILE, f.loc, assign_component(f.path, config)) for f in inventory.files]
    return build_graph(Level.FILE, nodes, edges, version_index, version_label), stats


def extract_snapshot(
    root: str | os.PathLike,
    config: ExtractConfig | None = None,
    version_index: int = 0,
    version_label: str = "",
) -> tuple[DependencyGraph, ExtractStats]:
    config = config or ExtractConfig()
    graph, stats = raw_file_graph(root, config, version_index, version_label)
    return hoist_header_deps(graph, config.header_ext), stats


def snapshot_digest(root: str | os.PathLike, config: ExtractConfig) -> str:
    """Content hash of every candidate source file plus the config; used as cache key."""
    root = Path(root)
    inventory = scan_sources(root, config)
    h = hashlib.sha256(config.fingerprint().encode())
    for f in inventory.files:
        h.update(f.path.encode() + b"\0")
        h.update(hashlib.sha256((root / f.path).read_bytes()).digest())
    return h.hexdigest()


__all__ = [
    "ExtractConfig",
    "FileKind",
    "IncludeForm",
    "RawInclude",
    "SourceFile",
    "SourceInventory",
    "count_loc",
    "extract_includes",
    "extract_snapshot",
    "hoist_header_deps",
    "load_config",
    "resolve_includes",
    "scan_sources",
    "strip_comments",
]
