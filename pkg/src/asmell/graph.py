"""Version-scoped dependency graphs and their line-oriented interchange format.

A graph holds the nodes of one abstraction level (files or components) and
directed edges pointing from a dependant to its dependency. Graphs are
immutable once built; every accessor returns nodes in lexicographic order so
that downstream output is reproducible.

Interchange format (UTF-8, one record per line)::

    # comment
    V <version_label>
    N <level> <path> <loc> [component_path]
    E <src_path> <dst_path>
"""

from __future__ import annotations

import enum
import io
import os
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, TextIO

from .errors import (
    DanglingEdgeError,
    FormatError,
    GraphError,
    LevelMismatchError,
    MissingComponentError,
)

FILE_GRAPH_SUFFIX = ".fgraph"
COMPONENT_GRAPH_SUFFIX = ".cgraph"


class Level(str, enum.Enum):
    FILE = "File"
    COMPONENT = "Component"

    def __str__(self) -> str:
        return self.value


class ArtefactId(NamedTuple):
    level: Level
    path: str


class Node(NamedTuple):
    path: str
    level: Level = Level.FILE
    loc: int = 0
    component: str | None = None


def _check_path(path: str) -> None:
    if not path or "\\" in path or any(ch.isspace() for ch in path):
        raise GraphError(f"invalid artefact path {path!r}")


@dataclass(frozen=True)
class DependencyGraph:
    level: Level
    nodes: Mapping[str, Node]
    edges: frozenset[tuple[str, str]]
    version_index: int = 0
    version_label: str = ""

    @cached_property
    def paths(self) -> tuple[str, ...]:
        return tuple(sorted(self.nodes))

    @cached_property
    def sorted_edges(self) -> tuple[tuple[str, str], ...]:
        return tuple(sorted(self.edges))

    @cached_property
    def successors(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {p: [] for p in self.paths}
        for src, dst in self.sorted_edges:
            out[src].append(dst)
        return {p: tuple(v) for p, v in out.items()}

    @cached_property
    def predecessors(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {p: [] for p in self.paths}
        for src, dst in sorted(self.edges, key=lambda e: (e[1], e[0])):
            out[dst].append(src)
        return {p: tuple(v) for p, v in out.items()}

    @cached_property
    def members(self) -> dict[str, tuple[str, ...]]:
        """Component path -> member file paths (file graphs only)."""
        out: dict[str, list[str]] = {}
        for p in self.paths:
            comp = self.nodes[p].component
            if comp is not None:
                out.setdefault(comp, []).append(p)
        return {c: tuple(v) for c, v in out.items()}

    def artefact(self, path: str) -> ArtefactId:
        return ArtefactId(self.level, path)

    def loc(self, path: str) -> int:
        return self.nodes[path].loc

    def component_of(self, path: str) -> str | None:
        return self.nodes[path].component

    def induced_edges(self, subset: Iterable[str]) -> list[tuple[str, str]]:
        keep = set(subset)
        return [(s, d) for s, d in self.sorted_edges if s in keep and d in keep]

    def __len__(self) -> int:
        return len(self.nodes)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DependencyGraph):
            return NotImplemented
        return (
            self.level == other.level
            and dict(self.nodes) == dict(other.nodes)
            and self.edges == other.edges
            and self.version_index == other.version_index
            and self.version_label == other.version_label
        )

    def __hash__(self) -> int:
        return hash((self.level, self.version_index, self.version_label, len(self.nodes), self.edges))


def build_graph(
    level: Level | str,
    nodes: Iterable[Node] | Mapping[str, Node],
    edges: Iterable[tuple[str, str]],
    version_index: int = 0,
    version_label: str = "",
) -> DependencyGraph:
    """Validate and freeze a graph. Self-loops are dropped, duplicate edges collapse."""
    level = Level(level)
    if isinstance(nodes, Mapping):
        nodes = nodes.values()
    table: dict[str, Node] = {}
    for node in nodes:
        node = Node(node.path, Level(node.level), int(node.loc), node.component)
        _check_path(node.path)
        if node.level is not level:
            raise LevelMismatchError(f"node {node.path} is {node.level}, graph is {level}")
        if node.loc < 0:
            raise GraphError(f"negative loc for {node.path}")
        if level is Level.COMPONENT and node.component is not None:
            raise GraphError(f"component node {node.path} cannot belong to a component")
        if node.component is not None:
            _check_path(node.component)
        table[node.path] = node
    edge_set = set()
    for src, dst in edges:
        for end in (src, dst):
            if end not in table:
                raise DanglingEdgeError(f"edge {src} -> {dst}: unknown node {end}")
        if src != dst:
            edge_set.add((src, dst))
    ordered = {p: table[p] for p in sorted(table)}
    return DependencyGraph(level, ordered, frozenset(edge_set), version_index, version_label)


def project_to_components(file_graph: DependencyGraph) -> DependencyGraph:
    if file_graph.level is not Level.FILE:
        raise LevelMismatchError("projection needs a file-level graph")
    loc: dict[str, int] = {}
    for path in file_graph.paths:
        node = file_graph.nodes[path]
        if node.component is None:
            raise MissingComponentError(f"file {path} has no component")
        loc[node.component] = loc.get(node.component, 0) + node.loc
    comp_edges = set()
    for src, dst in file_graph.edges:
        cs = file_graph.nodes[src].component
        cd = file_graph.nodes[dst].component
        if cs != cd:
            comp_edges.add((cs, cd))
    comp_nodes = [Node(c, Level.COMPONENT, n) for c, n in loc.items()]
    return build_graph(
        Level.COMPONENT,
        comp_nodes,
        comp_edges,
        file_graph.version_index,
        file_graph.version_label,
    )


@dataclass
class VersionSeries:
    project_id: str
    versions: list[tuple[DependencyGraph, DependencyGraph]] = field(default_factory=list)

    def __post_init__(self) -> None:
        for i, (fg, cg) in enumerate(self.versions):
            if fg.version_index != i or cg.version_index != i:
                raise GraphError(f"version {i} carries index {fg.version_index}/{cg.version_index}")
            if fg.level is not Level.FILE or cg.level is not Level.COMPONENT:
                raise LevelMismatchError(f"version {i}: expected (File, Component) pair")
            if project_to_components(fg) != cg:
                raise GraphError(f"version {i}: component graph is not the projection of the file graph")

    def append(self, file_graph: DependencyGraph) -> None:
        """Add the next version; the component graph is derived here."""
        idx = len(self.versions)
        if file_graph.version_index != idx:
            file_graph = reindex(file_graph, idx)
        self.versions.append((file_graph, project_to_components(file_graph)))

    def __len__(self) -> int:
        return len(self.versions)


def reindex(graph: DependencyGraph, version_index: int) -> DependencyGraph:
    return DependencyGraph(graph.level, graph.nodes, graph.edges, version_index, graph.version_label)


def tarjan_scc(nodes: Iterable[str], succ: Mapping[str, Iterable[str]]) -> list[list[str]]:
    """Iterative Tarjan. SCCs come out in reverse topological order, members sorted."""
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    result: list[list[str]] = []
    counter = 0
    for start in nodes:
        if start in index:
            continue
        index[start] = low[start] = counter
        counter += 1
        stack.append(start)
        on_stack.add(start)
        work = [(start, iter(succ.get(start, ())))]
        while work:
            v, it = work[-1]
            pushed = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ.get(w, ()))))
                    pushed = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if pushed:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                result.append(sorted(comp))
    return result


# -- interchange format ------------------------------------------------------

def dumps_graph(graph: DependencyGraph) -> str:
    buf = io.StringIO()
    _write(graph, buf)
    return buf.getvalue()


def _write(graph: DependencyGraph, out: TextIO) -> None:
    out.write(f"V {graph.version_label}\n")
    for path in graph.paths:
        node = graph.nodes[path]
        rec = f"N {node.level.value} {path} {node.loc}"
        if node.component is not None:
            rec += f" {node.component}"
        out.write(rec + "\n")
    for src, dst in graph.sorted_edges:
        out.write(f"E {src} {dst}\n")


def save_graph(graph: DependencyGraph, sink: str | os.PathLike | TextIO) -> None:
    if hasattr(sink, "write"):
        _write(graph, sink)  # type: ignore[arg-type]
        return
    path = Path(sink)
    path.parent.mkdir(parents=True, exist_ok=True)
    # newline="" keeps "\n" on every platform so files diff byte-for-byte
    with open(path, "w", encoding="utf-8", newline="") as fh:
        _write(graph, fh)


def loads_graph(
    text: str,
    level: Level | str | None = None,
    version_index: int = 0,
    source: str | None = None,
) -> DependencyGraph:
    label = ""
    nodes: list[Node] = []
    edges: list[tuple[str, str]] = []
    seen_level: Level | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tag, _, rest = line.partition(" ")
        if tag == "V":
            label = rest.strip()
        elif tag == "N":
            parts = rest.split()
            if len(parts) not in (3, 4):
                raise FormatError("node record needs 3 or 4 fields", lineno, source)
            try:
                node_level = Level(parts[0])
                loc = int(parts[2])
            except ValueError as exc:
                raise FormatError(str(exc), lineno, source) from None
            if loc < 0:
                raise FormatError("negative loc", lineno, source)
            if seen_level is None:
                seen_level = node_level
            elif node_level is not seen_level:
                raise FormatError("mixed node levels", lineno, source)
            nodes.append(Node(parts[1], node_level, loc, parts[3] if len(parts) == 4 else None))
        elif tag == "E":
            parts = rest.split()
            if len(parts) != 2:
                raise FormatError("edge record needs 2 fields", lineno, source)
            edges.append((parts[0], parts[1]))
        else:
            raise FormatError(f"unknown record tag {tag!r}", lineno, source)
    graph_level = Level(level) if level is not None else (seen_level or Level.FILE)
    try:
        return build_graph(graph_level, nodes, edges, version_index, label)
    except GraphError as exc:
        raise FormatError(str(exc), None, source) from None


def load_graph(
    source: str | os.PathLike | TextIO,
    level: Level | str | None = None,
    version_index: int | None = None,
) -> DependencyGraph:
    """Read an interchange file.

    When ``source`` is a path, the level defaults from the suffix
    (``.cgraph`` -> Component) and the version index from a numeric stem.
    An empty file yields an empty File-level graph.
    """
    if hasattr(source, "read"):
        return loads_graph(source.read(), level, version_index or 0)  # type: ignore[union-attr]
    path = Path(source)
    if level is None and path.suffix == COMPONENT_GRAPH_SUFFIX:
        level = Level.COMPONENT
    if version_index is None:
        version_index = int(path.stem) if path.stem.isdigit() else 0
    text = path.read_text(encoding="utf-8", errors="replace")
    return loads_graph(text, level, version_index, str(path))


def graph_paths(directory: str | os.PathLike, version_index: int) -> tuple[Path, Path]:
    base = Path(directory)
    return (
        base / f"{version_index}{FILE_GRAPH_SUFFIX}",
        base / f"{version_index}{COMPONENT_GRAPH_SUFFIX}",
    )
