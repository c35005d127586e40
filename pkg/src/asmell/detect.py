"""Detectors for Cyclic, Hub-Like, Unstable and God Component smells."""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import statistics
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import islice
from typing import Iterable, Mapping

import networkx as nx

from .errors import EmptyComponentError, LevelMismatchError, NotStronglyConnectedError
from .graph import DependencyGraph, Level, tarjan_scc
from .metrics import NodeMetrics, instability, node_metrics, smell_centrality

log = logging.getLogger(__name__)


class SmellType(str, enum.Enum):
    CD = "CD"
    HL = "HL"
    UD = "UD"
    GC = "GC"

    def __str__(self) -> str:
        return self.value


class Shape(str, enum.Enum):
    TINY = "Tiny"
    CIRCLE = "Circle"
    CHAIN = "Chain"
    STAR = "Star"
    CLIQUE = "Clique"
    MULTI = "Multi"

    def __str__(self) -> str:
        return self.value


class DesignLevel(str, enum.Enum):
    FILE_ONLY = "FileOnly"
    COMPONENT_ONLY = "ComponentOnly"
    BOTH = "Both"

    def __str__(self) -> str:
        return self.value


ROLE_SCHEMA: dict[SmellType, tuple[str, ...]] = {
    SmellType.CD: ("member",),
    SmellType.GC: ("member",),
    SmellType.HL: ("centre", "incoming", "outgoing"),
    SmellType.UD: ("centre", "less_stable"),
}

# characteristics that form numeric series for trend classification
NUMERIC_CHARACTERISTICS = (
    "size",
    "num_edges",
    "centrality",
    "strength",
    "instability_gap",
    "affected_ratio",
    "afferent_ratio",
    "efferent_ratio",
    "loc_density",
)

TYPE_ORDER = {t: i for i, t in enumerate(SmellType)}
LEVEL_ORDER = {Level.FILE: 0, Level.COMPONENT: 1}


def instance_id(type_, level, version_index, roles, key="") -> str:
    payload = json.dumps(
        [str(type_), str(level), version_index, sorted((r, sorted(m)) for r, m in roles.items()), key],
        separators=(",", ":"),
    )
    return hashlib.sha1(payload.encode()).hexdigest()[:16]


@dataclass
class SmellInstance:
    type: SmellType
    level: Level
    version_index: int
    roles: dict[str, frozenset[str]]
    characteristics: dict[str, float | str] = field(default_factory=dict)
    key: str = ""
    id: str = ""

    def __post_init__(self) -> None:
        self.type = SmellType(self.type)
        self.level = Level(self.level)
        self.roles = {r: frozenset(m) for r, m in self.roles.items()}
        schema = ROLE_SCHEMA[self.type]
        if set(self.roles) != set(schema):
            raise ValueError(f"{self.type} roles must be {schema}, got {sorted(self.roles)}")
        for role, members in self.roles.items():
            if not members:
                raise ValueError(f"{self.type} role {role} is empty")
        if self.type in (SmellType.UD, SmellType.GC) and self.level is not Level.COMPONENT:
            raise LevelMismatchError(f"{self.type} exists only at component level")
        if "centre" in self.roles and len(self.roles["centre"]) != 1:
            raise ValueError(f"{self.type} centre must be a single artefact")
        if not self.id:
            self.id = instance_id(self.type, self.level, self.version_index, self.roles, self.key)

    @property
    def artefacts(self) -> frozenset[str]:
        return frozenset().union(*self.roles.values())

    @property
    def centre(self) -> str | None:
        c = self.roles.get("centre")
        return next(iter(c)) if c else None

    def sort_key(self):
        return (LEVEL_ORDER[self.level], TYPE_ORDER[self.type], self.version_index, self.id)


# -- cyclic dependencies -------------------------------------------------------

def _strongly_connected(nodes: list[str], edges: set[tuple[str, str]]) -> bool:
    succ: dict[str, list[str]] = {n: [] for n in nodes}
    for s, d in edges:
        succ[s].append(d)
    return len(tarjan_scc(nodes, succ)) == 1


def classify_shape(nodes: Iterable[str], edges: Iterable[tuple[str, str]]) -> Shape:
    """Shape of a strongly connected subgraph; rules are tried in a fixed order."""
    nodes = sorted(set(nodes))
    keep = set(nodes)
    edges = {(s, d) for s, d in edges if s in keep and d in keep and s != d}
    n = len(nodes)
    if n < 2 or not _strongly_connected(nodes, edges):
        raise NotStronglyConnectedError(f"not a strongly connected subgraph: {nodes}")
    if n == 2:
        return Shape.TINY
    if len(edges) == n * (n - 1):
        return Shape.CLIQUE
    indeg = {v: 0 for v in nodes}
    outdeg = {v: 0 for v in nodes}
    for s, d in edges:
        outdeg[s] += 1
        indeg[d] += 1
    if all(indeg[v] == 1 and outdeg[v] == 1 for v in nodes):
        return Shape.CIRCLE
    for c in nodes:
        star = {(c, s) for s in nodes if s != c} | {(s, c) for s in nodes if s != c}
        if edges == star:
            return Shape.STAR
    symmetric = all((d, s) in edges for s, d in edges)
    if symmetric and len(edges) == 2 * (n - 1) and all(outdeg[v] <= 2 for v in nodes):
        return Shape.CHAIN
    return Shape.MULTI


def _cycle_instance(graph: DependencyGraph, members: list[str], key: str = "") -> SmellInstance:
    induced = graph.induced_edges(members)
    chars: dict[str, float | str] = {
        "size": len(members),
        "num_edges": len(induced),
        "shape": classify_shape(members, induced).value,
    }
    if key:
        chars["cycle"] = key
    return SmellInstance(
        SmellType.CD, graph.level, graph.version_index, {"member": frozenset(members)}, chars, key=key
    )


def detect_cycles(
    graph: DependencyGraph,
    mode: str = "scc",
    max_len: int | None = None,
    max_count: int | None = None,
) -> list[SmellInstance]:
    """One CD per non-trivial SCC, or per elementary cycle in ``elementary`` mode."""
    mode = mode.lower()
    if mode == "scc":
        comps = [c for c in tarjan_scc(graph.paths, graph.successors) if len(c) >= 2]
        found = [_cycle_instance(graph, c) for c in comps]
    elif mode == "elementary":
        g = nx.DiGraph()
        g.add_nodes_from(graph.paths)
        g.add_edges_from(graph.sorted_edges)
        cycles = nx.simple_cycles(g, length_bound=max_len)
        limit = max_count if max_count is not None else None
        taken = list(islice(cycles, limit + 1 if limit is not None else None))
        if limit is not None and len(taken) > limit:
            log.warning("elementary cycle cap %d hit in v%d (%s); output truncated",
                        limit, graph.version_index, graph.level)
            taken = taken[:limit]
        found = []
        for cyc in taken:
            if len(cyc) < 2:
                continue
            i = cyc.index(min(cyc))
            ordered = cyc[i:] + cyc[:i]
            found.append(_cycle_instance(graph, ordered, "->".join(ordered)))
    else:
        raise ValueError(f"unknown cycle mode {mode!r}")
    return sorted(found, key=SmellInstance.sort_key)


def affected_design_level(
    cd: SmellInstance,
    file_graph: DependencyGraph,
    component_graph: DependencyGraph,
    file_cycles: list[SmellInstance] | None = None,
) -> DesignLevel:
    if cd.type is not SmellType.CD:
        raise ValueError("design level applies to cyclic dependencies only")
    members = cd.roles["member"]
    if cd.level is Level.COMPONENT:
        if file_cycles is None:
            file_cycles = detect_cycles(file_graph)
        for fc in file_cycles:
            comps = {file_graph.component_of(f) for f in fc.roles["member"]}
            if len(comps & members) >= 2:
                return DesignLevel.BOTH
        return DesignLevel.COMPONENT_ONLY
    comps = sorted({file_graph.component_of(f) for f in members})
    if len(comps) <= 1:
        return DesignLevel.FILE_ONLY
    sub = {c: [d for d in component_graph.successors.get(c, ()) if d in comps] for c in comps}
    if any(len(scc) >= 2 for scc in tarjan_scc(comps, sub)):
        return DesignLevel.BOTH
    return DesignLevel.FILE_ONLY


# -- hub-like dependencies -------------------------------------------------------

def compute_hl_ratios(hl: SmellInstance, file_graph: DependencyGraph) -> tuple[float, float, float]:
    """(affected, afferent, efferent) ratios over the files of the hub component."""
    centre = hl.centre
    files = file_graph.members.get(centre, ())
    if not files:
        raise EmptyComponentError(f"component {centre} has no files")
    inside = set(files)
    afferent = {f for f in files if any(p not in inside for p in file_graph.predecessors[f])}
    efferent = {f for f in files if any(s not in inside for s in file_graph.successors[f])}
    n = len(files)
    return len(afferent | efferent) / n, len(afferent) / n, len(efferent) / n


def is_hub(fan_in: int, fan_out: int, median_in: float, median_out: float) -> bool:
    total = fan_in + fan_out
    return fan_in > median_in and fan_out > median_out and 4 * abs(fan_in - fan_out) < total


def detect_hublike(graph: DependencyGraph, file_graph: DependencyGraph | None = None) -> list[SmellInstance]:
    active = [p for p in graph.paths if graph.predecessors[p] or graph.successors[p]]
    if not active:
        return []
    med_in = statistics.median(len(graph.predecessors[p]) for p in active)
    med_out = statistics.median(len(graph.successors[p]) for p in active)
    found = []
    for p in active:
        ins, outs = graph.predecessors[p], graph.successors[p]
        if not is_hub(len(ins), len(outs), med_in, med_out):
            continue
        roles = {"centre": frozenset([p]), "incoming": frozenset(ins), "outgoing": frozenset(outs)}
        affected = set(ins) | set(outs) | {p}
        chars: dict[str, float | str] = {
            "size": len(affected),
            "num_edges": len(graph.induced_edges(affected)),
            "fan_in": len(ins),
            "fan_out": len(outs),
        }
        inst = SmellInstance(SmellType.HL, graph.level, graph.version_index, roles, chars)
        if graph.level is Level.COMPONENT and file_graph is not None:
            aff, aff_in, aff_out = compute_hl_ratios(inst, file_graph)
            chars.update(affected_ratio=aff, afferent_ratio=aff_in, efferent_ratio=aff_out)
        found.append(inst)
    return sorted(found, key=SmellInstance.sort_key)


# -- unstable dependencies -------------------------------------------------------

def detect_unstable(
    component_graph: DependencyGraph,
    metrics: Mapping[str, NodeMetrics] | None = None,
    threshold: float = 0.3,
) -> list[SmellInstance]:
    """A component is UD when strictly more than ``threshold`` of its dependencies are less stable."""
    if component_graph.level is not Level.COMPONENT:
        raise LevelMismatchError("unstable dependencies are component-level only")
    g = component_graph
    if metrics is None:
        inst_of = {p: instability(len(g.predecessors[p]), len(g.successors[p])) for p in g.paths}
    else:
        inst_of = {p: metrics[p].instability for p in g.paths}
    limit = Fraction(repr(float(threshold)))
    found = []
    for a in g.paths:
        deps = g.successors[a]
        if not deps:
            continue
        worse = [d for d in deps if inst_of[d] > inst_of[a]]
        if not worse or Fraction(len(worse), len(deps)) <= limit:
            continue
        gap = statistics.fmean(inst_of[d] for d in worse) - inst_of[a]
        affected = set(worse) | {a}
        chars: dict[str, float | str] = {
            "size": len(affected),
            "num_edges": len(g.induced_edges(affected)),
            "strength": len(worse) / len(deps),
            "instability_gap": gap,
            "instability": inst_of[a],
        }
        roles = {"centre": frozenset([a]), "less_stable": frozenset(worse)}
        found.append(SmellInstance(SmellType.UD, Level.COMPONENT, g.version_index, roles, chars))
    return found


# -- god components --------------------------------------------------------------

def god_threshold(locs: list[int], min_loc: float = 0) -> float | None:
    """Tukey upper fence Q3 + 1.5 IQR with linear-interpolation quartiles; None below 4 values."""
    if len(locs) < 4:
        return None
    q1, _, q3 = statistics.quantiles(locs, n=4, method="inclusive")
    return max(q3 + 1.5 * (q3 - q1), min_loc)


def detect_god_components(
    component_graph: DependencyGraph,
    file_graph: DependencyGraph | None = None,
    min_loc: float = 0,
) -> list[SmellInstance]:
    if component_graph.level is not Level.COMPONENT:
        raise LevelMismatchError("god components are component-level only")
    g = component_graph
    threshold = god_threshold([g.loc(p) for p in g.paths], min_loc)
    if threshold is None:
        log.info("GC detector abstains in v%d: %d components (< 4)", g.version_index, len(g))
        return []
    found = []
    for c in g.paths:
        loc = g.loc(c)
        if loc <= threshold:
            continue
        chars: dict[str, float | str] = {"loc": loc, "num_edges": 0, "threshold": threshold}
        if file_graph is not None:
            files = len(file_graph.members.get(c, ()))
            chars["size"] = files
            chars["loc_density"] = loc / files if files else float(loc)
        found.append(SmellInstance(SmellType.GC, Level.COMPONENT, g.version_index, {"member": frozenset([c])}, chars))
    return found


# -- whole version -----------------------------------------------------------------

@dataclass
class DetectConfig:
    cd_mode: str = "scc"
    cd_max_len: int | None = None
    cd_max_count: int | None = None
    ud_threshold: float = 0.3
    gc_min_loc: float = 0
    damping: float = 0.85


def detect_version(
    file_graph: DependencyGraph,
    component_graph: DependencyGraph,
    config: DetectConfig | None = None,
) -> list[SmellInstance]:
    """Run every detector on one version and attach the shared characteristics."""
    config = config or DetectConfig()
    fmetrics = node_metrics(file_graph, config.damping)
    cmetrics = node_metrics(component_graph, config.damping)

    file_cds = detect_cycles(file_graph, config.cd_mode, config.cd_max_len, config.cd_max_count)
    comp_cds = detect_cycles(component_graph, config.cd_mode, config.cd_max_len, config.cd_max_count)
    for cd in file_cds + comp_cds:
        cd.characteristics["design_level"] = affected_design_level(
            cd, file_graph, component_graph, file_cds
        ).value

    found = (
        file_cds
        + comp_cds
        + detect_hublike(file_graph)
        + detect_hublike(component_graph, file_graph)
        + detect_unstable(component_graph, cmetrics, config.ud_threshold)
        + detect_god_components(component_graph, file_graph, config.gc_min_loc)
    )
    for inst in found:
        metrics, n = (fmetrics, len(file_graph)) if inst.level is Level.FILE else (cmetrics, len(component_graph))
        inst.characteristics["centrality"] = smell_centrality(inst, metrics, n)
    return sorted(found, key=SmellInstance.sort_key)
