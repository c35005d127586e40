"""Evolution analyses over tracked smells.

* trend classification of characteristic series against seven templates with DTW
* Kaplan-Meier survival per smell kind and per cycle shape
* co-occurrence (same-version overlap) and precedence (introduction order) matrices
* cycle shape transitions
"""

from __future__ import annotations

import enum
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

from .detect import NUMERIC_CHARACTERISTICS, SmellInstance, SmellType
from .errors import EmptyInputError, TooShortError
from .graph import Level
from .track import TemporalInstance

# -- trend classification ------------------------------------------------------


class TrendGroup(str, enum.Enum):
    CONSTANT = "Constant"
    INCREASING = "Increasing"
    DECREASING = "Decreasing"

    def __str__(self) -> str:
        return self.value


TEMPLATE_GROUP = {
    "a": TrendGroup.CONSTANT,
    "b": TrendGroup.INCREASING,
    "c": TrendGroup.INCREASING,
    "d": TrendGroup.INCREASING,
    "e": TrendGroup.DECREASING,
    "f": TrendGroup.DECREASING,
    "g": TrendGroup.DECREASING,
}


class TrendLabel(NamedTuple):
    template: str
    group: TrendGroup


MIN_TREND_LENGTH = 3


def dtw_distance(signal: Sequence[float], template: Sequence[float]) -> float:
    """DTW with |x - y| local cost and symmetric unit steps, divided by the path length.

    Among minimum-cost alignments the shortest path is used.
    """
    a = [float(x) for x in signal]
    b = [float(x) for x in template]
    if len(a) < 2 or len(b) < 2:
        raise TooShortError("DTW needs sequences of length >= 2")
    inf = (float("inf"), 0)
    prev = [inf] * (len(b) + 1)
    prev[0] = (0.0, 0)
    for x in a:
        row = [inf] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            best = min(prev[j - 1], prev[j], row[j - 1])
            row[j] = (best[0] + abs(x - y), best[1] + 1)
        prev = row
    total, length = prev[-1]
    return total / length


def templates(low: float, high: float) -> dict[str, tuple[float, ...]]:
    mid = (high + low) / 2
    third = (high - low) / 3
    return {
        "a": (mid, mid, mid, mid),
        "b": (low, low + third, low + 2 * third, high),
        "c": (low, low, high, high),
        "d": (low, low, low, high),
        "e": (high, high - third, high - 2 * third, low),
        "f": (high, high, low, low),
        "g": (high, high, high, low),
    }


def classify_trend(series: Sequence[float]) -> TrendLabel:
    """Label a series with the closest template; ties go to the earlier template."""
    values = [float(v) for v in series]
    if len(values) < MIN_TREND_LENGTH:
        raise TooShortError(f"trend classification needs >= {MIN_TREND_LENGTH} points")
    high, low = max(values), min(values)
    if high == low:
        return TrendLabel("a", TEMPLATE_GROUP["a"])
    # rescale to [0, 1] so the label does not depend on rounding of the raw range
    unit = [(v - low) / (high - low) for v in values]
    best_name, best_dist = "", float("inf")
    for name, tpl in templates(0.0, 1.0).items():
        dist = dtw_distance(unit, tpl)
        if dist < best_dist:
            best_name, best_dist = name, dist
    return TrendLabel(best_name, TEMPLATE_GROUP[best_name])


@dataclass(frozen=True)
class TrendRecord:
    tid: str
    kind: str
    characteristic: str
    template: str
    group: TrendGroup


def classify_temporal_trends(
    temporal: Iterable[TemporalInstance],
    min_age: int = MIN_TREND_LENGTH,
    characteristics: Sequence[str] = NUMERIC_CHARACTERISTICS,
) -> list[TrendRecord]:
    out = []
    for ti in temporal:
        if ti.age < min_age:
            continue
        for name in characteristics:
            series = ti.series(name)
            if series is None:
                continue
            label = classify_trend(series)
            out.append(TrendRecord(ti.tid, ti.kind, name, label.template, label.group))
    return out


def trend_tallies(records: Iterable[TrendRecord]) -> dict[tuple[str, str], dict[str, float]]:
    """Percentage of instances per trend group for each (kind, characteristic)."""
    counts: dict[tuple[str, str], Counter] = defaultdict(Counter)
    for r in records:
        counts[(r.kind, r.characteristic)][r.group.value] += 1
    out = {}
    for key in sorted(counts):
        total = sum(counts[key].values())
        out[key] = {g.value: 100.0 * counts[key][g.value] / total for g in TrendGroup}
    return out


# -- survival ---------------------------------------------------------------------


class SurvivalPoint(NamedTuple):
    t: int
    n: int
    d: int
    s: float


@dataclass
class SurvivalCurve:
    stratum: str
    points: list[SurvivalPoint]
    size: int = 0

    def survival_at(self, t: float) -> float:
        s = 1.0
        for p in self.points:
            if p.t <= t:
                s = p.s
        return s

    @property
    def median(self) -> int | None:
        for p in self.points:
            if p.s <= 0.5:
                return p.t
        return None


def km_estimator(lifetimes: Iterable[tuple[int, bool]], stratum: str = "") -> SurvivalCurve:
    """Kaplan-Meier product-limit estimate over (age, censored) records."""
    records = [(int(a), bool(c)) for a, c in lifetimes]
    if not records:
        raise EmptyInputError("km_estimator needs at least one lifetime")
    if any(a < 1 for a, _ in records):
        raise ValueError("ages must be >= 1")
    points = [SurvivalPoint(0, len(records), 0, 1.0)]
    s = 1.0
    for t in sorted({a for a, c in records if not c}):
        at_risk = sum(1 for a, _ in records if a >= t)
        deaths = sum(1 for a, c in records if a == t and not c)
        s *= 1.0 - deaths / at_risk
        points.append(SurvivalPoint(t, at_risk, deaths, s))
    return SurvivalCurve(stratum, points, len(records))


def birth_shape(ti: TemporalInstance) -> str | None:
    shape = ti.instances[0].characteristics.get("shape")
    return str(shape) if shape else None


def survival_by_stratum(temporal: Sequence[TemporalInstance]) -> list[SurvivalCurve]:
    """One curve per smell kind (type/level) and one per cycle shape at birth."""
    groups: dict[str, list[tuple[int, bool]]] = defaultdict(list)
    for ti in temporal:
        groups[ti.kind].append((ti.age, ti.censored))
        if ti.type is SmellType.CD:
            shape = birth_shape(ti)
            if shape:
                groups[f"shape:{shape}"].append((ti.age, ti.censored))
    kind_keys = sorted(k for k in groups if not k.startswith("shape:"))
    shape_keys = sorted(k for k in groups if k.startswith("shape:"))
    return [km_estimator(groups[k], k) for k in kind_keys + shape_keys]


# -- co-occurrence and precedence ---------------------------------------------------

Kind = tuple[SmellType, str | None]

COMPONENT_COOC_KINDS: tuple[Kind, ...] = (
    (SmellType.CD, "member"),
    (SmellType.UD, "less_stable"),
    (SmellType.UD, "centre"),
    (SmellType.HL, "incoming"),
    (SmellType.HL, "centre"),
    (SmellType.HL, "outgoing"),
    (SmellType.GC, "member"),
)
FILE_COOC_KINDS: tuple[Kind, ...] = (
    (SmellType.CD, "member"),
    (SmellType.HL, "incoming"),
    (SmellType.HL, "centre"),
    (SmellType.HL, "outgoing"),
)
COMPONENT_TYPES = (SmellType.CD, SmellType.UD, SmellType.HL, SmellType.GC)
FILE_TYPES = (SmellType.CD, SmellType.HL)


def kind_label(kind: Kind) -> str:
    t, role = kind
    if role is None or role == "member":
        return t.value
    return f"{t.value}.{role}"


@dataclass
class CoocMatrix:
    """Percentages stored as integer numerators/denominators per cell."""

    level: Level
    kinds: list[str]
    numerators: dict[tuple[str, str], int] = field(default_factory=dict)
    denominators: dict[tuple[str, str], int] = field(default_factory=dict)
    totals: dict[str, int] = field(default_factory=dict)
    k: int | None = None

    def entry(self, row: str, col: str) -> float | None:
        den = self.denominators.get((row, col), 0)
        if row == col or den == 0:
            return None
        return 100.0 * self.numerators.get((row, col), 0) / den

    @property
    def entries(self) -> dict[tuple[str, str], float | None]:
        return {(r, c): self.entry(r, c) for r in self.kinds for c in self.kinds if r != c}


def _by_version(instances: Iterable[SmellInstance] | Iterable[Iterable[SmellInstance]]) -> dict[int, list[SmellInstance]]:
    grouped: dict[int, list[SmellInstance]] = defaultdict(list)
    for item in instances:
        batch = [item] if isinstance(item, SmellInstance) else item
        for inst in batch:
            grouped[inst.version_index].append(inst)
    return grouped


def _cooc_for_level(grouped: dict[int, list[SmellInstance]], level: Level, kinds: Sequence[Kind]) -> CoocMatrix:
    labels = [kind_label(k) for k in kinds]
    mat = CoocMatrix(level, labels)
    type_totals: Counter = Counter()
    for v in sorted(grouped):
        insts = [i for i in grouped[v] if i.level is level]
        type_totals.update(i.type for i in insts)
        # artefact -> ids of instances carrying it in role of kind j
        index: dict[str, dict[str, set[str]]] = {lab: defaultdict(set) for lab in labels}
        for inst in insts:
            for kind, lab in zip(kinds, labels):
                if inst.type is kind[0]:
                    for a in inst.roles[kind[1]]:
                        index[lab][a].add(inst.id)
        for inst in insts:
            for kind_i, lab_i in zip(kinds, labels):
                if inst.type is not kind_i[0]:
                    continue
                mine = inst.roles[kind_i[1]]
                for lab_j in labels:
                    if lab_j == lab_i:
                        continue
                    hit = any(index[lab_j][a] - {inst.id} for a in mine if a in index[lab_j])
                    if hit:
                        mat.numerators[(lab_i, lab_j)] = mat.numerators.get((lab_i, lab_j), 0) + 1
    for kind, lab in zip(kinds, labels):
        mat.totals[lab] = type_totals[kind[0]]
        for lab_j in labels:
            if lab_j != lab:
                mat.denominators[(lab, lab_j)] = type_totals[kind[0]]
    return mat


def cooccurrence_matrix(per_version_instances) -> tuple[CoocMatrix, CoocMatrix]:
    """Same-version overlap percentages: (component-level matrix, file-level matrix).

    Rows count instances of the row kind whose role artefacts intersect those
    of at least one other instance of the column kind in the same version.
    """
    grouped = _by_version(per_version_instances)
    return (
        _cooc_for_level(grouped, Level.COMPONENT, COMPONENT_COOC_KINDS),
        _cooc_for_level(grouped, Level.FILE, FILE_COOC_KINDS),
    )


def _overlapping_pairs(temporal: Sequence[TemporalInstance]) -> dict[tuple[int, int], bool]:
    """Index pairs (x, y), x != y, different types, same level, sharing an artefact in some version."""
    by_version: dict[int, list[int]] = defaultdict(list)
    for idx, ti in enumerate(temporal):
        for inst in ti.instances:
            by_version[inst.version_index].append(idx)
    pairs: dict[tuple[int, int], bool] = {}
    for v in sorted(by_version):
        holders: dict[tuple[Level, str], list[int]] = defaultdict(list)
        for idx in by_version[v]:
            inst = temporal[idx].alive_at(v)
            for a in inst.artefacts:
                holders[(inst.level, a)].append(idx)
        for idxs in holders.values():
            for x in idxs:
                for y in idxs:
                    if x != y and temporal[x].type is not temporal[y].type:
                        pairs[(x, y)] = True
    return pairs


def precedence_matrices(
    temporal: Sequence[TemporalInstance],
    K: int | None = None,
    pairs: bool = False,
    k_values: Iterable[int] | None = None,
) -> list[CoocMatrix]:
    """Introduction-order percentages for k = 1..K, component level then file level per k.

    x of type i overlaps y of type j within k when both are alive and share
    an artefact in some version and their births differ by at most k; x
    precedes y when additionally y is born 1..k versions after x. By default
    a row instance counts once if it has any such partner; ``pairs=True``
    counts instance pairs instead.
    """
    temporal = list(temporal)
    if K is None:
        K = 1 + max((ti.last_version for ti in temporal), default=0)
    ks = list(k_values) if k_values is not None else list(range(1, K + 1))
    overlap = _overlapping_pairs(temporal)
    # per (x, type j): birth diffs of overlapping partners
    diffs: dict[tuple[int, SmellType], list[int]] = defaultdict(list)
    for (x, y) in sorted(overlap):
        diffs[(x, temporal[y].type)].append(temporal[y].birth_version - temporal[x].birth_version)

    out = []
    for k in ks:
        for level, types in ((Level.COMPONENT, COMPONENT_TYPES), (Level.FILE, FILE_TYPES)):
            labels = [t.value for t in types]
            mat = CoocMatrix(level, labels, k=k)
            for idx, ti in enumerate(temporal):
                if ti.level is not level:
                    continue
                mat.totals[ti.type.value] = mat.totals.get(ti.type.value, 0) + 1
                for tj in types:
                    if tj is ti.type:
                        continue
                    ds = diffs.get((idx, tj), ())
                    within = [d for d in ds if abs(d) <= k]
                    ahead = [d for d in within if d > 0]
                    cell = (ti.type.value, tj.value)
                    if pairs:
                        den, num = len(within), len(ahead)
                    else:
                        den, num = int(bool(within)), int(bool(ahead))
                    if den:
                        mat.denominators[cell] = mat.denominators.get(cell, 0) + den
                    if num:
                        mat.numerators[cell] = mat.numerators.get(cell, 0) + num
            for lab in labels:
                mat.totals.setdefault(lab, 0)
            out.append(mat)
    return out


def pool_matrices(matrices: Iterable[CoocMatrix]) -> CoocMatrix:
    """Combine per-project matrices, weighting each project by its occurrence counts."""
    matrices = list(matrices)
    if not matrices:
        raise EmptyInputError("nothing to pool")
    first = matrices[0]
    pooled = CoocMatrix(first.level, list(first.kinds), k=first.k)
    for m in matrices:
        if m.level is not first.level or m.k != first.k or m.kinds != first.kinds:
            raise ValueError("matrices differ in level, k or kinds")
        for attr in ("numerators", "denominators", "totals"):
            target = getattr(pooled, attr)
            for key, val in getattr(m, attr).items():
                target[key] = target.get(key, 0) + val
    return pooled


# -- shape transitions ------------------------------------------------------------------


@dataclass
class ShapeTransitions:
    transitions: dict[tuple[str, str], int]
    population: dict[str, int]
    changing: dict[str, int]
    instances: int = 0
    changed_instances: int = 0

    def percent_changing(self, shape: str) -> float | None:
        pop = self.population.get(shape, 0)
        return 100.0 * self.changing.get(shape, 0) / pop if pop else None


def shape_transitions(temporal_cds: Iterable[TemporalInstance], min_age: int = 1) -> ShapeTransitions:
    """Count adjacent-version shape changes and how much of each shape's population ever changes."""
    trans: Counter = Counter()
    population: Counter = Counter()
    changing: Counter = Counter()
    total = changed = 0
    for ti in temporal_cds:
        if ti.type is not SmellType.CD or ti.age < min_age:
            continue
        shapes = [s for s in ti.shapes]
        total += 1
        population.update(set(shapes))
        left = set()
        for s1, s2 in zip(shapes, shapes[1:]):
            if s1 != s2:
                trans[(s1, s2)] += 1
                left.add(s1)
        changing.update(left)
        changed += bool(left)
    return ShapeTransitions(dict(sorted(trans.items())), dict(sorted(population.items())),
                            dict(sorted(changing.items())), total, changed)
