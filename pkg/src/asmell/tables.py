"""CSV tables exchanged between pipeline stages.

Every table is a header plus rows of already-formatted strings, so writing a
table twice, or reading it back and writing it again, gives identical bytes.
"""

from __future__ import annotations

import csv
import io
import os
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .detect import SmellInstance, SmellType
from .errors import FormatError, MissingStageInputError
from .evolve import CoocMatrix, ShapeTransitions, SurvivalCurve, TrendRecord
from .graph import Level
from .metrics import NodeMetrics
from .track import TemporalInstance

CENSORED = "C"

HEADERS = {
    "versions": ["version_index", "version_label"],
    "smells": ["version_index", "version_label", "type", "level", "id", "role", "artefact"],
    "characteristics": ["id", "name", "value"],
    "metrics": ["version_index", "level", "artefact", "fan_in", "fan_out", "instability", "pagerank", "loc"],
    "temporal": ["tid", "type", "level", "birth", "death_or_C", "age", "member_instance_ids"],
    "trends": ["tid", "characteristic", "template", "group"],
    "trend_tallies": ["kind", "characteristic", "instances", "Constant", "Increasing", "Decreasing"],
    "survival": ["stratum", "t", "n", "d", "S"],
    "cooc_component": ["row", "col", "numerator", "denominator", "pct"],
    "cooc_file": ["row", "col", "numerator", "denominator", "pct"],
    "precedence_k": ["k", "level", "row", "col", "numerator", "denominator", "pct"],
    "shape_transitions": ["from_shape", "to_shape", "transitions"],
    "shape_population": ["shape", "population", "changing", "pct_changing"],
    "counts_over_time": ["version_index", "version_label", "type", "level", "count"],
    "heatmap": ["component", "type", "count"],
    "components": ["component", "loc", "files", "fan_in", "fan_out", "instability", "pagerank"],
    "component_edges": ["source", "target"],
}


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_value(text: str) -> int | float | str:
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


@dataclass
class Table:
    name: str
    rows: list[list[str]] = field(default_factory=list)

    @property
    def header(self) -> list[str]:
        return HEADERS[self.name]

    @property
    def filename(self) -> str:
        return f"{self.name}.csv"

    def dicts(self) -> list[dict[str, str]]:
        return [dict(zip(self.header, r)) for r in self.rows]

    def dumps(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(self.header)
        writer.writerows(self.rows)
        return buf.getvalue()

    def write(self, directory: str | os.PathLike) -> Path:
        path = Path(directory) / self.filename
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.dumps())
        return path


def read_table(name: str, directory: str | os.PathLike) -> Table:
    path = Path(directory) / f"{name}.csv"
    if not path.exists():
        raise MissingStageInputError(path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("empty table", 1, str(path)) from None
        if header != HEADERS[name]:
            raise FormatError(f"unexpected header {header}", 1, str(path))
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise FormatError(f"expected {len(header)} fields, got {len(row)}", lineno, str(path))
            rows.append(row)
    return Table(name, rows)


# -- versions, smells, metrics ---------------------------------------------------

def versions_table(labels: Sequence[str]) -> Table:
    return Table("versions", [[str(i), lab] for i, lab in enumerate(labels)])


def read_versions(table: Table) -> list[str]:
    labels = []
    for i, row in enumerate(table.rows):
        if row[0] != str(i):
            raise FormatError(f"version indices must run 0..n-1, got {row[0]}", i + 2, table.filename)
        labels.append(row[1])
    return labels


def smells_tables(per_version: Sequence[Sequence[SmellInstance]], labels: Sequence[str]) -> tuple[Table, Table]:
    smells = Table("smells")
    chars = Table("characteristics")
    for v, insts in enumerate(per_version):
        for inst in insts:
            for role in sorted(inst.roles):
                for art in sorted(inst.roles[role]):
                    smells.rows.append(
                        [str(v), labels[v], inst.type.value, inst.level.value, inst.id, role, art]
                    )
            for name in sorted(inst.characteristics):
                chars.rows.append([inst.id, name, fmt(inst.characteristics[name])])
    return smells, chars


def read_smells(smells: Table, chars: Table, n_versions: int) -> list[list[SmellInstance]]:
    roles: dict[str, dict[str, set[str]]] = defaultdict(lambda: defaultdict(set))
    meta: dict[str, tuple[int, str, str]] = {}
    order: list[str] = []
    for lineno, row in enumerate(smells.rows, start=2):
        v, _label, type_, level, sid, role, art = row
        try:
            key = (int(v), type_, level)
        except ValueError:
            raise FormatError(f"bad version index {v!r}", lineno, smells.filename) from None
        if sid not in meta:
            meta[sid] = key
            order.append(sid)
        elif meta[sid] != key:
            raise FormatError(f"instance {sid} changes version/type/level", lineno, smells.filename)
        roles[sid][role].add(art)
    characteristics: dict[str, dict[str, float | str]] = defaultdict(dict)
    for sid, name, value in chars.rows:
        characteristics[sid][name] = parse_value(value)
    per_version: list[list[SmellInstance]] = [[] for _ in range(n_versions)]
    for sid in order:
        v, type_, level = meta[sid]
        if not 0 <= v < n_versions:
            raise FormatError(f"instance {sid} in unknown version {v}", None, smells.filename)
        c = characteristics.get(sid, {})
        inst = SmellInstance(
            SmellType(type_), Level(level), v,
            {r: frozenset(m) for r, m in roles[sid].items()},
            dict(c), key=str(c.get("cycle", "")), id=sid,
        )
        per_version[v].append(inst)
    for insts in per_version:
        insts.sort(key=SmellInstance.sort_key)
    return per_version


def metrics_rows(version_index: int, level: Level, metrics: dict[str, NodeMetrics]) -> list[list[str]]:
    return [
        [str(version_index), level.value, p, fmt(m.fan_in), fmt(m.fan_out), fmt(m.instability), fmt(m.pagerank), fmt(m.loc)]
        for p, m in sorted(metrics.items())
    ]


# -- temporal ------------------------------------------------------------------------

def temporal_table(temporal: Iterable[TemporalInstance]) -> Table:
    t = Table("temporal")
    for ti in temporal:
        t.rows.append([
            ti.tid, ti.type.value, ti.level.value, str(ti.birth_version),
            CENSORED if ti.censored else str(ti.death_version), str(ti.age),
            " ".join(i.id for i in ti.instances),
        ])
    return t


def read_temporal(table: Table, per_version: Sequence[Sequence[SmellInstance]]) -> list[TemporalInstance]:
    by_id = {i.id: i for insts in per_version for i in insts}
    out = []
    for lineno, row in enumerate(table.rows, start=2):
        tid, type_, level, birth, death, age, members = row
        try:
            insts = [by_id[m] for m in members.split()]
        except KeyError as exc:
            raise FormatError(f"unknown instance id {exc.args[0]}", lineno, table.filename) from None
        ti = TemporalInstance(tid, SmellType(type_), Level(level), insts,
                              None if death == CENSORED else int(death))
        if ti.age != int(age) or ti.birth_version != int(birth):
            raise FormatError("age/birth disagree with member instances", lineno, table.filename)
        out.append(ti)
    return out


# -- evolution results ------------------------------------------------------------------

def trends_table(records: Iterable[TrendRecord]) -> Table:
    return Table("trends", [[r.tid, r.characteristic, r.template, r.group.value] for r in records])


def trend_tallies_table(records: Sequence[TrendRecord]) -> Table:
    counts: dict[tuple[str, str], dict[str, int]] = defaultdict(lambda: defaultdict(int))
    for r in records:
        counts[(r.kind, r.characteristic)][r.group.value] += 1
    t = Table("trend_tallies")
    for (kind, name) in sorted(counts):
        c = counts[(kind, name)]
        total = sum(c.values())
        t.rows.append([kind, name, str(total)] + [fmt(100.0 * c[g] / total) for g in ("Constant", "Increasing", "Decreasing")])
    return t


def survival_table(curves: Iterable[SurvivalCurve]) -> Table:
    t = Table("survival")
    for c in curves:
        for p in c.points:
            t.rows.append([c.stratum, str(p.t), str(p.n), str(p.d), fmt(p.s)])
    return t


def cooc_table(name: str, mat: CoocMatrix) -> Table:
    t = Table(name)
    for r in mat.kinds:
        for c in mat.kinds:
            if r == c:
                continue
            t.rows.append([r, c, str(mat.numerators.get((r, c), 0)), str(mat.denominators.get((r, c), 0)),
                           fmt(mat.entry(r, c))])
    return t


def precedence_table(matrices: Iterable[CoocMatrix]) -> Table:
    t = Table("precedence_k")
    for mat in matrices:
        for r in mat.kinds:
            for c in mat.kinds:
                if r == c:
                    continue
                t.rows.append([str(mat.k), mat.level.value, r, c, str(mat.numerators.get((r, c), 0)),
                               str(mat.denominators.get((r, c), 0)), fmt(mat.entry(r, c))])
    return t


def shape_tables(st: ShapeTransitions) -> tuple[Table, Table]:
    trans = Table("shape_transitions", [[a, b, str(n)] for (a, b), n in sorted(st.transitions.items())])
    pop = Table("shape_population")
    for shape in sorted(st.population):
        pop.rows.append([shape, str(st.population[shape]), str(st.changing.get(shape, 0)),
                         fmt(st.percent_changing(shape))])
    return trans, pop
