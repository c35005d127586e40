"""Analysis bundle, CSV/JSON emission and the static HTML report.

The HTML is a single file with inline SVG charts and no external fetches.
Everything it shows is read from the bundle's tables, which are also written
as CSV, so the report never computes numbers of its own.
"""

from __future__ import annotations

import html
import json
import os
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .detect import SmellInstance, SmellType
from .graph import DependencyGraph, Level, tarjan_scc
from .tables import HEADERS, Table, parse_value, read_table

TOP_N = 20
REPORT_TABLES = (
    "versions", "smells", "characteristics", "metrics", "temporal", "trends", "trend_tallies",
    "survival", "cooc_component", "cooc_file", "precedence_k", "shape_transitions",
    "shape_population", "counts_over_time", "heatmap", "components", "component_edges",
)
TYPE_COLOURS = {"CD": "#d9480f", "HL": "#1c7ed6", "UD": "#7048e8", "GC": "#2b8a3e"}
STRATUM_COLOURS = ["#d9480f", "#1c7ed6", "#7048e8", "#2b8a3e", "#e67700", "#0b7285", "#c2255c", "#5c940d", "#495057", "#862e9c"]


@dataclass
class AnalysisBundle:
    project_id: str
    tables: dict[str, Table] = field(default_factory=dict)

    def table(self, name: str) -> Table:
        return self.tables.get(name) or Table(name)

    def rows(self, name: str) -> list[dict[str, str]]:
        return self.table(name).dicts()


# -- report-only tables --------------------------------------------------------------

def counts_over_time_table(per_version: Sequence[Sequence[SmellInstance]], labels: Sequence[str]) -> Table:
    t = Table("counts_over_time")
    kinds = sorted({(i.type.value, i.level.value) for insts in per_version for i in insts})
    for v, insts in enumerate(per_version):
        c = Counter((i.type.value, i.level.value) for i in insts)
        for kind in kinds:
            t.rows.append([str(v), labels[v], kind[0], kind[1], str(c[kind])])
    return t


def heatmap_table(latest: Sequence[SmellInstance], file_graph: DependencyGraph | None) -> Table:
    """Role-member entries of the latest version, attributed to components.

    File artefacts are attributed to the component that contains them.
    """
    counts: Counter = Counter()
    for inst in latest:
        for members in inst.roles.values():
            for art in members:
                if inst.level is Level.FILE:
                    comp = file_graph.component_of(art) if file_graph is not None and art in file_graph.nodes else None
                    comp = comp or art
                else:
                    comp = art
                counts[(comp, inst.type.value)] += 1
    return Table("heatmap", [[c, t, str(n)] for (c, t), n in sorted(counts.items())])


def component_tables(file_graph: DependencyGraph | None, comp_graph: DependencyGraph | None, metrics_rows: list[dict[str, str]]) -> tuple[Table, Table]:
    nodes, edges = Table("components"), Table("component_edges")
    if comp_graph is None:
        return nodes, edges
    m = {r["artefact"]: r for r in metrics_rows
         if r["level"] == Level.COMPONENT.value and r["version_index"] == str(comp_graph.version_index)}
    for c in comp_graph.paths:
        files = len(file_graph.members.get(c, ())) if file_graph is not None else 0
        row = m.get(c, {})
        nodes.rows.append([c, str(comp_graph.loc(c)), str(files), row.get("fan_in", ""), row.get("fan_out", ""),
                           row.get("instability", ""), row.get("pagerank", "")])
    edges.rows = [[s, d] for s, d in comp_graph.sorted_edges]
    return nodes, edges


def build_bundle(
    project_id: str,
    tables: dict[str, Table],
    per_version: Sequence[Sequence[SmellInstance]],
    labels: Sequence[str],
    latest_graphs: tuple[DependencyGraph, DependencyGraph] | None,
) -> AnalysisBundle:
    tables = dict(tables)
    fg, cg = latest_graphs if latest_graphs else (None, None)
    tables["counts_over_time"] = counts_over_time_table(per_version, labels)
    tables["heatmap"] = heatmap_table(per_version[-1] if per_version else [], fg)
    metrics = tables["metrics"].dicts() if "metrics" in tables else []
    tables["components"], tables["component_edges"] = component_tables(fg, cg, metrics)
    for name in REPORT_TABLES:
        tables.setdefault(name, Table(name))
    return AnalysisBundle(project_id, {n: tables[n] for n in REPORT_TABLES})


def load_tables(csv_dir: str | os.PathLike, names: Sequence[str] = REPORT_TABLES) -> dict[str, Table]:
    return {n: read_table(n, csv_dir) for n in names}


# -- CSV / JSON ---------------------------------------------------------------------------

def emit_csv(bundle: AnalysisBundle, out_dir: str | os.PathLike) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return [bundle.table(name).write(out_dir) for name in HEADERS if name in REPORT_TABLES]


def summary(bundle: AnalysisBundle) -> dict:
    per_type: Counter = Counter()
    latest: Counter = Counter()
    versions = bundle.table("versions").rows
    last = str(len(versions) - 1)
    seen = set()
    for r in bundle.rows("smells"):
        if r["id"] in seen:
            continue
        seen.add(r["id"])
        kind = f"{r['type']}/{r['level']}"
        per_type[kind] += 1
        if r["version_index"] == last:
            latest[kind] += 1
    medians: dict[str, int | None] = {}
    for r in bundle.rows("survival"):
        medians.setdefault(r["stratum"], None)
        if medians[r["stratum"]] is None and float(r["S"]) <= 0.5:
            medians[r["stratum"]] = int(r["t"])
    trends = {
        f"{r['kind']}:{r['characteristic']}": {
            "instances": int(r["instances"]),
            "Constant": float(r["Constant"]),
            "Increasing": float(r["Increasing"]),
            "Decreasing": float(r["Decreasing"]),
        }
        for r in bundle.rows("trend_tallies")
    }
    temporal = bundle.rows("temporal")
    return {
        "project": bundle.project_id,
        "versions": len(versions),
        "instances_per_type": dict(sorted(per_type.items())),
        "instances_latest_version": dict(sorted(latest.items())),
        "temporal_instances": len(temporal),
        "censored_temporal_instances": sum(1 for r in temporal if r["death_or_C"] == "C"),
        "median_survival": medians,
        "trend_groups_pct": trends,
    }


def write_summary(bundle: AnalysisBundle, path: str | os.PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(summary(bundle), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


# -- SVG helpers ------------------------------------------------------------------------------

def _e(text) -> str:
    return html.escape(str(text), quote=True)


def _n(x: float) -> str:
    return f"{x:.2f}".rstrip("0").rstrip(".")


def _axis(x0, y0, w, h) -> str:
    return (f'<line x1="{x0}" y1="{y0 + h}" x2="{x0 + w}" y2="{y0 + h}" class="axis"/>'
            f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y0 + h}" class="axis"/>')


def _placeholder(msg: str) -> str:
    return f'<p class="placeholder">{_e(msg)}</p>'


def svg_component_graph(bundle: AnalysisBundle) -> str:
    nodes = [r["component"] for r in bundle.rows("components")]
    edges = [(r["source"], r["target"]) for r in bundle.rows("component_edges")]
    if not nodes:
        return _placeholder("No components found.")
    succ: dict[str, list[str]] = {n: [] for n in nodes}
    for s, d in edges:
        succ[s].append(d)
    sccs = tarjan_scc(nodes, succ)  # reverse topological: dependencies first
    scc_of = {n: i for i, c in enumerate(sccs) for n in c}
    layer = [0] * len(sccs)
    for i, comp in enumerate(sccs):
        deps = {scc_of[d] for n in comp for d in succ[n] if scc_of[d] != i}
        layer[i] = 1 + max((layer[j] for j in deps), default=-1)
    rows: dict[int, list[str]] = defaultdict(list)
    for n in nodes:
        rows[layer[scc_of[n]]].append(n)
    depth = max(rows) + 1
    width = max(len(r) for r in rows.values()) * 150 + 40
    height = depth * 80 + 40
    pos = {}
    for lay, members in rows.items():
        y = height - 40 - lay * 80  # dependencies at the bottom
        for k, n in enumerate(sorted(members)):
            pos[n] = (20 + 75 + k * 150, y)
    cyclic = {n for c in sccs if len(c) > 1 for n in c}
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" class="chart">',
             '<defs><marker id="arr" viewBox="0 0 10 10" refX="10" refY="5" markerWidth="6" markerHeight="6" '
             'orient="auto-start-reverse"><path d="M0,0 L10,5 L0,10 z" fill="#868e96"/></marker></defs>']
    for s, d in edges:
        (x1, y1), (x2, y2) = pos[s], pos[d]
        cls = "edge cyc" if scc_of[s] == scc_of[d] else "edge"
        parts.append(f'<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2 + (14 if y2 > y1 else -14) if y1 != y2 else y2}" '
                     f'class="{cls}" marker-end="url(#arr)"/>')
    for n in nodes:
        x, y = pos[n]
        cls = "node cyc" if n in cyclic else "node"
        parts.append(f'<g><rect x="{x - 65}" y="{y - 14}" width="130" height="28" rx="6" class="{cls}"/>'
                     f'<text x="{x}" y="{y + 4}" text-anchor="middle">{_e(n[-20:])}</text><title>{_e(n)}</title></g>')
    parts.append("</svg>")
    return "".join(parts)


def svg_heatmap(bundle: AnalysisBundle) -> str:
    rows = bundle.rows("heatmap")
    if not rows:
        return _placeholder("No smells detected in the latest version.")
    types = [t.value for t in SmellType if any(r["type"] == t.value for r in rows)]
    comps = sorted({r["component"] for r in rows})
    val = {(r["component"], r["type"]): int(r["count"]) for r in rows}
    top = max(val.values())
    cw, ch, left = 70, 22, 200
    width, height = left + cw * len(types) + 20, 40 + ch * len(comps)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" class="chart">']
    for j, t in enumerate(types):
        parts.append(f'<text x="{left + j * cw + cw / 2}" y="24" text-anchor="middle" class="lbl">{t}</text>')
    for i, c in enumerate(comps):
        y = 32 + i * ch
        parts.append(f'<text x="{left - 6}" y="{y + 15}" text-anchor="end" class="lbl">{_e(c[-28:])}</text>')
        for j, t in enumerate(types):
            n = val.get((c, t), 0)
            op = _n(0.12 + 0.88 * n / top) if n else "0"
            parts.append(f'<rect x="{left + j * cw}" y="{y}" width="{cw - 2}" height="{ch - 2}" fill="{TYPE_COLOURS[t]}" '
                         f'fill-opacity="{op}" class="cell" data-type="{t}"><title>{_e(c)} {t}: {n}</title></rect>')
            if n:
                parts.append(f'<text x="{left + j * cw + cw / 2}" y="{y + 15}" text-anchor="middle" class="val">{n}</text>')
    parts.append("</svg>")
    return "".join(parts)


def svg_counts_over_time(bundle: AnalysisBundle) -> str:
    rows = bundle.rows("counts_over_time")
    if not rows:
        return _placeholder("No smells detected.")
    series: dict[str, list[tuple[int, int]]] = defaultdict(list)
    for r in rows:
        series[f"{r['type']}/{r['level']}"].append((int(r["version_index"]), int(r["count"])))
    nv = max(v for s in series.values() for v, _ in s) + 1
    top = max(1, max(c for s in series.values() for _, c in s))
    x0, y0, w, h = 50, 20, 560, 220
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {x0 + w + 170} {y0 + h + 40}" class="chart">',
             _axis(x0, y0, w, h),
             f'<text x="{x0 - 6}" y="{y0 + 4}" text-anchor="end" class="lbl">{top}</text>',
             f'<text x="{x0 - 6}" y="{y0 + h}" text-anchor="end" class="lbl">0</text>',
             f'<text x="{x0 + w / 2}" y="{y0 + h + 32}" text-anchor="middle" class="lbl">version</text>']
    for k, (name, pts) in enumerate(sorted(series.items())):
        colour = STRATUM_COLOURS[k % len(STRATUM_COLOURS)]
        xy = " ".join(f"{_n(x0 + (v / max(1, nv - 1)) * w)},{_n(y0 + h - c / top * h)}" for v, c in pts)
        parts.append(f'<polyline points="{xy}" fill="none" stroke="{colour}" stroke-width="2"/>')
        parts.append(f'<text x="{x0 + w + 10}" y="{y0 + 14 + 16 * k}" fill="{colour}" class="lbl">{_e(name)}</text>')
    parts.append("</svg>")
    return "".join(parts)


def svg_degree_histogram(bundle: AnalysisBundle) -> str:
    rows = [r for r in bundle.rows("components") if r["fan_in"] != ""]
    if not rows:
        return _placeholder("No component metrics available.")
    rows = sorted(rows, key=lambda r: (-(int(r["fan_in"]) + int(r["fan_out"])), r["component"]))[:30]
    top = max(1, max(max(int(r["fan_in"]), int(r["fan_out"])) for r in rows))
    bw, h, x0, y0 = 24, 200, 40, 20
    width = x0 + len(rows) * (2 * bw + 10) + 20
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {y0 + h + 110}" class="chart">',
             _axis(x0, y0, width - x0 - 10, h),
             f'<text x="{x0 - 6}" y="{y0 + 4}" text-anchor="end" class="lbl">{top}</text>']
    for k, r in enumerate(rows):
        x = x0 + 6 + k * (2 * bw + 10)
        for j, (key, colour) in enumerate((("fan_in", "#1c7ed6"), ("fan_out", "#d9480f"))):
            v = int(r[key])
            bh = v / top * h
            parts.append(f'<rect x="{x + j * bw}" y="{_n(y0 + h - bh)}" width="{bw - 2}" height="{_n(bh)}" fill="{colour}">'
                         f'<title>{_e(r["component"])} {key}: {v}</title></rect>')
        parts.append(f'<text transform="translate({x + bw},{y0 + h + 12}) rotate(45)" class="lbl">{_e(r["component"][-18:])}</text>')
    parts.append("</svg>")
    return "".join(parts)


def svg_survival(bundle: AnalysisBundle) -> str:
    rows = bundle.rows("survival")
    if not rows:
        return _placeholder("No temporal instances to analyse.")
    curves: dict[str, list[tuple[int, float]]] = defaultdict(list)
    for r in rows:
        curves[r["stratum"]].append((int(r["t"]), float(r["S"])))
    tmax = max(1, max(t for c in curves.values() for t, _ in c))
    x0, y0, w, h = 50, 20, 560, 220

    def px(t):
        return _n(x0 + t / tmax * w)

    def py(s):
        return _n(y0 + h - s * h)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {x0 + w + 190} {y0 + h + 40}" class="chart">',
             _axis(x0, y0, w, h),
             f'<line x1="{x0}" y1="{py(0.5)}" x2="{x0 + w}" y2="{py(0.5)}" class="guide"/>',
             f'<text x="{x0 - 6}" y="{py(0.5)}" text-anchor="end" class="lbl">0.5</text>',
             f'<text x="{x0 - 6}" y="{py(1)}" text-anchor="end" class="lbl">1</text>',
             f'<text x="{x0 + w}" y="{y0 + h + 16}" text-anchor="end" class="lbl">{tmax}</text>',
             f'<text x="{x0 + w / 2}" y="{y0 + h + 32}" text-anchor="middle" class="lbl">versions survived (t)</text>']
    for k, (name, pts) in enumerate(curves.items()):
        colour = STRATUM_COLOURS[k % len(STRATUM_COLOURS)]
        path = [f"M{px(pts[0][0])},{py(pts[0][1])}"]
        for (_t0, s0), (t1, s1) in zip(pts, pts[1:]):
            path.append(f"H{px(t1)}V{py(s1)}")
        parts.append(f'<path d="{"".join(path)}" fill="none" stroke="{colour}" stroke-width="2"/>')
        median = next((t for t, s in pts if s <= 0.5), None)
        if median is not None:
            parts.append(f'<line x1="{px(median)}" y1="{y0}" x2="{px(median)}" y2="{y0 + h}" stroke="{colour}" '
                         f'class="median" data-stratum="{_e(name)}" data-t="{median}"/>')
        label = f"{name} (t50={median})" if median is not None else f"{name} (t50 not reached)"
        parts.append(f'<text x="{x0 + w + 10}" y="{y0 + 14 + 16 * k}" fill="{colour}" class="lbl">{_e(label)}</text>')
    parts.append("</svg>")
    return "".join(parts)


def _html_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    head = "".join(f"<th>{_e(h)}</th>" for h in header)
    body = "".join("<tr>" + "".join(f"<td>{_e(c)}</td>" for c in r) + "</tr>" for r in rows)
    return f"<table><thead><tr>{head}</tr></thead><tbody>{body}</tbody></table>"


def _pct(text: str) -> str:
    if text == "":
        return ""
    return f"{float(text):.0f}%"


def matrix_html(bundle: AnalysisBundle, name: str) -> str:
    rows = bundle.rows(name)
    if not rows:
        return _placeholder("No instances at this level.")
    kinds: list[str] = []
    for r in rows:
        if r["row"] not in kinds:
            kinds.append(r["row"])
    cell = {(r["row"], r["col"]): _pct(r["pct"]) for r in rows}
    totals = {r["row"]: r["denominator"] for r in rows}
    body = [[k] + [("-" if k == c else cell.get((k, c), "")) for c in kinds] + [totals.get(k, "0")] for k in kinds]
    return _html_table([""] + kinds + ["instances"], body)


def smell_details_html(bundle: AnalysisBundle) -> str:
    versions = bundle.table("versions").rows
    if not versions:
        return _placeholder("No versions analysed.")
    last = str(len(versions) - 1)
    members: dict[str, dict] = {}
    for r in bundle.rows("smells"):
        if r["version_index"] != last:
            continue
        m = members.setdefault(r["id"], {"type": r["type"], "level": r["level"], "roles": defaultdict(list)})
        m["roles"][r["role"]].append(r["artefact"])
    if not members:
        return _placeholder("No smells detected in the latest version.")
    chars: dict[str, dict[str, str]] = defaultdict(dict)
    for r in bundle.rows("characteristics"):
        if r["id"] in members:
            chars[r["id"]][r["name"]] = r["value"]

    def size(sid):
        v = parse_value(chars[sid].get("size", "0"))
        return v if isinstance(v, (int, float)) else 0

    ranked = sorted(members, key=lambda s: (-size(s), s))[:TOP_N]
    rows = []
    for sid in ranked:
        m = members[sid]
        c = chars[sid]
        affected = "; ".join(f"{role}: {', '.join(arts[:6])}{' ...' if len(arts) > 6 else ''}"
                             for role, arts in sorted(m["roles"].items()))
        extra = ", ".join(f"{k}={c[k]}" for k in sorted(c) if k not in ("size", "num_edges", "cycle"))
        rows.append([sid, m["type"], m["level"], c.get("size", ""), c.get("num_edges", ""), extra, affected])
    return _html_table(["id", "type", "level", "size", "edges", "characteristics", "affected artefacts"], rows)


def trend_html(bundle: AnalysisBundle) -> str:
    rows = bundle.table("trend_tallies").rows
    if not rows:
        return _placeholder("No temporal instance lived for 3 or more versions.")
    return _html_table(HEADERS["trend_tallies"], [r[:3] + [_pct(x) for x in r[3:]] for r in rows])


_CSS = """
body{font-family:Helvetica,Arial,sans-serif;margin:0;background:#f8f9fa;color:#212529}
main{max-width:1100px;margin:1.5rem auto;padding:0 1rem}
section{background:#fff;border:1px solid #dee2e6;border-radius:8px;padding:1rem 1.25rem;margin-bottom:1rem}
h1{font-size:1.5rem}h2{font-size:1.15rem;margin-top:0}
table{border-collapse:collapse;font-size:.85rem;width:100%}
th,td{border-bottom:1px solid #e9ecef;padding:.3rem .4rem;text-align:left;vertical-align:top}
.chart{width:100%;height:auto;font-size:11px}
.axis{stroke:#495057;stroke-width:1}.guide{stroke:#868e96;stroke-dasharray:6 4}
.median{stroke-dasharray:3 3;stroke-width:1}.lbl{fill:#495057}.val{fill:#fff;font-weight:bold}
.edge{stroke:#adb5bd;stroke-width:1}.edge.cyc{stroke:#d9480f}
.node{fill:#e7f5ff;stroke:#1c7ed6}.node.cyc{fill:#fff4e6;stroke:#d9480f}
.placeholder{color:#868e96;font-style:italic}
.meta{color:#495057}
"""


def render_html(bundle: AnalysisBundle, out_path: str | os.PathLike) -> Path:
    info = summary(bundle)
    counts = ", ".join(f"{k}: {v}" for k, v in info["instances_per_type"].items()) or "no smells detected"
    sections = [
        ("Component dependency graph (latest version)",
         "Components are layered by their cycle-condensed dependency order; "
         "highlighted nodes take part in a component-level cycle.", svg_component_graph(bundle)),
        ("Smell heatmap (latest version)", "Role-member entries per component and smell type.", svg_heatmap(bundle)),
        ("Smells over time", "Instances per smell kind in each version.", svg_counts_over_time(bundle)),
        ("Incoming and outgoing dependencies", "Fan-in and fan-out per component (latest version, top 30).",
         svg_degree_histogram(bundle)),
        ("Survival", "Kaplan-Meier survival per smell kind and cycle shape; dashed lines mark S = 0.5.",
         svg_survival(bundle)),
        ("Characteristic trends", "Share of temporal instances (age of 3 or more) per trend group.", trend_html(bundle)),
        ("Co-occurrence, component level", "", matrix_html(bundle, "cooc_component")),
        ("Co-occurrence, file level", "", matrix_html(bundle, "cooc_file")),
        (f"Largest smells in the latest version (top {TOP_N})", "", smell_details_html(bundle)),
    ]
    body = "".join(
        f"<section><h2>{_e(title)}</h2>{f'<p class=meta>{_e(note)}</p>' if note else ''}{content}</section>"
        for title, note, content in sections
    )
    doc = (
        "<!DOCTYPE html>\n<html lang=\"en\"><head><meta charset=\"utf-8\">"
        f"<title>Architectural smells: {_e(bundle.project_id)}</title><style>{_CSS}</style></head><body><main>"
        f"<h1>Architectural smells: {_e(bundle.project_id)}</h1>"
        f"<p class=meta>{info['versions']} versions analysed; instances per kind: {_e(counts)}; "
        f"{info['temporal_instances']} temporal instances ({info['censored_temporal_instances']} still alive).</p>"
        f"{body}</main></body></html>\n"
    )
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(doc)
    return out_path


def write_report(bundle: AnalysisBundle, out_dir: str | os.PathLike) -> None:
    out_dir = Path(out_dir)
    emit_csv(bundle, out_dir / "csv")
    write_summary(bundle, out_dir / "summary.json")
    render_html(bundle, out_dir / "report.html")


