from __future__ import annotations

import os
import posixpath

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asmell.errors import FormatError, SourceTreeError
from asmell.extract import (
    ExtractConfig,
    FileKind,
    IncludeForm,
    RawInclude,
    SourceFile,
    SourceInventory,
    assign_component,
    count_loc,
    extract_includes,
    extract_snapshot,
    hoist_header_deps,
    load_config,
    resolve_includes,
    scan_sources,
    snapshot_digest,
    strip_comments,
)
from asmell.graph import Level, Node, build_graph

from corpora import write_tree


# -- scanning -----------------------------------------------------------------------

def test_scan_kinds(tmp_path):
    write_tree(tmp_path, {"src/a.c": "int a;\n", "src/a.h": "int a(void);\n", "README": "x\n"})
    inv = scan_sources(tmp_path)
    assert [(f.path, f.kind) for f in inv.files] == [("src/a.c", FileKind.IMPL), ("src/a.h", FileKind.HEADER)]


def test_scan_excludes_glob(tmp_path):
    write_tree(tmp_path, {"src/a.c": "int a;\n", "build/gen.c": "int g;\n", "src/t/x_test.c": "int t;\n"})
    inv = scan_sources(tmp_path, ExtractConfig(exclude=["build", "*_test.c"]))
    assert [f.path for f in inv.files] == ["src/a.c"]


def test_scan_unreadable_root(tmp_path):
    with pytest.raises(OSError):
        scan_sources(tmp_path / "nope")
    with pytest.raises(SourceTreeError):
        scan_sources(tmp_path / "nope")


def test_scan_empty_tree_warns(tmp_path, caplog):
    caplog.set_level("WARNING", logger="asmell")
    inv = scan_sources(tmp_path)
    assert inv.files == []
    assert "no C/C++ sources" in caplog.text


def test_configurable_extensions(tmp_path):
    write_tree(tmp_path, {"a.ipp": "int a;\n", "a.inl": "int b;\n"})
    inv = scan_sources(tmp_path, ExtractConfig(impl_ext=(".ipp",), header_ext=(".inl",)))
    assert {f.path: f.kind for f in inv.files} == {"a.ipp": FileKind.IMPL, "a.inl": FileKind.HEADER}


# -- LOC and comments ---------------------------------------------------------------

@pytest.mark.parametrize(
    "text,expected",
    [("int x;\n\n// c\n", 1), ("/* a\nb */\n", 0), ("x; // y\n", 1), ("int x;", 1), ("", 0),
     ('char *s = "/* not a comment */";\nint y;\n', 2), ("a; /* x\n y */ b;\n", 2)],
)
def test_count_loc(text, expected):
    assert count_loc(text) == expected


def test_count_loc_trailing_newline_stable():
    assert count_loc("a;\nb;") == count_loc("a;\nb;\n")


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet=st.sampled_from(list('ab/*"\n \\x;')), max_size=80))
def test_strip_comments_idempotent(text):
    once = strip_comments(text)
    assert strip_comments(once) == once
    assert once.count("\n") == text.count("\n")


# -- includes ---------------------------------------------------------------------------

def test_extract_quoted():
    assert extract_includes('#include "a.h"\n', "x.c") == [RawInclude("x.c", "a.h", IncludeForm.QUOTED)]


def test_extract_ignores_comments():
    assert extract_includes('/* #include "a.h" */\n// #include "b.h"\n') == []


def test_extract_keeps_all_branches():
    out = extract_includes("#ifdef X\n#include <b.h>\n#else\n  #  include \"c.h\"\n#endif\n")
    assert [(r.spec, r.form) for r in out] == [("b.h", IncludeForm.ANGLED), ("c.h", IncludeForm.QUOTED)]


def test_extract_skips_malformed():
    assert extract_includes("#include MACRO_NAME\n#include\n") == []


def _inv(paths, roots=()):
    files = [SourceFile(p, FileKind.HEADER if p.endswith(".h") else FileKind.IMPL, 1) for p in sorted(paths)]
    return SourceInventory(files, list(roots))


def test_resolve_same_directory():
    res = resolve_includes(_inv(["d/a.c", "d/a.h"]), [RawInclude("d/a.c", "a.h", IncludeForm.QUOTED)])
    assert res.edges == [("d/a.c", "d/a.h")] and res.unresolved == 0


def test_resolve_system_header_unresolved():
    res = resolve_includes(_inv(["a.c"]), [RawInclude("a.c", "stdio.h", IncludeForm.ANGLED)])
    assert res.edges == [] and res.unresolved == 1


def test_resolve_ambiguous_picks_first():
    inv = _inv(["r1/u.h", "r2/u.h", "src/m.c"], roots=["r2", "r1"])
    res = resolve_includes(inv, [RawInclude("src/m.c", "u.h", IncludeForm.QUOTED)])
    assert res.edges == [("src/m.c", "r1/u.h")]
    assert res.ambiguous == [("src/m.c", "u.h", ("r1/u.h", "r2/u.h"))]


def test_resolve_angled_skips_local_directory():
    inv = _inv(["src/u.h", "inc/u.h", "src/m.c"], roots=["inc"])
    quoted = resolve_includes(inv, [RawInclude("src/m.c", "u.h", IncludeForm.QUOTED)])
    angled = resolve_includes(inv, [RawInclude("src/m.c", "u.h", IncludeForm.ANGLED)])
    assert quoted.edges == [("src/m.c", "src/u.h")]
    assert angled.edges == [("src/m.c", "inc/u.h")]


def test_resolve_suffix_fallback_without_roots():
    res = resolve_includes(_inv(["lib/x/y.h", "app/m.c"]), [RawInclude("app/m.c", "x/y.h", IncludeForm.ANGLED)])
    assert res.edges == [("app/m.c", "lib/x/y.h")]


# -- components --------------------------------------------------------------------------

def test_assign_component_defaults_and_map():
    cfg = ExtractConfig()
    assert assign_component("net/tcp/conn.c", cfg) == "net"
    assert assign_component("main.c", cfg) == "."
    cfg = ExtractConfig(roots=["src"], component_map={"src/net/tcp": "transport"})
    assert assign_component("src/net/tcp/conn.c", cfg) == "transport"
    assert assign_component("src/net/udp.c", cfg) == "src/net"


# -- hoisting -----------------------------------------------------------------------------

def _raw(nodes, edges):
    return build_graph(Level.FILE, [Node(p, Level.FILE, 1, comp) for p, comp in nodes], edges)


def test_hoist_basic():
    g = _raw([("a.c", "C"), ("a.h", "C"), ("b.c", "C")], [("b.c", "a.h")])
    assert hoist_header_deps(g).sorted_edges == (("b.c", "a.c"),)


def test_hoist_transitive_glue():
    g = _raw([("b.c", "C"), ("a.h", "C"), ("c.h", "C"), ("c.c", "C")], [("b.c", "a.h"), ("a.h", "c.h")])
    out = hoist_header_deps(g)
    assert out.sorted_edges == (("b.c", "c.c"),)
    assert all(not p.endswith(".h") for p in out.paths)


def test_hoist_own_header_no_self_edge():
    g = _raw([("a.c", "C"), ("a.h", "C")], [("a.c", "a.h")])
    assert not hoist_header_deps(g).edges


def test_hoist_header_deps_move_to_implementer():
    g = _raw([("a.c", "C"), ("a.h", "C"), ("b.c", "D"), ("b.h", "D")], [("a.h", "b.h")])
    assert hoist_header_deps(g).sorted_edges == (("a.c", "b.c"),)


def test_hoist_header_cycle_collapsed(caplog):
    caplog.set_level("WARNING", logger="asmell")
    g = _raw([("x.h", "C"), ("y.h", "C"), ("y.c", "C"), ("m.c", "C")], [("x.h", "y.h"), ("y.h", "x.h"), ("m.c", "x.h")])
    assert hoist_header_deps(g).sorted_edges == (("m.c", "y.c"),)
    assert "CycleInHeaderChain" in caplog.text


@st.composite
def raw_graphs(draw):
    n = draw(st.integers(2, 12))
    names = []
    for i in range(n):
        d = draw(st.sampled_from(["p", "q"]))
        stem = draw(st.sampled_from(["s0", "s1", "s2", f"u{i}"]))
        ext = draw(st.sampled_from([".c", ".h"]))
        names.append(f"{d}/{stem}{ext}")
    names = sorted(set(names))
    edges = draw(st.lists(st.tuples(st.sampled_from(names), st.sampled_from(names)), max_size=3 * len(names)))
    return _raw([(p, p.split("/")[0]) for p in names], edges)


@settings(max_examples=200, deadline=None)
@given(raw_graphs())
def test_hoisting_is_witnessed(g):
    """Every hoisted edge follows a header-only path from the source (or a header
    it implements) to the target (or a header the target implements)."""
    out = hoist_header_deps(g)
    is_h = lambda p: p.endswith(".h")  # noqa: E731

    def stem(p):
        return posixpath.splitext(posixpath.basename(p))[0]

    def impls(h):
        return {p for p in g.paths if not is_h(p) and g.component_of(p) == g.component_of(h) and stem(p) == stem(h)}

    assert not any(is_h(p) for p in out.paths)
    for s, t in out.edges:
        starts = {s} | {h for h in g.paths if is_h(h) and s in impls(h)}
        seen, stack, ok = set(), list(starts), False
        while stack and not ok:
            u = stack.pop()
            for w in g.successors[u]:
                if w == t or (is_h(w) and t in impls(w)):
                    ok = True
                    break
                if is_h(w) and w not in seen:
                    seen.add(w)
                    stack.append(w)
        assert ok, (s, t)


# -- whole snapshot -----------------------------------------------------------------------

def test_extract_snapshot_end_to_end(tmp_path):
    write_tree(tmp_path, {
        "core/core.h": "int core(void);\n",
        "core/core.c": '#include "core.h"\n#include <stdio.h>\nint core(void) { return 1; }\n',
        "app/main.c": '#include "core/core.h"\nint main(void) { return core(); }\n',
    })
    g, stats = extract_snapshot(tmp_path)
    assert g.sorted_edges == (("app/main.c", "core/core.c"),)
    assert g.component_of("app/main.c") == "app" and g.loc("core/core.c") == 3
    assert stats.files == 3 and stats.headers == 1 and stats.unresolved == 1


def test_config_file_and_extra_edges(tmp_path):
    write_tree(tmp_path, {"src/a/x.c": "int x;\n", "src/b/y.c": "int y;\n", "gen/z.c": "int z;\n"})
    (tmp_path / "map.tsv").write_text("src/a\talpha\n")
    (tmp_path / "extra.edges").write_text("# generated code\nE src/b/y.c src/a/x.c\nE src/b/y.c missing.c\n")
    cfg_path = tmp_path / "asmell.cfg"
    cfg_path.write_text("roots = src\nexclude = gen\ncomponent-map = map.tsv\nextra-edges-file = extra.edges\n")
    cfg = load_config(cfg_path)
    g, stats = extract_snapshot(tmp_path, cfg)
    assert g.paths == ("src/a/x.c", "src/b/y.c")
    assert g.component_of("src/a/x.c") == "alpha" and g.component_of("src/b/y.c") == "src/b"
    assert g.sorted_edges == (("src/b/y.c", "src/a/x.c"),)
    assert stats.extra_edges_skipped == 1


def test_bad_config_entries(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("colour = blue\n")
    with pytest.raises(FormatError):
        load_config(p)
    (tmp_path / "e").write_text("N File a 1 C\n")
    p.write_text("extra-edges-file = e\n")
    with pytest.raises(FormatError):
        load_config(p)


def test_digest_tracks_content_and_config(tmp_path):
    write_tree(tmp_path, {"a/a.c": "int a;\n"})
    d1 = snapshot_digest(tmp_path, ExtractConfig())
    assert d1 == snapshot_digest(tmp_path, ExtractConfig())
    assert d1 != snapshot_digest(tmp_path, ExtractConfig(exclude=["zzz"]))
    (tmp_path / "a/a.c").write_text("int a; int b;\n")
    assert d1 != snapshot_digest(tmp_path, ExtractConfig())


@pytest.mark.skipif(os.geteuid() == 0, reason="root can read anything")
def test_unreadable_directory(tmp_path):
    d = tmp_path / "locked"
    d.mkdir()
    d.chmod(0)
    try:
        with pytest.raises(SourceTreeError):
            scan_sources(d)
    finally:
        d.chmod(0o755)
