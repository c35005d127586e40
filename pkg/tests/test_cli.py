from __future__ import annotations

import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from asmell.cli import main

from corpora import evolution_project, write_tree

OUTPUTS = ["report.html", "summary.json", "diagnostics.log", "csv/smells.csv", "csv/temporal.csv",
           "csv/survival.csv", "csv/precedence_k.csv", "graphs/evo/0.fgraph", "graphs/evo/0.cgraph"]


@pytest.fixture
def snaps(tmp_path) -> list[Path]:
    return evolution_project(tmp_path / "src")


def run(*argv) -> int:
    return main([str(a) for a in argv])


def csv_bytes(out: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted((out / "csv").glob("*.csv"))}


def test_run_two_snapshots(tmp_path, snaps):
    out = tmp_path / "out"
    assert run("run", "--project", "evo", "--out", out, "--snapshots", *snaps[:2]) == 0
    for name in OUTPUTS:
        assert (out / name).exists(), name


def test_unreadable_snapshot_is_partial(tmp_path, snaps, capsys):
    out = tmp_path / "out"
    missing = tmp_path / "gone"
    assert run("run", "--project", "evo", "--out", out, "--snapshots", snaps[0], missing, snaps[1]) == 2
    assert "some snapshots failed" in capsys.readouterr().err
    log = (out / "diagnostics.log").read_text()
    assert str(missing) in log
    versions = (out / "csv" / "versions.csv").read_text().split()
    assert versions[1:] == ["0,v0", "1,v1"]


def test_all_snapshots_failing_is_fatal(tmp_path):
    assert run("extract", "--out", tmp_path / "out", "--snapshots", tmp_path / "nope") == 1


def test_empty_snapshot_list(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        run("run", "--out", tmp_path / "out", "--snapshots")
    assert exc.value.code == 1
    listing = tmp_path / "list.txt"
    listing.write_text("# nothing here\n\n")
    with pytest.raises(SystemExit) as exc:
        run("run", "--out", tmp_path / "out", "--snapshots", listing)
    assert exc.value.code == 1
    assert "empty" in capsys.readouterr().err


def test_usage_error_exits_one(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("detect", "--ud-threshold", "1.5", "--out", tmp_path)
    assert exc.value.code == 1


def test_snapshot_list_file(tmp_path, snaps):
    listing = tmp_path / "src" / "list.txt"
    listing.write_text("v0\nv1\n# old\nv2\n")
    out = tmp_path / "out"
    assert run("run", "--project", "evo", "--out", out, "--snapshots", listing) == 0
    assert (out / "csv" / "versions.csv").read_text().split()[1:] == ["0,v0", "1,v1", "2,v2"]


def test_stages_chain_through_files(tmp_path, snaps):
    out = tmp_path / "out"
    assert run("extract", "--project", "evo", "--out", out, "--snapshots", *snaps) == 0
    for stage in ("detect", "track", "evolve", "render"):
        assert run(stage, "--out", out) == 0, stage
    whole = tmp_path / "whole"
    assert run("run", "--project", "evo", "--out", whole, "--snapshots", *snaps) == 0
    assert csv_bytes(out) == csv_bytes(whole)
    assert (out / "report.html").read_bytes() == (whole / "report.html").read_bytes()


def test_detect_on_saved_graphs(tmp_path, snaps):
    out = tmp_path / "out"
    assert run("extract", "--project", "evo", "--out", out, "--snapshots", *snaps) == 0
    assert run("detect", "--out", out) == 0
    saved = tmp_path / "saved"
    shutil.copytree(out / "graphs" / "evo", saved)
    other = tmp_path / "other"
    assert run("detect", "--out", other, "--graphs", saved) == 0
    assert (other / "csv" / "smells.csv").read_bytes() == (out / "csv" / "smells.csv").read_bytes()


def test_evolve_without_temporal(tmp_path, snaps, capsys):
    out = tmp_path / "out"
    assert run("extract", "--project", "evo", "--out", out, "--snapshots", *snaps) == 0
    assert run("detect", "--out", out) == 0
    assert run("evolve", "--out", out) == 1
    assert "missing stage input" in capsys.readouterr().err


def test_second_extract_hits_cache(tmp_path, snaps):
    out = tmp_path / "out"
    assert run("extract", "--project", "evo", "--out", out, "--snapshots", *snaps) == 0
    first = {p.name: p.read_bytes() for p in (out / "graphs" / "evo").iterdir()}
    assert "[cache hit]" not in (out / "diagnostics.log").read_text()
    assert run("extract", "--project", "evo", "--out", out, "--snapshots", *snaps) == 0
    assert (out / "diagnostics.log").read_text().count("[cache hit]") == len(snaps)
    assert {p.name: p.read_bytes() for p in (out / "graphs" / "evo").iterdir()} == first


def test_cache_invalidated_by_content_change(tmp_path, snaps):
    out = tmp_path / "out"
    assert run("extract", "--project", "evo", "--out", out, "--snapshots", snaps[0]) == 0
    write_tree(snaps[0], {"lib/d.c": '#include "a.h"\nint d(void) { return a(); }\n'})
    assert run("extract", "--project", "evo", "--out", out, "--snapshots", snaps[0]) == 0
    assert "[cache hit]" not in (out / "diagnostics.log").read_text()


def test_jobs_do_not_change_output(tmp_path, snaps, monkeypatch):
    one, two = tmp_path / "one", tmp_path / "two"
    assert run("run", "--project", "evo", "--out", one, "--jobs", "1", "--snapshots", *snaps) == 0
    monkeypatch.setenv("ASMELL_CACHE_DIR", str(tmp_path / "cache2"))
    assert run("run", "--project", "evo", "--out", two, "--jobs", "2", "--snapshots", *snaps) == 0
    assert csv_bytes(one) == csv_bytes(two)
    assert (one / "report.html").read_bytes() == (two / "report.html").read_bytes()
    assert (one / "diagnostics.log").read_bytes() == (two / "diagnostics.log").read_bytes()


def test_console_script(tmp_path, snaps):
    out = tmp_path / "out"
    proc = subprocess.run([sys.executable, "-m", "asmell.cli", "run", "--project", "evo", "--out", str(out),
                           "--snapshots", *map(str, snaps)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (out / "report.html").exists()
