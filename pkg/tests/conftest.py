from __future__ import annotations

from pathlib import Path

import pytest

from asmell.pipeline import RunConfig, run_pipeline

from corpora import evolution_project


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("ASMELL_CACHE_DIR", str(tmp_path / "cache"))


@pytest.fixture(scope="session")
def evolution_run(tmp_path_factory) -> Path:
    """Output directory of a full pipeline run over the five-snapshot evolution project."""
    root = tmp_path_factory.mktemp("evo")
    snaps = evolution_project(root / "src")
    out = root / "out"
    cfg = RunConfig(project_id="evo", snapshots=snaps, out_dir=out)
    assert run_pipeline(cfg) == 0
    return out


# -- acceptance reporting: one PASS/FAIL line per criterion ------------------------------

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.failed):
        _CRITERIA[n] = (title, "PASS" if report.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, status = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {status}  {title}")
