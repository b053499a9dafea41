"""Shared fixtures: in-memory synthetic datasets and an on-disk copy."""

import pytest

from cas_toolkit import synthetic


@pytest.fixture(scope="session")
def fixture500():
    """5 classes x 100 images, the resampling-direction dataset."""
    return synthetic.build_fixture(seed=7, classes=5, per_class=100)


@pytest.fixture(scope="session")
def fixture200():
    """5 classes x 40 images, the pipeline dataset."""
    return synthetic.build_fixture(seed=7, classes=5, per_class=40)


@pytest.fixture(scope="session")
def fixture200_dir(fixture200, tmp_path_factory):
    """The 200-image fixture written to disk once per session."""
    out = tmp_path_factory.mktemp("fixture200")
    synthetic.write_fixture(fixture200, out, image_size=16)
    return out


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one PASS/FAIL line per acceptance criterion."""
    lines = []
    for outcome in ("passed", "failed"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance" not in nodeid or report.when != "call":
                continue
            name = nodeid.rsplit("::", 1)[-1]
            lines.append((name, "PASS" if outcome == "passed" else "FAIL"))
    for report in terminalreporter.stats.get("error", []):
        nodeid = getattr(report, "nodeid", "")
        if "test_acceptance" in nodeid:
            lines.append((nodeid.rsplit("::", 1)[-1], "FAIL"))
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name, verdict in sorted(set(lines)):
            terminalreporter.write_line(f"{verdict}  {name}")
