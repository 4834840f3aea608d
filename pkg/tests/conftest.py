import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from citerel import synthetic  # noqa: E402

_acceptance = {}


@pytest.fixture(scope="session")
def small_corpus():
    return synthetic.make_corpus(200, seed=3)


@pytest.fixture(scope="session")
def bundled_corpus_file():
    return Path(str(synthetic.bundled_corpus_path()))


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and report.when == "call":
        _acceptance[report.nodeid.split("::")[-1]] = report.outcome
    elif "test_acceptance.py" in report.nodeid and report.failed:
        _acceptance[report.nodeid.split("::")[-1]] = "failed"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance, key=lambda n: int(n.split("_")[1])):
        mark = "PASS" if _acceptance[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"{mark}  {name}")
