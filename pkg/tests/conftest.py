from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"
TRACES = FIXTURES / "traces"
ONTOLOGY_DIR = FIXTURES / "ontology"
NEGATIVE = FIXTURES / "negative"
EXPECTED = FIXTURES / "expected"

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def ontology():
    from semflow.annotations import load_ontology

    return load_ontology([ONTOLOGY_DIR])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
