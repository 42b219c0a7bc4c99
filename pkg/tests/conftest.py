from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"
PROJECT = FIXTURES / "project"
E2E = FIXTURES / "e2e"
MAIN_PKG = PROJECT / "src" / "main" / "java" / "org" / "demo" / "util"


def focal_source(name: str) -> str:
    return (MAIN_PKG / f"{name}.java").read_text()


@pytest.fixture(scope="session")
def project_root():
    return PROJECT


@pytest.fixture(scope="session")
def pools():
    from cascadetest.corpus import build_demo_pools

    return build_demo_pools(PROJECT)


@pytest.fixture
def counter_query():
    from cascadetest.query import Query

    return Query("Counter", "Counter(int start)", "void reset()", focal_source("Counter"), "demo", "q1")


# one (verdict, name, detail) per acceptance criterion, printed after the run
ACCEPTANCE: list[tuple[str, str, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for verdict, name, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{verdict} {name}: {detail}")
