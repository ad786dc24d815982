import pytest

from hollowopt.corpus import even_admissible_corpus, mixed_corpus

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def even_corpus():
    return even_admissible_corpus(1000, seed=2)


@pytest.fixture(scope="session")
def mixed():
    return mixed_corpus(1000, seed=1)


@pytest.fixture
def report():
    """Record one acceptance line; printed in the terminal summary."""

    def _record(number: int, ok: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
