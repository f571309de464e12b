import pytest

_CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion.

    Lines are printed immediately (visible with ``-s``) and repeated in the
    terminal summary so they appear in every run's log.
    """

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        print(line)
        _CRITERIA.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_CRITERIA, key=lambda s: int(s.split()[2].rstrip(":"))):
        terminalreporter.write_line(line)
