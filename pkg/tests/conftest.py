import pytest

VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""
    lines = request.config.stash.setdefault(VERDICTS, [])

    def record(number: int, title: str, ok: bool, detail: str) -> None:
        line = f"CRITERION {number} {title}: {'PASS' if ok else 'FAIL'} ({detail})"
        print(line)
        lines.append(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
