import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record():
    def _record(result):
        ACCEPTANCE_LINES.append(result.line())
        print(result.line())
        return result

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(set(ACCEPTANCE_LINES), key=lambda s: (int(s[7:9]), s)):
        terminalreporter.write_line(line)
