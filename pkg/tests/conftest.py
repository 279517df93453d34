import pytest

_LINES_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES_KEY] = []


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line per acceptance criterion and assert it."""
    lines = request.config.stash[_LINES_KEY]

    def record(number, title, ok, elapsed, budget, detail=""):
        within = elapsed < budget
        status = "PASS" if ok and within else "FAIL"
        line = f"{status} criterion {number} {title}: {detail} ({elapsed:.1f} s of {budget:g} s)"
        lines.append(line)
        print(line)
        assert ok, line
        assert within, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
