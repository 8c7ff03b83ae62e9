import pytest

acceptance_lines = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    lines = request.config.stash.setdefault(acceptance_lines, [])
    return lines.append


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(acceptance_lines, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
