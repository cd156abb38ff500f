import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects one status line per acceptance criterion for the summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_LINES, [])

    def log(number, name, ok, seconds, detail=""):
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}  {name}  ({seconds:.2f} s)  {detail}".rstrip()
        print(line)
        lines.append(line)

    return log


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
