import numpy as np
import pytest

from net3.graph import ModeNetwork


def random_adjacency(rng, n, density=0.6):
    a = rng.uniform(0.1, 1.0, size=(n, n)) * (rng.random((n, n)) < density)
    a = np.triu(a, 1)
    return a + a.T


def random_network(rng, n, identity=False):
    return ModeNetwork.identity(n) if identity else ModeNetwork.from_adjacency(random_adjacency(rng, n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def nets_6x4(rng):
    return [random_network(rng, 6), random_network(rng, 4)]


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def report(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
