import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def simulate_chain(kernel, start, steps, n_chains, seed):
    """Vectorised Markov-chain simulation; returns final states."""
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(kernel, axis=1)
    states = np.full(n_chains, start)
    for _ in range(steps):
        u = rng.random(n_chains)
        states = np.minimum((u[:, None] >= cdf[states]).sum(axis=1), kernel.shape[0] - 1)
    return states


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    line = f"criterion {number:>2}: {status}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
