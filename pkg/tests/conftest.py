import numpy as np
import pytest

from szpred.signal_io import ChannelInfo, EegRecord, SeizureEvent

# Pass/fail lines from tests/test_acceptance.py, echoed in the terminal summary.
ACCEPTANCE_LINES = []


def record_criterion(number: int, name: str, passed: bool, detail: str = "") -> None:
    line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {name}" + \
        (f": {detail}" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_record(duration=60.0, fs=64, n_channels=2, seizures=(), start_time=0.0, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n_channels, int(duration * fs))).astype(np.float32)
    chans = tuple(ChannelInfo(f"ch{i}") for i in range(n_channels))
    events = tuple(SeizureEvent(a, b) for a, b in seizures)
    return EegRecord(chans, fs, x, start_time, events)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
