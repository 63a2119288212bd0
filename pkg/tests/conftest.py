import numpy as np
import pytest

from tcaug.flowdata import T, compute_class_stats, flow_from_arrays, synth_generate


@pytest.fixture(scope="session")
def synth_small():
    return synth_generate(3, [30, 30, 30], seed=3)


@pytest.fixture(scope="session")
def stats_small(synth_small):
    return compute_class_stats(synth_small)


@pytest.fixture
def ramp_flow():
    """Full-length flow with distinct size and IAT values (IAT[0] is 0)."""
    t = np.arange(T, dtype=float)
    return flow_from_arrays("ramp", "class_0", 100.0 + 10 * t, np.where(t % 3 == 0, -1, 1), 0.001 * (t + 1))


_CRITERIA = {}


@pytest.fixture
def criterion():
    """``criterion(n, ok, detail)`` records one acceptance line and asserts it."""

    def report(n, ok, detail):
        _CRITERIA[n] = (bool(ok), detail)
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
        assert ok, detail

    return report


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
