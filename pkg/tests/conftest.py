import numpy as np
import pytest

from harpia.chunking import MemoryBudget


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_volume(rng):
    return rng.integers(0, 256, size=(32, 24, 24), dtype=np.uint8)


def tight_budget(shape, dtype, scratch, halo, chunks_wanted):
    """Budget sized so a volume of ``shape`` splits into about
    ``chunks_wanted`` chunks for the given profile."""
    z, y, x = shape
    slice_bytes = y * x * np.dtype(dtype).itemsize
    interior = max(1, z // chunks_wanted)
    t = interior + 2 * halo
    return MemoryBudget(int(t * scratch * slice_bytes) + 1, 1.0)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion at the end of the run."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance" not in nodeid:
                continue
            name = nodeid.split("::")[-1]
            status = "PASS" if outcome == "passed" else "FAIL"
            lines.append((name, f"[ACCEPTANCE] {name}: {status}"))
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
