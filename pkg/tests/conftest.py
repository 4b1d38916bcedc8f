import numpy as np
import pytest

from pdsi_extremes import _kernels
from pdsi_extremes.grid import DEFAULT_PERIOD, GridCoordinate, GridDataset, Period, MonthStamp

ACCEPTANCE_LINES = []


@pytest.fixture(params=sorted(_kernels.available_backends()))
def backend(request):
    """Every importable kernel backend (cython and/or python)."""
    return _kernels.available_backends()[request.param]


def make_dataset(rows, period=None):
    """Dataset from ``{(lon_index, lat_index): values}`` with NaN for gaps."""
    cells = tuple(GridCoordinate(i, j) for i, j in rows)
    values = np.array([np.asarray(v, dtype=float) for v in rows.values()])
    if period is None:
        n = values.shape[1]
        period = Period(MonthStamp(1900, 1), MonthStamp.from_serial(n - 1))
    return GridDataset(period, cells, values)


@pytest.fixture
def tiny_dataset():
    rng = np.random.default_rng(3)
    return make_dataset({(0, 0): rng.normal(size=24), (5, 7): rng.normal(size=24), (143, 54): rng.normal(size=24)})


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


__all__ = ["make_dataset", "DEFAULT_PERIOD"]
