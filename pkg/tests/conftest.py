import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fdmcar.partition import GroupLabels
from fdmcar.sample import FunctionalSample, Grid, SubdomainIndex


def make_sample(values, mask=None, points=None):
    values = np.asarray(values, dtype=float)
    if mask is None:
        mask = ~np.isnan(values)
    grid = Grid.equispaced(values.shape[1]) if points is None else Grid.from_points(points)
    return FunctionalSample(grid, np.nan_to_num(values), mask)


@pytest.fixture
def four_curves():
    """Two complete A curves, one partial and one complete B curve on (0.5, 1.0)."""
    nan = np.nan
    sample = make_sample([[1, 2], [3, 4], [5, nan], [7, 8]])
    labels = GroupLabels(np.array([True, True, False, False]))
    return sample, labels, SubdomainIndex.full(2)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import REPORT

    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
