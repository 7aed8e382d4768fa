import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from threatgrid.grid import GridFrame  # noqa: E402

DATA = Path(__file__).parent / "data"


def make_frame(cells: dict, width: int = 10, height: int = 10, origin=(0.0, 0.0), cell_size: float = 0.2,
               timestamp: float = 0.0, sigma: float = 0.1) -> GridFrame:
    """Frame with the given ``{(row, col): (m_occ, m_free, vx, vy)}`` cells; the rest unknown."""
    m_occ = np.zeros((height, width))
    m_free = np.zeros((height, width))
    vel = np.zeros((height, width, 2))
    cov = np.zeros((height, width, 3))
    for (r, c), (mo, mf, vx, vy) in cells.items():
        m_occ[r, c], m_free[r, c] = mo, mf
        vel[r, c] = (vx, vy)
        cov[r, c] = (sigma ** 2, 0.0, sigma ** 2)
    return GridFrame(timestamp, origin, cell_size, m_occ, m_free, vel, cov)


@pytest.fixture
def data_dir() -> Path:
    return DATA


# filled by test_acceptance.py, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
