import pytest

from odkanon.hexgrid import SyntheticHierarchy
from odkanon.model import TripDataset, TripRecord


def make_ds(rows, res, h=None):
    """Dataset from ``(person, origin, destination, weight)`` token tuples."""
    h = h or SyntheticHierarchy(res)
    recs = []
    for row in rows:
        pid, o, d, *rest = row
        w = rest[0] if rest else 1.0
        attrs = rest[1] if len(rest) > 1 else {}
        recs.append(TripRecord(pid, h.parse(o), h.parse(d), w, attrs))
    return TripDataset(tuple(recs), h, res)


def od_from(volumes: dict, h, mode="participant"):
    """Sparse matrix from ``{(o_token, d_token): count}``."""
    from odkanon.model import Mode, ODEntry, SparseOD

    return SparseOD(
        {(h.parse(o), h.parse(d)): ODEntry(c, float(c)) for (o, d), c in volumes.items()}, Mode(mode)
    )


@pytest.fixture
def h2():
    return SyntheticHierarchy(2)


# acceptance verdicts, printed together after the run
VERDICTS: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(VERDICTS):
        terminalreporter.write_line(VERDICTS[n])
