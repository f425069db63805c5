import numpy as np
import pytest
from hypothesis import settings

from fiid.tree_window import Tree

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


def path_tree(n: int, boundary=None) -> Tree:
    """Path 0-1-...-(n-1); both ends are boundary unless told otherwise."""
    if boundary is None:
        boundary = [0, n - 1]
    return Tree.from_edges(n, [(i, i + 1) for i in range(n - 1)], boundary)


@pytest.fixture
def path4():
    return path_tree(4)


def random_tree(rng: np.random.Generator, n: int, p_boundary: float = 0.3) -> Tree:
    parent = np.array([-1] + [int(rng.integers(0, v)) for v in range(1, n)])
    return Tree(parent, rng.random(n) < p_boundary)
