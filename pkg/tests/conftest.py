import numpy as np
import pytest

from avem.mesh import build_initial_mesh
from avem.refine import refine


def unit_square(data=None):
    return build_initial_mesh([(0, 0), (1, 0), (1, 1), (0, 1)], [(0, 1, 2), (0, 2, 3)],
                              "longest_edge", data)


def random_refinement(mesh, Lambda, steps, rng, frac=0.3):
    """Refine ``steps`` times, each time marking a random fraction of the active elements."""
    snaps = []
    for _ in range(steps):
        act = mesh.active_elements()
        k = max(1, int(frac * len(act)))
        marks = set(int(e) for e in rng.choice(act, size=k, replace=False))
        refine(mesh, marks, Lambda)
        snaps.append(mesh.max_index())
    return mesh


def corner_refinement(mesh, Lambda, steps, point=(0.0, 0.0)):
    """Repeatedly refine the elements touching ``point``: deep local grading."""
    p = np.asarray(point, dtype=float)
    for _ in range(steps):
        marks = {e for e in mesh.active_elements()
                 if np.any(np.all(mesh.element_coords(e) == p, axis=1))}
        refine(mesh, marks, Lambda)
    return mesh


def deep_chain_mesh(steps=60):
    """Alternately bisect the oldest and the newest element: long hanging-node chains."""
    m = unit_square()
    for s in range(steps):
        act = m.active_elements()
        if s % 2:
            e = max(act, key=lambda e: (m.elements[e].generation, -e))
        else:
            e = min(act, key=lambda e: (m.elements[e].generation, e))
        m.bisect(e)
    return m


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = []


def report(criterion, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
