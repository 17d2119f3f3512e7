import numpy as np
import pytest

from gradedproj.mesh import kuhn_initial_mesh


def randomly_refined(dim, rounds, alpha=1, seed=0, fraction=0.3, cells=1):
    """Kuhn mesh after `rounds` of random fractional marking with BiSecLG(alpha)."""
    mesh = kuhn_initial_mesh(dim, cells)
    rng = np.random.default_rng(seed)
    for _ in range(rounds):
        ids = mesh.active_ids()
        marked = [s for s in ids if rng.random() < fraction] or ids[:1]
        mesh.refine_lg(marked, alpha)
    return mesh


@pytest.fixture(scope="session")
def mesh2d():
    return randomly_refined(2, 6, alpha=1, seed=11)


@pytest.fixture(scope="session")
def mesh3d():
    return randomly_refined(3, 3, alpha=2, seed=7, fraction=0.2)
