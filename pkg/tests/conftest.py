import numpy as np
import pytest

from engagenet.network import BipartiteGraph
from engagenet.vocab import default_coding_scheme, default_location_taxonomy


@pytest.fixture(scope="session")
def scheme():
    return default_coding_scheme()


@pytest.fixture(scope="session")
def taxonomy():
    return default_location_taxonomy()


@pytest.fixture
def make_triads(scheme, taxonomy):
    """Random triad multisets over the default vocabularies."""

    def _make(rng: np.random.Generator, n_students=10, n_triads=200):
        students = [f"S{i:02d}" for i in range(n_students)]
        triads = []
        for _ in range(n_triads):
            triads.append(
                (
                    students[int(rng.integers(n_students))],
                    taxonomy.areas[int(rng.integers(len(taxonomy.areas)))],
                    scheme.behaviors[int(rng.integers(len(scheme.behaviors)))],
                )
            )
        return triads

    return _make


@pytest.fixture
def make_bipartite():
    """Random small bipartite multigraphs."""

    def _make(rng: np.random.Generator, n_left=6, n_right=4, density=0.5, max_w=5):
        left = tuple(f"u{i}" for i in range(n_left))
        right = tuple(f"v{j}" for j in range(n_right))
        weights = {}
        for u in left:
            for v in right:
                if rng.random() < density:
                    weights[(u, v)] = int(rng.integers(1, max_w + 1))
        if not weights:
            weights[(left[0], right[0])] = 1
        return BipartiteGraph(left, right, weights)

    return _make
