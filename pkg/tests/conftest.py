import os

import numpy as np
import pytest

from graph_encoder.encoder_app.services.graph_service import EdgeList, LabelVector


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help='run slow Monte Carlo tests')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


def clique_pair(size=20):
    """Two disjoint cliques of the given size, labeled 1 and 2."""
    edges = []
    for block in range(2):
        base = block * size
        edges += [(base + i, base + j) for i in range(size) for j in range(i + 1, size)]
    labels = np.repeat([1, 2], size)
    return EdgeList.from_edges(2 * size, edges), LabelVector(labels, 2)


@pytest.fixture
def two_cliques():
    return clique_pair(20)


@pytest.fixture
def path_graph():
    # 0 - 1 - 2 - 3, classes 1 1 2 2
    E = EdgeList.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    return E, LabelVector(np.array([1, 1, 2, 2]), 2)


@pytest.fixture
def polblog_paths():
    edges = os.environ.get('GEE_POLBLOG_EDGES')
    labels = os.environ.get('GEE_POLBLOG_LABELS')
    if not edges or not labels:
        pytest.skip('set GEE_POLBLOG_EDGES and GEE_POLBLOG_LABELS to run real-data checks')
    return edges, labels


def write_lines(path, lines):
    path.write_text("".join(f"{line}\n" for line in lines))
    return str(path)


def asymmetric_start_seeds(size, count):
    """
    Seeds whose random starting labels split two cliques of the given size unevenly.

    With an even split the embedding rows of both cliques coincide and the
    random labels are already a fixed point of the cluster loop.
    """
    from graph_encoder.encoder_app.services.cluster_service import random_labels

    seeds = []
    for seed in range(100):
        start = random_labels(2 * size, 2, np.random.default_rng(seed))
        if np.count_nonzero(start[:size] == 1) != np.count_nonzero(start[size:] == 1):
            seeds.append(seed)
        if len(seeds) == count:
            break
    return seeds
