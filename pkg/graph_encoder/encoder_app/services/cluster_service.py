import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import comb

from ...config import Config
from ...errors import GraphDomainError
from .encoder_service import encode
from .graph_service import LabelVector

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    """
    Result of k-means.

    Attributes:
        labels (np.ndarray): Cluster of each point, 1..K.
        objective (float): Sum of squared distances to the assigned centroids.
        centroids (np.ndarray): K x d centroid matrix.
        history (list): Objective after each Lloyd update of the chosen restart.
    """
    labels: np.ndarray
    objective: float
    centroids: np.ndarray
    history: list = field(default_factory=list)


def random_labels(n, K, rng):
    """
    Uniform labels in 1..K with every class present.

    Parameters:
        n (int): Number of vertices, at least K.
        K (int): Number of classes.
        rng (np.random.Generator): Random stream.

    Returns:
        np.ndarray: Labels of length n.
    """
    labels = rng.integers(1, K + 1, size=n)
    if np.unique(labels).size < K:
        labels[rng.choice(n, size=K, replace=False)] = np.arange(1, K + 1)
    return labels


def _squared_distances(points, centroids):
    # |x|^2 - 2 x.c + |c|^2, floored at 0 against rounding
    d = (points ** 2).sum(axis=1)[:, None] - 2 * points @ centroids.T + (centroids ** 2).sum(axis=1)[None, :]
    return np.maximum(d, 0.0)


def _kmeans_plus_plus(points, K, rng):
    n = points.shape[0]
    centroids = np.empty((K, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    closest = ((points - centroids[0]) ** 2).sum(axis=1)
    for c in range(1, K):
        total = closest.sum()
        if total > 0:
            pick = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side='right'))
            pick = min(pick, n - 1)
        else:
            pick = int(rng.integers(n))
        centroids[c] = points[pick]
        closest = np.minimum(closest, ((points - centroids[c]) ** 2).sum(axis=1))
    return centroids


def _objective(points, centroids, assignment):
    distances = _squared_distances(points, centroids)
    return float(distances[np.arange(points.shape[0]), assignment].sum())


def _lloyd(points, centroids, max_iter):
    n, K = points.shape[0], centroids.shape[0]
    assignment = None
    history = []
    for _ in range(max_iter):
        distances = _squared_distances(points, centroids)
        new_assignment = np.argmin(distances, axis=1)
        if assignment is not None and np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment

        counts = np.bincount(assignment, minlength=K)
        own = distances[np.arange(n), assignment]
        while np.any(counts == 0):
            # reseed an empty cluster at the point farthest from its centroid,
            # never emptying a singleton in turn
            empty = int(np.flatnonzero(counts == 0)[0])
            candidates = np.where(counts[assignment] > 1, own, -1.0)
            far = int(np.argmax(candidates))
            assignment[far] = empty
            own[far] = 0.0
            counts = np.bincount(assignment, minlength=K)

        sums = np.zeros_like(centroids)
        np.add.at(sums, assignment, points)
        centroids = sums / counts[:, None]
        history.append(_objective(points, centroids, assignment))

    return assignment, centroids, _objective(points, centroids, assignment), history


def kmeans(Z, K, seed=None, restarts=Config.RESTARTS, max_iter=Config.KMEANS_MAX_ITER):
    """
    Lloyd's k-means from k-means++ seeds, best of several restarts.

    Parameters:
        Z (np.ndarray): n x d points (e.g. embedding rows).
        K (int): Number of clusters, 1 <= K <= n.
        seed (int): Master seed; restart r uses the r-th spawned stream.
        restarts (int): Number of independent restarts.
        max_iter (int): Lloyd iteration cap per restart.

    Returns:
        ClusterAssignment: The restart with the smallest objective.
    """
    points = np.asarray(Z, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    n = points.shape[0]
    if K < 1 or n < K:
        raise GraphDomainError(f"k-means needs 1 <= K <= n, got K={K}, n={n}")

    best = None
    for stream in np.random.SeedSequence(seed).spawn(max(1, restarts)):
        rng = np.random.default_rng(stream)
        result = _lloyd(points, _kmeans_plus_plus(points, K, rng), max_iter)
        if best is None or result[2] < best[2]:
            best = result
    assignment, centroids, objective, history = best
    return ClusterAssignment(labels=assignment + 1, objective=objective, centroids=centroids, history=history)


def ari(Y1, Y2):
    """
    Adjusted Rand index between two labelings.

    Parameters:
        Y1 (sequence): First labeling.
        Y2 (sequence): Second labeling, same length.

    Returns:
        float: ARI in (-inf, 1]; when both labelings put everything in a single
        cluster (or each point alone) it is 1 for identical partitions, else 0.
    """
    a = np.asarray(getattr(Y1, 'labels', Y1))
    b = np.asarray(getattr(Y2, 'labels', Y2))
    if a.shape != b.shape:
        raise GraphDomainError(f"label vectors differ in length: {a.size} vs {b.size}")
    if a.size < 2:
        raise GraphDomainError("ARI needs at least 2 points")

    _, a_idx = np.unique(a, return_inverse=True)
    _, b_idx = np.unique(b, return_inverse=True)
    table = np.zeros((a_idx.max() + 1, b_idx.max() + 1))
    np.add.at(table, (a_idx, b_idx), 1)

    index = comb(table, 2).sum()
    rows = comb(table.sum(axis=1), 2).sum()
    cols = comb(table.sum(axis=0), 2).sum()
    expected = rows * cols / comb(a.size, 2)
    maximum = (rows + cols) / 2
    if maximum == expected:
        identical = np.count_nonzero(table) == table.shape[0] == table.shape[1]
        return 1.0 if identical else 0.0
    return float((index - expected) / (maximum - expected))


def gee_unsup(E, K, iteration_limit=Config.MAX_ITER, seed=None, variant='adjacency',
              restarts=Config.RESTARTS, threads=1):
    """
    Encoder embedding without labels: alternate encode and k-means from a
    random labeling until the labels stop changing (ARI == 1) or the limit.

    A start that splits identical components (e.g. two equal cliques) with the
    same class counts gives equal-labeled vertices the same embedding row in
    every component, so the random labels come back after one round. Another
    seed breaks the tie.

    Parameters:
        E (EdgeList): The graph.
        K (int): Number of clusters.
        iteration_limit (int): Maximum rounds, at least 1.
        seed (int): Seed for the initial labels and every k-means call.
        variant (str): Embedding variant.
        restarts (int): k-means restarts per round.
        threads (int): Worker cap for encoding.

    Returns:
        tuple[Embedding, np.ndarray, int]: Last embedding, labels 1..K, rounds used.
    """
    if iteration_limit < 1:
        raise GraphDomainError(f"iteration limit must be at least 1, got {iteration_limit}")
    if K < 1 or E.n < K:
        raise GraphDomainError(f"need 1 <= K <= n, got K={K}, n={E.n}")

    rng = np.random.default_rng(seed)
    current = random_labels(E.n, K, rng)
    embedding = None
    for rounds in range(1, iteration_limit + 1):
        embedding, _ = encode(E, LabelVector(current, K), variant, threads)
        clusters = kmeans(embedding.Z, K, seed=int(rng.integers(2**32)), restarts=restarts).labels
        score = ari(current, clusters)
        logger.debug("gee_unsup round=%d ari=%.6f", rounds, score)
        if score == 1.0:
            current = clusters
            break
        current = clusters
    logger.info("gee_unsup n=%d K=%d rounds=%d seed=%s", E.n, K, rounds, seed)
    return embedding, current, rounds
