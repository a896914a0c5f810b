import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.spatial.distance import pdist, squareform

from ...config import Config
from ...errors import BootstrapError, GraphDomainError, LabelConfigError
from .encoder_service import encode
from .graph_service import EdgeList, LabelVector

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DcorrTest:
    """
    Two-sample distance-correlation permutation test.

    pvalue = (1 + #{permuted statistic >= observed}) / (1 + permutations)
    """
    statistic: float
    permutations: int
    pvalue: float


@dataclass(frozen=True, eq=False)
class BootstrapResult:
    """
    A resampled graph and its two-sample test against the original.

    Attributes:
        edges (EdgeList): Resampled hollow undirected graph on n2 vertices.
        labels (LabelVector): Labels of the resampled vertices.
        pvalue (float): Two-sample test p-value.
        indices (np.ndarray): Original vertex behind each resampled vertex.
        statistic (float): Observed distance correlation.
        clip_count (int): Edge probabilities clipped into [0, 1].
    """
    edges: EdgeList
    labels: LabelVector
    pvalue: float
    indices: np.ndarray
    statistic: float = 0.0
    clip_count: int = 0


def _streams(seed):
    # index draw, edge draw, two-sample test
    return np.random.SeedSequence(seed).spawn(3)


def draw_indices(n, n2, seed):
    """
    Draw n2 vertex indices with replacement from [0, n).

    Both bootstrap procedures use this stream, so a seed picks the same vertices.
    """
    if n2 < 2:
        raise BootstrapError(f"resample size must be at least 2, got {n2}")
    if n < 1:
        raise BootstrapError("cannot resample an empty graph")
    index_stream, _, _ = _streams(seed)
    return np.random.default_rng(index_stream).integers(0, n, size=n2)


def _u_centered(distances):
    """U-centered distance matrix with a zero diagonal."""
    N = distances.shape[0]
    rows = distances.sum(axis=1)
    total = rows.sum()
    centered = (
        distances
        - rows[:, None] / (N - 2)
        - rows[None, :] / (N - 2)
        + total / ((N - 1) * (N - 2))
    )
    np.fill_diagonal(centered, 0.0)
    return centered


def two_sample_dcorr(Z1, Z2, permutations=Config.PERMUTATIONS, seed=None, threads=1):
    """
    Two-sample test via distance correlation between the stacked rows and the
    group indicator, with a label-permutation null.

    Uses the bias-corrected (U-centered) distance correlation and Euclidean
    distances between rows.

    Parameters:
        Z1 (np.ndarray): First sample, rows are observations.
        Z2 (np.ndarray): Second sample, same number of columns.
        permutations (int): Number of group-label permutations.
        seed (int): Master seed; permutation r uses the r-th spawned stream.
        threads (int): Permutation batches evaluated in parallel.

    Returns:
        DcorrTest: Statistic, permutation count and p-value.
    """
    X1 = np.atleast_2d(np.asarray(Z1, dtype=np.float64))
    X2 = np.atleast_2d(np.asarray(Z2, dtype=np.float64))
    if X1.shape[1] != X2.shape[1]:
        raise GraphDomainError(f"samples differ in dimension: {X1.shape[1]} vs {X2.shape[1]}")
    N = X1.shape[0] + X2.shape[0]
    if N < 4 or X1.shape[0] == 0 or X2.shape[0] == 0:
        raise GraphDomainError(f"two-sample test needs at least 4 rows in total and both samples non-empty, got {X1.shape[0]} + {X2.shape[0]}")

    stacked = np.vstack([X1, X2])
    A = _u_centered(squareform(pdist(stacked, metric='euclidean')))
    group = np.concatenate([np.zeros(X1.shape[0]), np.ones(X2.shape[0])])
    B = _u_centered(np.abs(group[:, None] - group[None, :]))
    scale = np.sqrt(np.sum(A * A) * np.sum(B * B))
    if scale <= 0:
        return DcorrTest(statistic=0.0, permutations=permutations, pvalue=1.0)

    # with U-centered A and a 0/1 indicator g, <A, B_g> = -2 g'Ag
    def statistic(indicators):
        return -2.0 * np.einsum('ij,ij->j', indicators, A @ indicators) / scale

    observed = float(statistic(group[:, None])[0])
    if permutations < 1:
        return DcorrTest(statistic=observed, permutations=0, pvalue=float('nan'))

    streams = np.random.SeedSequence(seed).spawn(permutations)
    shuffled = np.stack([np.random.default_rng(s).permutation(group) for s in streams], axis=1)
    batches = np.array_split(np.arange(permutations), max(1, min(threads, permutations)))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            null = np.concatenate(list(pool.map(lambda b: statistic(shuffled[:, b]), batches)))
    else:
        null = np.concatenate([statistic(shuffled[:, b]) for b in batches])

    exceed = int(np.count_nonzero(null >= observed - 1e-12))
    return DcorrTest(observed, permutations, (1 + exceed) / (1 + permutations))


def _edges_from_upper(adjacency, n):
    upper = sparse.triu(adjacency, k=1).tocoo()
    return EdgeList(n, upper.row, upper.col, upper.data.astype(np.float64))


def _test_against_original(E, Y, E2, Y2, permutations, seed, threads):
    try:
        original, _ = encode(E, Y, threads=threads)
        resampled, _ = encode(E2, Y2, threads=threads)
    except LabelConfigError as exc:
        raise BootstrapError(f"cannot embed resampled graph: {exc}") from exc
    _, _, test_stream = _streams(seed)
    test_seed = int(np.random.default_rng(test_stream).integers(2**63))
    return two_sample_dcorr(original.Z, resampled.Z, permutations, test_seed, threads)


def gee_bootstrap(E, Y, n2, seed=None, permutations=Config.PERMUTATIONS, threads=1):
    """
    Graph bootstrap through the encoder embedding.

    Resample n2 embedding rows with replacement, draw every upper-triangle
    edge as Bernoulli(Z2[i, Y2[j]]), mirror it, then test the resampled graph
    against the original with both graphs embedded afresh.

    Parameters:
        E (EdgeList): The graph.
        Y (LabelVector): Labels; every vertex must be labeled.
        n2 (int): Resample size, at least 2.
        seed (int): Master seed.
        permutations (int): Permutations for the two-sample test.
        threads (int): Worker cap.

    Returns:
        BootstrapResult: The resampled graph, labels, indices and p-value.
    """
    if np.any(Y.labels == 0):
        raise BootstrapError("graph bootstrap needs every vertex labeled")
    embedding, _ = encode(E, Y, threads=threads)
    indices = draw_indices(E.n, n2, seed)
    labels2 = Y.labels[indices]
    Z2 = embedding.Z[indices]

    probability = Z2[:, labels2 - 1]
    upper = np.triu(np.ones((n2, n2), dtype=bool), k=1)
    clip_count = int(np.count_nonzero(upper & ((probability < 0) | (probability > 1))))
    probability = np.clip(probability, 0.0, 1.0)
    if clip_count:
        logger.warning("clipped %d edge probabilities into [0, 1]", clip_count)

    _, edge_stream, _ = _streams(seed)
    draws = np.random.default_rng(edge_stream).random((n2, n2))
    rows, cols = np.nonzero(upper & (draws < probability))
    E2 = EdgeList(n2, rows, cols, np.ones(rows.size))
    Y2 = LabelVector(labels2, Y.K)

    test = _test_against_original(E, Y, E2, Y2, permutations, seed, threads)
    logger.info("gee bootstrap n=%d n2=%d s2=%d pvalue=%.4f", E.n, n2, E2.s, test.pvalue)
    return BootstrapResult(E2, Y2, test.pvalue, indices, test.statistic, clip_count)


def naive_bootstrap(E, n2, seed=None):
    """
    Resample vertex ids with replacement and keep the induced adjacency
    A[ind, ind] with its diagonal zeroed.

    Returns:
        EdgeList: Undirected graph on n2 vertices.
    """
    indices = draw_indices(E.n, n2, seed)
    A = sparse.coo_matrix((E.weight, (E.src, E.dst)), shape=(E.n, E.n)).tocsr()
    if not E.directed:
        loops = sparse.diags(A.diagonal())
        A = A + A.T - loops
    induced = A[indices][:, indices].tolil()
    induced.setdiag(0)
    induced = induced.tocsr()
    induced.eliminate_zeros()
    if E.directed:
        coo = induced.tocoo()
        return EdgeList(n2, coo.row, coo.col, coo.data.astype(np.float64), directed=True)
    return _edges_from_upper(induced, n2)


def naive_bootstrap_test(E, Y, n2, seed=None, permutations=Config.PERMUTATIONS, threads=1):
    """
    Naive bootstrap scored with the same two-sample test as gee_bootstrap.

    Returns:
        BootstrapResult
    """
    E2 = naive_bootstrap(E, n2, seed)
    indices = draw_indices(E.n, n2, seed)
    Y2 = LabelVector(Y.labels[indices], Y.K)
    test = _test_against_original(E, Y, E2, Y2, permutations, seed, threads)
    logger.info("naive bootstrap n=%d n2=%d s2=%d pvalue=%.4f", E.n, n2, E2.s, test.pvalue)
    return BootstrapResult(E2, Y2, test.pvalue, indices, test.statistic, 0)
