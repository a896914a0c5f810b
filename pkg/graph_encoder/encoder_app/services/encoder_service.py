import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from ...errors import GraphDomainError
from ...utils import atomic_write
from .graph_service import chunked_bincount, laplacian_reweight, validate_labels

logger = logging.getLogger(__name__)

VARIANTS = ('adjacency', 'laplacian')
# command-line spellings
VARIANT_ALIASES = {'aee': 'adjacency', 'lee': 'laplacian', 'adjacency': 'adjacency', 'laplacian': 'laplacian'}


@dataclass(frozen=True, eq=False)
class EncoderWeights:
    """
    Column-normalized one-hot matrix W, stored per vertex as (class, 1/n_k).

    Attributes:
        classes (np.ndarray): Class of each vertex, 0 for unknown.
        values (np.ndarray): 1/n_k for known vertices, 0 otherwise.
        K (int): Number of classes.
    """
    classes: np.ndarray
    values: np.ndarray
    K: int

    @property
    def n(self):
        return int(self.classes.size)

    def dense(self):
        W = np.zeros((self.n, self.K))
        known = np.flatnonzero(self.classes > 0)
        W[known, self.classes[known] - 1] = self.values[known]
        return W

    def column_sums(self):
        return np.bincount(self.classes, weights=self.values, minlength=self.K + 1)[1:]


@dataclass(frozen=True, eq=False)
class Embedding:
    """
    n x K vertex embedding; Z[i, k-1] estimates the chance that vertex i
    is adjacent to a random class-k vertex.
    """
    Z: np.ndarray
    variant: str = 'adjacency'

    @property
    def n(self):
        return int(self.Z.shape[0])

    @property
    def K(self):
        return int(self.Z.shape[1])


def resolve_variant(variant):
    try:
        return VARIANT_ALIASES[variant]
    except KeyError:
        raise GraphDomainError(f"unknown embedding variant {variant!r}; use one of {sorted(VARIANT_ALIASES)}") from None


def build_weights(Y):
    """
    Build the encoder weight matrix W(i, Y_i) = 1/n_{Y_i}.

    Parameters:
        Y (LabelVector): Labels, 0 for unknown.

    Returns:
        EncoderWeights: Rows of unknown vertices are zero.
    """
    counts = validate_labels(Y)
    inverse = np.concatenate([[0.0], 1.0 / counts])
    classes = np.asarray(Y.labels, dtype=np.int64)
    return EncoderWeights(classes=classes, values=inverse[classes], K=Y.K)


def encode(E, Y, variant='adjacency', threads=1):
    """
    One-hot graph encoder embedding in a single pass over the edges.

    For each edge (u, v, w) row u gains w * W(v, .) and, for an undirected
    non-loop edge, row v gains w * W(u, .). This is Z = A W, or
    Z = D^-1/2 A D^-1/2 W for the laplacian variant.

    Parameters:
        E (EdgeList): The graph.
        Y (LabelVector): Labels on the same n vertices.
        variant (str): 'adjacency' / 'aee' or 'laplacian' / 'lee'.
        threads (int): Worker cap; chunk results are summed.

    Returns:
        tuple[Embedding, EncoderWeights]: The embedding and the weights used.
    """
    variant = resolve_variant(variant)
    if E.n != Y.n:
        raise GraphDomainError(f"edgelist has {E.n} vertices but {Y.n} labels were given")
    weights = build_weights(Y)
    if variant == 'laplacian':
        E = laplacian_reweight(E, threads)

    K = weights.K
    classes, values = weights.classes, weights.values

    # row u accumulates the class weight of its neighbour v
    index = E.src * K + np.maximum(classes[E.dst] - 1, 0)
    contrib = E.weight * values[E.dst]
    if not E.directed:
        off = E.src != E.dst
        index = np.concatenate([index, E.dst[off] * K + np.maximum(classes[E.src[off]] - 1, 0)])
        contrib = np.concatenate([contrib, E.weight[off] * values[E.src[off]]])

    Z = chunked_bincount(index, contrib, E.n * K, threads).reshape(E.n, K)
    logger.debug("encoded n=%d s=%d K=%d variant=%s threads=%d", E.n, E.s, K, variant, threads)
    return Embedding(Z, variant), weights


def conditional_edge_estimate(embedding, i, k):
    """
    Estimated probability that vertex i is adjacent to a random class-k vertex.

    Parameters:
        embedding (Embedding): The embedding.
        i (int): Vertex id, 0-based.
        k (int): Class, 1..K.

    Returns:
        float: Z(i, k).
    """
    if not 0 <= i < embedding.n:
        raise GraphDomainError(f"vertex {i} outside [0, {embedding.n})")
    if not 1 <= k <= embedding.K:
        raise GraphDomainError(f"class {k} outside 1..{embedding.K}")
    return float(embedding.Z[i, k - 1])


def write_embedding(embedding, path, float_format='%.17g'):
    """
    Write the embedding as CSV with header vertex,z1,...,zK.
    """
    frame = pd.DataFrame(embedding.Z, columns=[f"z{k}" for k in range(1, embedding.K + 1)])
    frame.insert(0, 'vertex', np.arange(embedding.n))
    return atomic_write(
        path, lambda handle: frame.to_csv(handle, index=False, float_format=float_format)
    )
