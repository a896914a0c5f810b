import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd

from ...errors import GraphDomainError, GraphParseError, LabelConfigError
from ...utils import atomic_write, check_readable

logger = logging.getLogger(__name__)

# below this many entries per worker a single bincount beats the thread pool
_MIN_CHUNK = 1 << 16


def _readonly(values, dtype):
    array = np.asarray(values, dtype=dtype).reshape(-1).view()
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class EdgeList:
    """
    An s x 3 edge table (u, v, w) over vertices 0..n-1.

    Undirected graphs list every edge once; duplicates are kept and their
    weights add up downstream. The arrays are read-only views.
    """
    n: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    directed: bool = False

    def __post_init__(self):
        src = _readonly(self.src, np.int64)
        dst = _readonly(self.dst, np.int64)
        weight = _readonly(self.weight, np.float64)
        if self.n < 0:
            raise GraphDomainError(f"vertex count must be non-negative, got {self.n}")
        if not (src.size == dst.size == weight.size):
            raise GraphDomainError(
                f"edge columns differ in length: {src.size}, {dst.size}, {weight.size}"
            )
        if src.size:
            low = min(src.min(), dst.min())
            high = max(src.max(), dst.max())
            if low < 0 or high >= self.n:
                raise GraphDomainError(f"vertex ids must lie in [0, {self.n}), found [{low}, {high}]")
            if not np.all(np.isfinite(weight)):
                raise GraphDomainError("edge weights must be finite")
        object.__setattr__(self, 'n', int(self.n))
        object.__setattr__(self, 'src', src)
        object.__setattr__(self, 'dst', dst)
        object.__setattr__(self, 'weight', weight)
        object.__setattr__(self, 'directed', bool(self.directed))

    @classmethod
    def from_edges(cls, n, edges, directed=False):
        """
        Build an edgelist from (u, v) or (u, v, w) tuples.

        Parameters:
            n (int): Number of vertices.
            edges (iterable): Edge tuples; a missing weight defaults to 1.0.
            directed (bool): Whether each row is a directed edge.

        Returns:
            EdgeList: The edge table.
        """
        rows = [(e[0], e[1], e[2] if len(e) > 2 else 1.0) for e in edges]
        if not rows:
            return cls.empty(n, directed)
        u, v, w = zip(*rows)
        return cls(n, np.array(u), np.array(v), np.array(w, dtype=np.float64), directed)

    @classmethod
    def empty(cls, n, directed=False):
        return cls(n, np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0), directed)

    @property
    def s(self):
        return int(self.src.size)

    def edges(self):
        return list(zip(self.src.tolist(), self.dst.tolist(), self.weight.tolist()))

    def with_weights(self, weight):
        return EdgeList(self.n, self.src, self.dst, weight, self.directed)

    def with_vertex_count(self, n):
        """Same edges over n >= self.n vertices; the new trailing vertices are isolated."""
        if n < self.n:
            raise GraphDomainError(f"cannot shrink an edgelist from {self.n} to {n} vertices")
        return EdgeList(n, self.src, self.dst, self.weight, self.directed)

    def mean_degree(self):
        if self.n == 0:
            return 0.0
        return (1 if self.directed else 2) * self.s / self.n


@dataclass(frozen=True, eq=False)
class LabelVector:
    """
    Per-vertex class labels: 0 marks an unknown label, 1..K a class.
    """
    labels: np.ndarray
    K: int

    def __post_init__(self):
        if int(self.K) < 1:
            raise LabelConfigError(f"class count K must be at least 1, got {self.K}")
        object.__setattr__(self, 'labels', _readonly(self.labels, np.int64))
        object.__setattr__(self, 'K', int(self.K))

    @classmethod
    def from_labels(cls, labels, K=None):
        """
        Build a label vector, normalizing negative entries to 0 (unknown).

        Parameters:
            labels (sequence): Integer labels.
            K (int): Class count; defaults to the largest label.

        Returns:
            LabelVector: The label vector.
        """
        values = np.asarray(labels, dtype=np.int64).copy()
        values[values < 0] = 0
        if K is None:
            K = int(values.max()) if values.size else 0
            if K < 1:
                raise LabelConfigError("label vector has no known labels")
        return cls(values, K)

    @property
    def n(self):
        return int(self.labels.size)

    def known(self):
        return self.labels > 0

    def masked(self, indices):
        """Return a copy with the labels at the given indices set to unknown."""
        values = self.labels.copy()
        values[np.asarray(indices, dtype=np.int64)] = 0
        return LabelVector(values, self.K)


def chunked_bincount(index, weights, minlength, threads=1):
    """
    Weighted bincount, optionally split into edge chunks summed at the end.

    Parameters:
        index (np.ndarray): Non-negative bin index per item.
        weights (np.ndarray): Weight per item.
        minlength (int): Number of bins.
        threads (int): Worker cap; 1 is the sequential reference.

    Returns:
        np.ndarray: Float array of length minlength.
    """
    if threads <= 1 or index.size < threads * _MIN_CHUNK:
        return np.bincount(index, weights=weights, minlength=minlength).astype(np.float64, copy=False)

    bounds = np.linspace(0, index.size, threads + 1).astype(np.int64)

    def partial(span):
        lo, hi = span
        return np.bincount(index[lo:hi], weights=weights[lo:hi], minlength=minlength)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(partial, zip(bounds[:-1], bounds[1:])))
    total = parts[0].astype(np.float64, copy=True)
    for part in parts[1:]:
        total += part
    return total


def compute_degrees(E, threads=1):
    """
    Weighted degree of every vertex in one pass over the edges.

    Each edge adds its weight to both endpoints; a self-loop adds it once.

    Parameters:
        E (EdgeList): The graph.
        threads (int): Worker cap for the chunked accumulation.

    Returns:
        np.ndarray: Degree vector of length n.
    """
    not_loop = np.where(E.src != E.dst, E.weight, 0.0)
    return (
        chunked_bincount(E.src, E.weight, E.n, threads)
        + chunked_bincount(E.dst, not_loop, E.n, threads)
    )


def laplacian_reweight(E, threads=1):
    """
    Replace each weight w(u,v) by w(u,v) / sqrt(d_u * d_v).

    Two passes: a degree pass, then the rewrite pass.

    Parameters:
        E (EdgeList): The graph.
        threads (int): Worker cap for the degree pass.

    Returns:
        EdgeList: Same edges with degree-normalized weights.
    """
    degrees = compute_degrees(E, threads)
    product = degrees[E.src] * degrees[E.dst]
    if np.any(product < 0):
        raise GraphDomainError("laplacian reweighting needs non-negative degrees")
    scale = np.zeros_like(product)
    np.divide(1.0, np.sqrt(product), out=scale, where=product > 0)
    return E.with_weights(E.weight * scale)


def validate_labels(Y):
    """
    Count the known members of every class.

    Parameters:
        Y (LabelVector): The labels.

    Returns:
        np.ndarray: Class counts [n_1, ..., n_K].

    Raises:
        GraphDomainError: If a label lies outside 0..K.
        LabelConfigError: If a class has no known member.
    """
    labels = Y.labels
    if labels.size and (labels.min() < 0 or labels.max() > Y.K):
        bad = int(np.flatnonzero((labels < 0) | (labels > Y.K))[0])
        raise GraphDomainError(f"label {labels[bad]} of vertex {bad} outside 0..{Y.K}")
    counts = np.bincount(labels, minlength=Y.K + 1)[1:]
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise LabelConfigError(f"classes without known members: {(empty + 1).tolist()}")
    return counts


def _scan_fields(path, min_fields, max_fields):
    """Line-by-line parse; reports the first bad line with its number."""
    rows = []
    with open(path, encoding='utf-8') as handle:
        for line_number, line in enumerate(handle, start=1):
            text = line.strip()
            if not text or text.startswith('#'):
                continue
            fields = text.split()
            if not min_fields <= len(fields) <= max_fields:
                raise GraphParseError(path, line_number, text, f"expected {min_fields}-{max_fields} fields")
            try:
                values = [int(f) for f in fields[:2]] if max_fields > 1 else [int(fields[0])]
                if max_fields > 1:
                    values.append(float(fields[2]) if len(fields) > 2 else 1.0)
            except ValueError:
                raise GraphParseError(path, line_number, text) from None
            rows.append(values)
    return rows


def _read_columns(path, names):
    frame = pd.read_csv(
        path, sep=r'\s+', comment='#', header=None, names=names,
        dtype=np.float64, skip_blank_lines=True, engine='c', float_precision='round_trip',
    )
    if not isinstance(frame.index, pd.RangeIndex):
        raise ValueError('extra fields')
    return frame


def load_edgelist(path, one_based=False, directed=False):
    """
    Read a whitespace-separated edgelist file.

    Each non-comment line is "u v" or "u v w"; a missing weight is 1.0 and
    lines starting with '#' are skipped.

    Parameters:
        path (str): The edgelist file.
        one_based (bool): Shift ids from 1-based to 0-based.
        directed (bool): Treat rows as directed edges.

    Returns:
        EdgeList: The parsed graph with n = 1 + largest vertex id.
    """
    check_readable(path)
    try:
        frame = _read_columns(path, ['u', 'v', 'w'])
        u = frame['u'].to_numpy()
        v = frame['v'].to_numpy()
        if np.isnan(u).any() or np.isnan(v).any() or np.any(u != np.floor(u)) or np.any(v != np.floor(v)):
            raise ValueError('bad vertex id')
        w = frame['w'].fillna(1.0).to_numpy()
        u = u.astype(np.int64)
        v = v.astype(np.int64)
    except pd.errors.EmptyDataError:
        u = v = np.empty(0, np.int64)
        w = np.empty(0)
    except (ValueError, pd.errors.ParserError):
        rows = _scan_fields(path, 2, 3)
        table = np.array(rows, dtype=np.float64).reshape(-1, 3)
        u = table[:, 0].astype(np.int64)
        v = table[:, 1].astype(np.int64)
        w = table[:, 2]

    if one_based:
        u = u - 1
        v = v - 1
    if u.size and min(u.min(), v.min()) < 0:
        first = int(np.flatnonzero((u < 0) | (v < 0))[0])
        raise GraphDomainError(f"{path}: negative vertex id in edge {first} (one_based={one_based})")

    n = int(max(u.max(), v.max())) + 1 if u.size else 0
    logger.info("loaded edgelist path=%s n=%d s=%d directed=%s", path, n, u.size, directed)
    return EdgeList(n, u, v, w, directed)


def write_edgelist(E, path, float_format='%.17g'):
    """
    Write an edgelist as "u v w" lines, weights with 17 significant digits.

    Parameters:
        E (EdgeList): The graph.
        path (str): Destination file.
        float_format (str): Weight format.

    Returns:
        str: The destination path.
    """
    frame = pd.DataFrame({'u': E.src, 'v': E.dst, 'w': E.weight})
    return atomic_write(
        path,
        lambda handle: frame.to_csv(handle, sep=' ', header=False, index=False, float_format=float_format),
    )


def load_labels(path, n=None):
    """
    Read a label file, one integer per line; 0 or negative means unknown.

    Parameters:
        path (str): The label file.
        n (int): Expected vertex count; shorter files are padded with unknown labels.

    Returns:
        LabelVector: Labels with K = largest label.
    """
    check_readable(path)
    try:
        frame = _read_columns(path, ['label'])
        values = frame['label'].to_numpy()
        if np.isnan(values).any() or np.any(values != np.floor(values)):
            raise ValueError('bad label')
        labels = values.astype(np.int64)
    except pd.errors.EmptyDataError:
        labels = np.empty(0, np.int64)
    except (ValueError, pd.errors.ParserError):
        labels = np.array([row[0] for row in _scan_fields(path, 1, 1)], dtype=np.int64)

    if n is not None:
        if labels.size > n:
            raise GraphDomainError(f"{path}: {labels.size} labels for a graph of {n} vertices")
        labels = np.concatenate([labels, np.zeros(n - labels.size, np.int64)])
    return LabelVector.from_labels(labels)


def align_labels(E, Y):
    """
    Bring an edgelist and its labels to one vertex count, n = max(E.n, Y.n).

    An edgelist only knows vertices up to its largest id, so isolated
    trailing vertices show up in the label file alone; they are added to
    the graph. Vertices past the end of the label file are unknown.

    Returns:
        tuple[EdgeList, LabelVector]: Both over the same n vertices.
    """
    n = max(E.n, Y.n)
    if Y.n < n:
        Y = LabelVector(np.concatenate([Y.labels, np.zeros(n - Y.n, np.int64)]), Y.K)
    if E.n < n:
        logger.info("added isolated vertices n=%d -> %d from the label file", E.n, n)
        E = E.with_vertex_count(n)
    return E, Y


def write_labels(labels, path):
    """Write one integer label per line."""
    values = labels.labels if isinstance(labels, LabelVector) else np.asarray(labels)
    frame = pd.DataFrame({'label': values.astype(np.int64)})
    return atomic_write(path, lambda handle: frame.to_csv(handle, header=False, index=False))


def to_dense(E):
    """
    Dense adjacency matrix, symmetrized for undirected graphs (self-loops once).

    Only meant for small oracle checks.
    """
    A = np.zeros((E.n, E.n))
    np.add.at(A, (E.src, E.dst), E.weight)
    if not E.directed:
        off = E.src != E.dst
        np.add.at(A, (E.dst[off], E.src[off]), E.weight[off])
    return A
