import logging
import time
import tracemalloc

import numpy as np
import pandas as pd

from ...config import Config
from ...errors import GraphDomainError
from .encoder_service import encode
from .model_service import random_edgelist

logger = logging.getLogger(__name__)


def edge_sizes(edges_from, edges_to):
    """
    Edge counts from edges_from to edges_to in 10x steps (edges_to included).
    """
    if edges_from < 0 or edges_to < edges_from:
        raise GraphDomainError(f"invalid edge range {edges_from}..{edges_to}")
    sizes = []
    size = int(edges_from)
    while size <= edges_to:
        sizes.append(size)
        size = size * 10 if size else 1
    if sizes[-1] != int(edges_to):
        sizes.append(int(edges_to))
    return sizes


def time_encode(E, Y, replicates, threads=1, track_memory=False):
    """
    Wall time of encode over several replicates.

    Returns:
        tuple[np.ndarray, float | None]: Seconds per replicate and, if tracked,
        the peak traced allocation in MB during one extra run.
    """
    seconds = np.empty(replicates)
    for r in range(replicates):
        started = time.perf_counter()
        encode(E, Y, 'adjacency', threads)
        seconds[r] = time.perf_counter() - started
    peak = None
    if track_memory:
        tracemalloc.start()
        try:
            encode(E, Y, 'adjacency', threads)
            peak = tracemalloc.get_traced_memory()[1] / 2**20
        finally:
            tracemalloc.stop()
    return seconds, peak


def run_benchmark(K=Config.BENCH_K, avg_degree=Config.BENCH_AVG_DEGREE, edges_from=Config.BENCH_EDGES_FROM,
                  edges_to=10**7, replicates=Config.BENCH_REPLICATES, seed=0, threads=1,
                  edge_ceiling=Config.BENCH_EDGE_CEILING, track_memory=True):
    """
    Encode-time scaling table on random graphs with K classes and a fixed
    average degree. Graph generation stays outside the timed region.

    Parameters:
        K (int): Number of classes.
        avg_degree (float): Target average degree, sets n = 2 s / avg_degree.
        edges_from (int): Smallest edge count.
        edges_to (int): Largest edge count.
        replicates (int): Timed runs per size.
        seed (int): Seed; size i uses seed + i.
        threads (int): Worker cap passed to encode.
        edge_ceiling (int): Refuse sizes above this.
        track_memory (bool): Record the traced allocation peak per size.

    Returns:
        pandas.DataFrame: edges, vertices, mean_seconds, std_seconds,
        min_seconds, ratio (to the previous size), peak_mb.
    """
    if edges_to > edge_ceiling:
        raise GraphDomainError(f"{edges_to} edges exceeds the desk ceiling of {edge_ceiling}")
    if replicates < 1:
        raise GraphDomainError(f"need at least one replicate, got {replicates}")

    rows = []
    previous = None
    for step, s in enumerate(edge_sizes(edges_from, edges_to)):
        n = max(K, 2, int(round(2 * s / avg_degree)))
        E, Y = random_edgelist(n, s, K, seed + step)
        seconds, peak = time_encode(E, Y, replicates, threads, track_memory)
        mean = float(seconds.mean())
        ratio = mean / previous if previous else float('nan')
        previous = mean
        rows.append({
            'edges': s,
            'vertices': n,
            'mean_seconds': mean,
            'std_seconds': float(seconds.std(ddof=1)) if replicates > 1 else 0.0,
            'min_seconds': float(seconds.min()),
            'ratio': ratio,
            'peak_mb': peak,
        })
        logger.info("bench edges=%d vertices=%d mean=%.4fs ratio=%.2f", s, n, mean, ratio)
    return pd.DataFrame(rows)
