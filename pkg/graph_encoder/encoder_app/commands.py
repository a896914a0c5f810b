import json
import logging
import os
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

from ..errors import GraphDomainError
from ..utils import atomic_write, check_readable
from .services.bench_service import run_benchmark
from .services.bootstrap_service import gee_bootstrap, naive_bootstrap_test
from .services.cluster_service import ari, gee_unsup
from .services.encoder_service import Embedding, encode, resolve_variant, write_embedding
from .services.eval_service import chance_error, cross_validate
from .services.graph_service import (
    align_labels, laplacian_reweight, load_edgelist, load_labels, write_edgelist, write_labels,
)
from .services.model_service import load_model_spec, sample_model

logger = logging.getLogger(__name__)

COMMANDS = {}


def command(name, help, arguments):
    """
    Register a command handler together with its argument builder.

    Parameters:
        name (str): Sub-command name.
        help (str): One-line description.
        arguments (callable): Called with (subparser, config) to add flags.
    """
    def decorator(handler):
        COMMANDS[name] = (help, arguments, handler)
        return handler
    return decorator


@dataclass
class RunReport:
    """
    What a command did: effective parameters, per-phase wall time and outputs.
    """
    command: str
    parameters: dict
    phases_ms: dict = field(default_factory=dict)
    peak_memory_mb: float = None
    outputs: list = field(default_factory=list)
    results: dict = field(default_factory=dict)

    @contextmanager
    def phase(self, name):
        started = time.perf_counter()
        try:
            yield
        finally:
            self.phases_ms[name] = self.phases_ms.get(name, 0.0) + 1000 * (time.perf_counter() - started)

    def to_dict(self):
        return _jsonable(asdict(self))


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return value


def peak_memory_mb():
    """Peak resident set size of this process in MB, if the platform reports it."""
    try:
        import resource
    except ImportError:
        return None
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0


def write_json(path, doc):
    return atomic_write(path, lambda handle: json.dump(_jsonable(doc), handle, indent=2))


def _load_graph(args, report, directed=None):
    with report.phase('load'):
        E = load_edgelist(
            args.edgelist,
            one_based=getattr(args, 'one_based', False),
            directed=args.directed if directed is None else directed,
        )
    return E


def _load_labels(path, E, report):
    with report.phase('load'):
        return align_labels(E, load_labels(check_readable(path)))


# ---------------------------------------------------------------- embed

def _embed_arguments(parser, config):
    parser.add_argument('edgelist', help='edgelist file (u v [w] per line)')
    parser.add_argument('labels', help='label file, one integer per line, 0 = unknown')
    parser.add_argument('--variant', choices=['aee', 'lee'], default='aee')
    parser.add_argument('--directed', action='store_true')
    parser.add_argument('--one-based', action='store_true', dest='one_based')
    parser.add_argument('--out', required=True, help='embedding CSV path')


@command('embed', 'one-hot graph encoder embedding of a labeled graph', _embed_arguments)
def cmd_embed(args, config):
    """
    Embed a graph with (partially) known labels and write the CSV.

    Returns:
        RunReport: Phase times and output path.
    """
    variant = resolve_variant(args.variant)
    report = RunReport('embed', {
        'edgelist': args.edgelist, 'labels': args.labels, 'variant': args.variant,
        'directed': args.directed, 'one_based': args.one_based, 'out': args.out,
        'threads': args.threads,
    })
    E = _load_graph(args, report)
    E, Y = _load_labels(args.labels, E, report)
    if variant == 'laplacian':
        with report.phase('reweight'):
            E = laplacian_reweight(E, args.threads)
    with report.phase('encode'):
        embedding, _ = encode(E, Y, 'adjacency', args.threads)
    with report.phase('write'):
        report.outputs.append(write_embedding(Embedding(embedding.Z, variant), args.out, config.FLOAT_FORMAT))
    report.results = {'n': E.n, 's': E.s, 'K': Y.K}
    return report


# ---------------------------------------------------------------- cluster

def _cluster_arguments(parser, config):
    parser.add_argument('edgelist')
    parser.add_argument('--k', type=positive_int, required=True, help='number of clusters')
    parser.add_argument('--max-iter', type=positive_int, default=config.MAX_ITER, dest='max_iter')
    parser.add_argument('--restarts', type=positive_int, default=config.RESTARTS)
    parser.add_argument(
        '--seed', type=int, default=0,
        help='seed of the random starting labels and of k-means; a start that splits '
             'identical components evenly is already a fixed point, so retry with another seed',
    )
    parser.add_argument('--variant', choices=['aee', 'lee'], default='aee')
    parser.add_argument('--directed', action='store_true')
    parser.add_argument('--one-based', action='store_true', dest='one_based')
    parser.add_argument('--truth', help='label file to score the clustering against (ARI)')
    parser.add_argument('--out', required=True, help='cluster label file, one per line')


@command('cluster', 'unsupervised encoder embedding + k-means', _cluster_arguments)
def cmd_cluster(args, config):
    """
    Cluster a graph without labels and optionally report ARI against the truth.
    """
    report = RunReport('cluster', {
        'edgelist': args.edgelist, 'k': args.k, 'max_iter': args.max_iter, 'restarts': args.restarts,
        'seed': args.seed, 'variant': args.variant, 'directed': args.directed,
        'one_based': args.one_based, 'truth': args.truth, 'out': args.out, 'threads': args.threads,
    })
    E = _load_graph(args, report)
    truth = None
    if args.truth:
        E, truth = _load_labels(args.truth, E, report)
    with report.phase('cluster'):
        _, labels, rounds = gee_unsup(
            E, args.k, args.max_iter, args.seed, resolve_variant(args.variant), args.restarts, args.threads,
        )
    with report.phase('write'):
        report.outputs.append(write_labels(labels, args.out))
    report.results = {'n': E.n, 's': E.s, 'iterations': rounds}
    if truth is not None:
        report.results['ari'] = ari(truth.labels, labels)
    return report


# ---------------------------------------------------------------- classify

def _classify_arguments(parser, config):
    parser.add_argument('edgelist')
    parser.add_argument('labels')
    parser.add_argument('--folds', type=fold_count, default=config.FOLDS)
    parser.add_argument('--classifier', choices=['lda', 'knn5', 'both'], default=config.CLASSIFIER)
    parser.add_argument('--variant', choices=['aee', 'lee'], default='aee')
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--directed', action='store_true')
    parser.add_argument('--one-based', action='store_true', dest='one_based')
    parser.add_argument('--out', help='JSON report path')


@command('classify', 'k-fold vertex classification on the encoder embedding', _classify_arguments)
def cmd_classify(args, config):
    """
    Cross-validated classification error with LDA and/or 5-NN.
    """
    report = RunReport('classify', {
        'edgelist': args.edgelist, 'labels': args.labels, 'folds': args.folds,
        'classifier': args.classifier, 'variant': args.variant, 'seed': args.seed,
        'directed': args.directed, 'one_based': args.one_based, 'out': args.out, 'threads': args.threads,
    })
    E = _load_graph(args, report)
    E, Y = _load_labels(args.labels, E, report)
    classifiers = ('lda', 'knn5') if args.classifier == 'both' else (args.classifier,)
    started = time.perf_counter()
    with report.phase('classify'):
        results = cross_validate(E, Y, args.folds, classifiers, resolve_variant(args.variant), args.seed, args.threads)
    wall_ms = 1000 * (time.perf_counter() - started)

    chance = chance_error(Y)
    entries = [{
        'dataset': os.path.basename(args.edgelist),
        'variant': args.variant,
        'classifier': name,
        'folds': args.folds,
        'mean_error': result.mean_error,
        'std_error': result.std_error,
        'per_fold': result.per_fold,
        'chance_error': chance,
        'wall_time_ms': wall_ms,
    } for name, result in results.items()]
    best = min(entries, key=lambda entry: entry['mean_error'])
    report.results = {'reports': entries, 'best_classifier': best['classifier'], 'mean_error': best['mean_error']}
    if args.out:
        report.outputs.append(write_json(args.out, entries if len(entries) > 1 else entries[0]))
    return report


# ---------------------------------------------------------------- generate

def _generate_arguments(parser, config):
    parser.add_argument('--model', required=True, help='model JSON document')
    parser.add_argument('--n', type=positive_int, required=True)
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--out-prefix', required=True, dest='out_prefix')


@command('generate', 'sample an SBM / DC-SBM / RDPG graph', _generate_arguments)
def cmd_generate(args, config):
    """
    Write <prefix>.edges, <prefix>.labels and <prefix>.theta.csv / <prefix>.latent.csv.
    """
    report = RunReport('generate', {
        'model': args.model, 'n': args.n, 'seed': args.seed, 'out_prefix': args.out_prefix,
    })
    with report.phase('load'):
        spec = load_model_spec(check_readable(args.model))
    with report.phase('generate'):
        E, Y, extra = sample_model(spec, args.n, args.seed)
    with report.phase('write'):
        report.outputs.append(write_edgelist(E, f"{args.out_prefix}.edges", config.FLOAT_FORMAT))
        report.outputs.append(write_labels(Y, f"{args.out_prefix}.labels"))
        for name, values in extra.items():
            frame = pd.DataFrame(values.reshape(values.shape[0], -1))
            frame.columns = [name] if frame.shape[1] == 1 else [f"{name}{c + 1}" for c in range(frame.shape[1])]
            path = f"{args.out_prefix}.{name}.csv"
            report.outputs.append(atomic_write(
                path, lambda handle, frame=frame: frame.to_csv(handle, index=False, float_format=config.FLOAT_FORMAT)
            ))
    report.results = {'n': E.n, 's': E.s, 'K': Y.K, 'mean_degree': E.mean_degree()}
    return report


# ---------------------------------------------------------------- bootstrap

def _bootstrap_arguments(parser, config):
    parser.add_argument('edgelist')
    parser.add_argument('labels')
    parser.add_argument('--n2', type=int, required=True)
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--permutations', type=positive_int, default=config.PERMUTATIONS)
    parser.add_argument('--naive', action='store_true', help='naive vertex-resampling bootstrap instead')
    parser.add_argument('--one-based', action='store_true', dest='one_based')
    parser.add_argument('--out-prefix', required=True, dest='out_prefix')


@command('bootstrap', 'graph bootstrap with a two-sample validity test', _bootstrap_arguments)
def cmd_bootstrap(args, config):
    """
    Resample a labeled graph and test it against the original.
    """
    report = RunReport('bootstrap', {
        'edgelist': args.edgelist, 'labels': args.labels, 'n2': args.n2, 'seed': args.seed,
        'permutations': args.permutations, 'naive': args.naive, 'one_based': args.one_based,
        'out_prefix': args.out_prefix, 'threads': args.threads,
    })
    E = _load_graph(args, report, directed=False)
    E, Y = _load_labels(args.labels, E, report)
    procedure = naive_bootstrap_test if args.naive else gee_bootstrap
    with report.phase('bootstrap'):
        result = procedure(E, Y, args.n2, args.seed, args.permutations, args.threads)
    with report.phase('write'):
        report.outputs.append(write_edgelist(result.edges, f"{args.out_prefix}.edges", config.FLOAT_FORMAT))
        report.outputs.append(write_labels(result.labels, f"{args.out_prefix}.labels"))
        summary = {
            'n': E.n,
            'n2': args.n2,
            'seed': args.seed,
            'permutations': args.permutations,
            'pvalue': result.pvalue,
            'clip_count': result.clip_count,
            'mean_degree_original': E.mean_degree(),
            'mean_degree_resampled': result.edges.mean_degree(),
        }
        report.outputs.append(write_json(f"{args.out_prefix}.json", summary))
    report.results = summary
    return report


# ---------------------------------------------------------------- bench

def _bench_arguments(parser, config):
    parser.add_argument('--k', type=positive_int, default=config.BENCH_K)
    parser.add_argument('--avg-degree', type=float, default=config.BENCH_AVG_DEGREE, dest='avg_degree')
    parser.add_argument('--edges-from', type=float, default=config.BENCH_EDGES_FROM, dest='edges_from')
    parser.add_argument('--edges-to', type=float, default=config.BENCH_EDGE_CEILING, dest='edges_to')
    parser.add_argument('--replicates', type=positive_int, default=config.BENCH_REPLICATES)
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--i-have-memory', action='store_true', dest='i_have_memory',
                        help='lift the desk-scale edge ceiling')
    parser.add_argument('--out', help='timing table CSV path')


@command('bench', 'encode-time scaling benchmark', _bench_arguments)
def cmd_bench(args, config):
    """
    Time encode across edge counts and write the timing table.
    """
    ceiling = float('inf') if args.i_have_memory else config.BENCH_EDGE_CEILING
    report = RunReport('bench', {
        'k': args.k, 'avg_degree': args.avg_degree, 'edges_from': int(args.edges_from),
        'edges_to': int(args.edges_to), 'replicates': args.replicates, 'seed': args.seed,
        'i_have_memory': args.i_have_memory, 'out': args.out, 'threads': args.threads,
    })
    if args.edges_to > ceiling:
        raise GraphDomainError(
            f"--edges-to {int(args.edges_to)} exceeds the desk ceiling {config.BENCH_EDGE_CEILING}; "
            "pass --i-have-memory to lift it"
        )
    with report.phase('encode'):
        table = run_benchmark(
            args.k, args.avg_degree, int(args.edges_from), int(args.edges_to), args.replicates,
            args.seed, args.threads, edge_ceiling=ceiling,
        )
    if args.out:
        report.outputs.append(atomic_write(
            args.out, lambda handle: table.to_csv(handle, index=False, float_format='%.6g')
        ))
    report.results = {'table': table.to_dict(orient='records')}
    return report


# ---------------------------------------------------------------- argument types

def positive_int(text):
    import argparse

    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def fold_count(text):
    import argparse

    value = positive_int(text)
    if value < 2:
        raise argparse.ArgumentTypeError("k-fold validation needs at least 2 folds")
    return value
