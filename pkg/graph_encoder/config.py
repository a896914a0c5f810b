import os

baseurl = os.path.abspath(os.path.dirname(__file__))


class Config:
    """
    Configuration class for the graph encoder command-line app.
    """
    SCHEMA_FOLDER = os.path.join(baseurl, 'schema')

    # runtime
    THREADS = int(os.environ.get('GEE_THREADS', 1))
    LOG_LEVEL = os.environ.get('GEE_LOG_LEVEL', 'INFO')
    LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'

    # output
    FLOAT_FORMAT = '%.17g'

    # encoder / cluster
    MAX_ITER = 30
    RESTARTS = 3
    KMEANS_MAX_ITER = 100

    # eval
    FOLDS = 10
    CLASSIFIER = 'both'

    # bootstrap
    PERMUTATIONS = 500

    # models
    PAIR_SAMPLING_CUTOFF = 5000
    RDPG_CLIP = (0.001, 0.999)

    # bench
    BENCH_K = 10
    BENCH_AVG_DEGREE = 100
    BENCH_EDGES_FROM = 10**3
    BENCH_EDGE_CEILING = 10**8
    BENCH_REPLICATES = 5
