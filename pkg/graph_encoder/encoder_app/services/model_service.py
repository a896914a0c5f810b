import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

from ...config import Config
from ...errors import GraphDomainError, ModelSpecError
from .graph_service import EdgeList, LabelVector

logger = logging.getLogger(__name__)

THETA_DISTRIBUTIONS = ('beta', 'uniform')
LATENT_DISTRIBUTIONS = ('beta', 'uniform', 'normal')
EDGE_MODES = ('bernoulli', 'weighted')


@dataclass(frozen=True)
class Distribution:
    """
    A named bounded distribution: beta(a, b), uniform(lo, hi) or a normal(mean, sd)
    clipped to [clip[0], clip[1]].
    """
    dist: str
    params: tuple
    clip: tuple = None

    def __post_init__(self):
        params = tuple(float(p) for p in self.params)
        object.__setattr__(self, 'params', params)
        if self.dist not in LATENT_DISTRIBUTIONS:
            raise ModelSpecError(f"unsupported distribution {self.dist!r}")
        if len(params) != 2:
            raise ModelSpecError(f"{self.dist} takes two parameters, got {list(params)}")
        first, second = params
        if self.dist == 'beta' and (first <= 0 or second <= 0):
            raise ModelSpecError(f"beta parameters must be positive, got {list(params)}")
        if self.dist == 'uniform' and not first <= second:
            raise ModelSpecError(f"uniform needs lo <= hi, got {list(params)}")
        if self.dist == 'normal':
            if second <= 0:
                raise ModelSpecError(f"normal sd must be positive, got {second}")
            if self.clip is None:
                object.__setattr__(self, 'clip', tuple(Config.RDPG_CLIP))
        if self.clip is not None:
            object.__setattr__(self, 'clip', tuple(float(c) for c in self.clip))

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict) or 'dist' not in doc or 'params' not in doc:
            raise ModelSpecError(f"distribution needs 'dist' and 'params', got {doc!r}")
        return cls(str(doc['dist']).lower(), tuple(doc['params']), doc.get('clip'))

    def to_dict(self):
        doc = {'dist': self.dist, 'params': list(self.params)}
        if self.clip is not None:
            doc['clip'] = list(self.clip)
        return doc

    @property
    def upper(self):
        if self.dist == 'beta':
            return 1.0
        if self.dist == 'uniform':
            return self.params[1]
        return self.clip[1]

    @property
    def lower(self):
        if self.dist == 'beta':
            return 0.0
        if self.dist == 'uniform':
            return self.params[0]
        return self.clip[0]

    def sample(self, rng, size):
        """
        Draw values.

        Returns:
            tuple[np.ndarray, int]: The draws and how many were clipped.
        """
        first, second = self.params
        if self.dist == 'beta':
            values = rng.beta(first, second, size)
        elif self.dist == 'uniform':
            values = rng.uniform(first, second, size)
        else:
            values = rng.normal(first, second, size)
        if self.clip is None:
            return values, 0
        lo, hi = self.clip
        clipped = int(np.count_nonzero((values < lo) | (values > hi)))
        return np.clip(values, lo, hi), clipped

    def closed_moment(self, t):
        """E[X^t] in closed form (beta and uniform only)."""
        first, second = self.params
        if self.dist == 'beta':
            return float(np.prod([(first + r) / (first + second + r) for r in range(t)]))
        if self.dist == 'uniform':
            if first == second:
                return first ** t
            return (second ** (t + 1) - first ** (t + 1)) / ((t + 1) * (second - first))
        raise ModelSpecError(f"no closed-form moments for {self.dist}")

    def quadrature_moment(self, t, tol=1e-10):
        """E[X^t] by adaptive quadrature, including the clipped point masses."""
        first, second = self.params
        if self.dist == 'uniform':
            if first == second:
                return first ** t
            value, _ = integrate.quad(lambda x: x ** t / (second - first), first, second,
                                      epsabs=tol, epsrel=tol, limit=200)
            return value
        if self.dist == 'beta':
            density = stats.beta(first, second).pdf
            value, _ = integrate.quad(lambda x: x ** t * density(x), 0.0, 1.0,
                                      epsabs=tol, epsrel=tol, limit=200)
            return value

        normal = stats.norm(first, second)
        lo, hi = self.clip if self.clip is not None else (first - 12 * second, first + 12 * second)
        points = [p for p in (first - 5 * second, first, first + 5 * second) if lo < p < hi]
        value, _ = integrate.quad(lambda x: x ** t * normal.pdf(x), lo, hi,
                                  epsabs=tol, epsrel=tol, limit=200, points=points or None)
        if self.clip is not None:
            value += lo ** t * normal.cdf(lo) + hi ** t * normal.sf(hi)
        return value


def _check_prior(prior, K):
    prior = np.asarray(prior, dtype=np.float64)
    if prior.shape != (K,):
        raise ModelSpecError(f"prior needs {K} entries, got {prior.shape}")
    upper_ok = K == 1 or np.all(prior < 1)
    if np.any(prior <= 0) or not upper_ok or not np.isclose(prior.sum(), 1.0):
        raise ModelSpecError(f"prior entries must lie in (0,1) and sum to 1, got {prior.tolist()}")
    return prior


def _check_fixed_labels(labels, K):
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 1 or labels.max() > K):
        raise ModelSpecError(f"fixed labels must lie in 1..{K}")
    return labels


def _draw_labels(prior, labels, K, n, rng):
    if labels is not None:
        if labels.size != n:
            raise ModelSpecError(f"model fixes {labels.size} labels but n={n} was requested")
        return labels.copy()
    return rng.choice(K, size=n, p=prior) + 1


@dataclass(frozen=True, eq=False)
class SbmSpec:
    """
    Stochastic block model: K x K block probabilities and a class prior
    (or a fixed label assignment). An optional weight distribution makes
    every edge carry an i.i.d. weight.
    """
    B: np.ndarray
    prior: np.ndarray = None
    labels: np.ndarray = None
    weight: Distribution = None

    def __post_init__(self):
        B = np.atleast_2d(np.asarray(self.B, dtype=np.float64))
        if B.ndim != 2 or B.shape[0] != B.shape[1]:
            raise ModelSpecError(f"B must be square, got shape {B.shape}")
        if not np.allclose(B, B.T):
            raise ModelSpecError("B must be symmetric")
        if np.any(B < 0) or np.any(B > 1):
            raise ModelSpecError("B entries must lie in [0, 1]")
        object.__setattr__(self, 'B', B)
        K = B.shape[0]
        if self.prior is None and self.labels is None:
            object.__setattr__(self, 'prior', np.full(K, 1.0 / K))
        elif self.prior is not None:
            object.__setattr__(self, 'prior', _check_prior(self.prior, K))
        if self.labels is not None:
            object.__setattr__(self, 'labels', _check_fixed_labels(self.labels, K))

    @property
    def K(self):
        return int(self.B.shape[0])

    def draw_labels(self, n, rng):
        return _draw_labels(self.prior, self.labels, self.K, n, rng)


@dataclass(frozen=True, eq=False)
class DcsbmSpec:
    """
    Degree-corrected SBM: vertex degree parameters theta_i ~ theta scale the
    block probabilities ('bernoulli') or the edge weights ('weighted').
    """
    base: SbmSpec
    theta: Distribution
    edge_mode: str = 'bernoulli'

    def __post_init__(self):
        if self.theta.dist not in THETA_DISTRIBUTIONS:
            raise ModelSpecError(f"theta sampler must be one of {THETA_DISTRIBUTIONS}, got {self.theta.dist!r}")
        if self.theta.lower < 0 or self.theta.upper <= 0:
            raise ModelSpecError("theta support must lie in (0, M]")
        if self.edge_mode not in EDGE_MODES:
            raise ModelSpecError(f"edge_mode must be one of {EDGE_MODES}, got {self.edge_mode!r}")

    @property
    def K(self):
        return self.base.K


@dataclass(frozen=True, eq=False)
class RdpgSpec:
    """
    Random dot product graph with a K-component latent mixture: class k vertices
    draw each of their dim latent coordinates i.i.d. from latents[k-1].
    """
    latents: tuple
    prior: np.ndarray = None
    labels: np.ndarray = None
    dim: int = 1

    def __post_init__(self):
        latents = tuple(self.latents)
        if not latents:
            raise ModelSpecError("rdpg needs at least one latent sampler")
        for latent in latents:
            if latent.lower < 0 or latent.upper > 1:
                raise ModelSpecError(f"latent sampler {latent.to_dict()} leaves [0, 1]")
        object.__setattr__(self, 'latents', latents)
        K = len(latents)
        if self.prior is None and self.labels is None:
            object.__setattr__(self, 'prior', np.full(K, 1.0 / K))
        elif self.prior is not None:
            object.__setattr__(self, 'prior', _check_prior(self.prior, K))
        if self.labels is not None:
            object.__setattr__(self, 'labels', _check_fixed_labels(self.labels, K))
        if int(self.dim) < 1:
            raise ModelSpecError(f"latent dimension must be at least 1, got {self.dim}")
        object.__setattr__(self, 'dim', int(self.dim))

    @property
    def K(self):
        return len(self.latents)

    def draw_labels(self, n, rng):
        return _draw_labels(self.prior, self.labels, self.K, n, rng)


@dataclass(frozen=True, eq=False)
class MomentOracle:
    """
    Mean and per-coordinate variance of a vertex's embedding row.

    Attributes:
        mu (np.ndarray): Expected row.
        sigma_diag (np.ndarray): Variance of n_k^0.5 * Z_i[k] given the realized
            neighbour parameters (what one graph exhibits).
        sigma_marginal (np.ndarray): Variance when neighbour parameters are redrawn.
        scaling (np.ndarray): Class counts n_k.
    """
    mu: np.ndarray
    sigma_diag: np.ndarray
    sigma_marginal: np.ndarray
    scaling: np.ndarray = field(default=None)

    def standardize(self, rows):
        """
        Diag(n)^0.5 (Z_i - mu) / sqrt(sigma), coordinate-wise; zero-variance
        coordinates map to 0.
        """
        rows = np.atleast_2d(rows)
        sigma = np.sqrt(np.clip(self.sigma_diag, 0.0, None))
        scaled = np.sqrt(self.scaling) * (rows - self.mu)
        out = np.zeros_like(scaled)
        np.divide(scaled, sigma, out=out, where=sigma > 0)
        return out


def class_moments(values, labels, K):
    """
    Realized per-class moments of vertex parameters.

    Parameters:
        values (np.ndarray): theta (length n) or latent positions (n x dim).
        labels (np.ndarray | LabelVector): Classes 1..K.
        K (int): Number of classes.

    Returns:
        tuple: For theta, (first, second) moment vectors of length K. For latent
        positions, (means K x dim, second-moment matrices K x dim x dim).
    """
    labels = labels.labels if isinstance(labels, LabelVector) else np.asarray(labels)
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        first = np.array([values[labels == k].mean() for k in range(1, K + 1)])
        second = np.array([(values[labels == k] ** 2).mean() for k in range(1, K + 1)])
        return first, second
    means = np.stack([values[labels == k].mean(axis=0) for k in range(1, K + 1)])
    seconds = np.stack([
        values[labels == k].T @ values[labels == k] / np.count_nonzero(labels == k)
        for k in range(1, K + 1)
    ])
    return means, seconds


def _latent_population_moments(spec):
    means, seconds = [], []
    for latent in spec.latents:
        m1 = latent.quadrature_moment(1)
        m2 = latent.quadrature_moment(2)
        means.append(np.full(spec.dim, m1))
        seconds.append(np.full((spec.dim, spec.dim), m1 * m1) + np.eye(spec.dim) * (m2 - m1 * m1))
    return np.stack(means), np.stack(seconds)


def theoretical_moments(model, y, counts, theta_i=None, x_i=None, theta_moments=None, latent_moments=None):
    """
    Limiting mean and variance of the embedding row of a class-y vertex.

    Parameters:
        model (SbmSpec | DcsbmSpec | RdpgSpec): The generating model.
        y (int): Class of the vertex, 1..K.
        counts (sequence): Class counts n_k used for scaling.
        theta_i (float): Degree parameter of the vertex (DC-SBM).
        x_i (sequence): Latent position of the vertex (RDPG).
        theta_moments (tuple): Per-class (E theta, E theta^2); closed form from the sampler if omitted.
        latent_moments (tuple): Per-class (mean, second moment); quadrature from the samplers if omitted.

    Returns:
        MomentOracle: mu, conditional and marginal variances.
    """
    counts = np.asarray(counts, dtype=np.float64)
    if not 1 <= y <= model.K:
        raise GraphDomainError(f"class {y} outside 1..{model.K}")

    if isinstance(model, SbmSpec):
        b = model.B[y - 1]
        if model.weight is None:
            sigma = b * (1 - b)
            return MomentOracle(b.copy(), sigma, sigma.copy(), counts)
        u1 = model.weight.quadrature_moment(1)
        u2 = model.weight.quadrature_moment(2)
        sigma = u2 * b - (u1 * b) ** 2
        return MomentOracle(u1 * b, sigma, sigma.copy(), counts)

    if isinstance(model, DcsbmSpec):
        if theta_i is None:
            raise ModelSpecError("DC-SBM moments need the vertex degree parameter theta_i")
        if theta_moments is None:
            theta_moments = (
                np.full(model.K, model.theta.closed_moment(1)),
                np.full(model.K, model.theta.closed_moment(2)),
            )
        t1, t2 = (np.asarray(m, dtype=np.float64) for m in theta_moments)
        b = model.base.B[y - 1]
        mu = theta_i * b * t1
        if model.edge_mode == 'bernoulli':
            sigma = theta_i * b * t1 - theta_i ** 2 * b ** 2 * t2
            marginal = mu * (1 - mu)
        else:
            sigma = theta_i ** 2 * t2 * b * (1 - b)
            marginal = theta_i ** 2 * (t2 * b - t1 ** 2 * b ** 2)
        return MomentOracle(mu, sigma, marginal, counts)

    if isinstance(model, RdpgSpec):
        if x_i is None:
            raise ModelSpecError("RDPG moments need the vertex latent position x_i")
        x = np.atleast_1d(np.asarray(x_i, dtype=np.float64))
        means, seconds = latent_moments if latent_moments is not None else _latent_population_moments(model)
        means = np.asarray(means, dtype=np.float64).reshape(model.K, -1)
        seconds = np.asarray(seconds, dtype=np.float64).reshape(model.K, x.size, x.size)
        mu = means @ x
        squared = np.einsum('i,kij,j->k', x, seconds, x)
        return MomentOracle(mu, mu - squared, mu - mu ** 2, counts)

    raise ModelSpecError(f"unsupported model {type(model).__name__}")


def _pair_edges(n, probability_row, rng, weight_row=None):
    """
    Per-pair Bernoulli sampling over i < j, one row at a time.

    probability_row(i) gives the probabilities for j = i+1..n-1.
    """
    sources, targets, weights = [], [], []
    for i in range(n - 1):
        p = probability_row(i)
        hits = np.flatnonzero(rng.random(n - i - 1) < p)
        if hits.size:
            sources.append(np.full(hits.size, i, dtype=np.int64))
            targets.append(hits + i + 1)
            if weight_row is not None:
                weights.append(weight_row(i)[hits])
    if not sources:
        return np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0)
    src = np.concatenate(sources)
    dst = np.concatenate(targets)
    w = np.concatenate(weights) if weight_row is not None else np.ones(src.size)
    return src, dst, w


def _triangle_pairs(t):
    """Map indices 0..m(m-1)/2-1 to pairs (i, j) with i < j."""
    j = np.floor((1 + np.sqrt(1 + 8 * t.astype(np.float64))) / 2).astype(np.int64)
    j = np.where(j * (j - 1) // 2 > t, j - 1, j)
    j = np.where((j + 1) * j // 2 <= t, j + 1, j)
    return t - j * (j - 1) // 2, j


def _block_edges(labels, B, rng):
    """Binomial edge count per block, then uniform placement among the block's pairs."""
    K = B.shape[0]
    members = [np.flatnonzero(labels == k) for k in range(1, K + 1)]
    sources, targets = [], []
    for k in range(K):
        for l in range(k, K):
            a, b = members[k], members[l]
            total = a.size * (a.size - 1) // 2 if k == l else a.size * b.size
            if total == 0 or B[k, l] == 0:
                continue
            m = rng.binomial(total, B[k, l])
            picks = rng.choice(total, size=m, replace=False)
            if k == l:
                i, j = _triangle_pairs(picks)
                sources.append(a[i])
                targets.append(a[j])
            else:
                sources.append(a[picks // b.size])
                targets.append(b[picks % b.size])
    if not sources:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(sources), np.concatenate(targets)


def sample_sbm(spec, n, seed, pair_cutoff=Config.PAIR_SAMPLING_CUTOFF):
    """
    Draw an undirected simple SBM graph.

    Parameters:
        spec (SbmSpec): The model.
        n (int): Number of vertices, at least 2.
        seed (int): RNG seed.
        pair_cutoff (int): Largest n sampled pair by pair; larger graphs use
            per-block binomial counts.

    Returns:
        tuple[EdgeList, LabelVector]: The graph (each edge once) and its labels.
    """
    if n < 2:
        raise GraphDomainError(f"need at least 2 vertices, got {n}")
    rng = np.random.default_rng(seed)
    labels = spec.draw_labels(n, rng)
    cls = labels - 1
    if n <= pair_cutoff:
        src, dst, _ = _pair_edges(n, lambda i: spec.B[cls[i], cls[i + 1:]], rng)
    else:
        src, dst = _block_edges(labels, spec.B, rng)
    if spec.weight is not None:
        w, _ = spec.weight.sample(rng, src.size)
    else:
        w = np.ones(src.size)
    logger.info("sampled sbm n=%d K=%d s=%d seed=%s", n, spec.K, src.size, seed)
    return EdgeList(n, src, dst, w), LabelVector(labels, spec.K)


def sample_dcsbm(spec, n, seed):
    """
    Draw a degree-corrected SBM graph.

    Returns:
        tuple[EdgeList, LabelVector, np.ndarray]: Graph, labels and the realized theta.
    """
    if n < 2:
        raise GraphDomainError(f"need at least 2 vertices, got {n}")
    if n > Config.PAIR_SAMPLING_CUTOFF:
        logger.warning("dcsbm sampling is pair by pair, O(n^2) for n=%d", n)
    rng = np.random.default_rng(seed)
    labels = spec.base.draw_labels(n, rng)
    theta, _ = spec.theta.sample(rng, n)
    cls = labels - 1
    B = spec.base.B

    if spec.edge_mode == 'bernoulli':
        def probability_row(i):
            p = theta[i] * theta[i + 1:] * B[cls[i], cls[i + 1:]]
            if p.size and p.max() > 1:
                j = int(np.argmax(p)) + i + 1
                raise ModelSpecError(f"edge probability {p.max():.4g} > 1 for pair ({i}, {j})")
            return p
        src, dst, w = _pair_edges(n, probability_row, rng)
    else:
        src, dst, w = _pair_edges(
            n, lambda i: B[cls[i], cls[i + 1:]], rng,
            weight_row=lambda i: theta[i] * theta[i + 1:],
        )
    logger.info("sampled dcsbm n=%d K=%d s=%d mode=%s seed=%s", n, spec.K, src.size, spec.edge_mode, seed)
    return EdgeList(n, src, dst, w), LabelVector(labels, spec.K), theta


def sample_latents(spec, labels, rng):
    """
    Draw latent positions class by class.

    Returns:
        tuple[np.ndarray, int]: n x dim positions and the number of clipped draws.
    """
    X = np.empty((labels.size, spec.dim))
    clipped = 0
    for k, latent in enumerate(spec.latents, start=1):
        rows = np.flatnonzero(labels == k)
        values, count = latent.sample(rng, (rows.size, spec.dim))
        X[rows] = values
        clipped += count
    return X, clipped


def sample_rdpg(spec, n, seed):
    """
    Draw a random dot product graph.

    Returns:
        tuple[EdgeList, LabelVector, np.ndarray]: Graph, labels and latent positions.
    """
    if n < 2:
        raise GraphDomainError(f"need at least 2 vertices, got {n}")
    if n > Config.PAIR_SAMPLING_CUTOFF:
        logger.warning("rdpg sampling is pair by pair, O(n^2) for n=%d", n)
    rng = np.random.default_rng(seed)
    labels = spec.draw_labels(n, rng)
    X, clipped = sample_latents(spec, labels, rng)
    if clipped:
        logger.info("clipped %d of %d latent draws (%.3f%%)", clipped, X.size, 100.0 * clipped / X.size)

    def probability_row(i):
        p = X[i + 1:] @ X[i]
        bad = np.flatnonzero((p <= 0) | (p > 1))
        if bad.size:
            j = int(bad[0]) + i + 1
            raise ModelSpecError(f"inner product {p[bad[0]]:.4g} outside (0, 1] for pair ({i}, {j})")
        return p

    src, dst, w = _pair_edges(n, probability_row, rng)
    logger.info("sampled rdpg n=%d K=%d s=%d seed=%s", n, spec.K, src.size, seed)
    return EdgeList(n, src, dst, w), LabelVector(labels, spec.K), X


def random_edgelist(n, s, K, seed):
    """
    Uniform random graph with s edges (no self-loops, duplicates possible)
    and uniform random labels with every class present.

    Returns:
        tuple[EdgeList, LabelVector]
    """
    from .cluster_service import random_labels

    if n < max(2, K):
        raise GraphDomainError(f"need n >= max(2, K), got n={n}, K={K}")
    rng = np.random.default_rng(seed)
    src = rng.integers(0, n, size=s)
    dst = rng.integers(0, n - 1, size=s)
    dst += dst >= src
    labels = random_labels(n, K, rng)
    return EdgeList(n, src, dst, np.ones(s)), LabelVector(labels, K)


def model_spec_from_dict(doc):
    """
    Build a model from its JSON document
    {model, B, prior, labels, weight, theta, edge_mode, latents, dim}.
    """
    if not isinstance(doc, dict) or 'model' not in doc:
        raise ModelSpecError("model document needs a 'model' field")
    kind = str(doc['model']).lower()
    try:
        if kind in ('sbm', 'dcsbm'):
            weight = Distribution.from_dict(doc['weight']) if doc.get('weight') else None
            base = SbmSpec(np.asarray(doc['B'], dtype=np.float64), doc.get('prior'), doc.get('labels'), weight)
            if kind == 'sbm':
                return base
            return DcsbmSpec(base, Distribution.from_dict(doc['theta']), doc.get('edge_mode', 'bernoulli'))
        if kind == 'rdpg':
            latents = tuple(Distribution.from_dict(d) for d in doc['latents'])
            return RdpgSpec(latents, doc.get('prior'), doc.get('labels'), doc.get('dim', 1))
    except KeyError as missing:
        raise ModelSpecError(f"{kind} document is missing field {missing}") from None
    except (TypeError, ValueError) as bad:
        raise ModelSpecError(f"invalid {kind} document: {bad}") from None
    raise ModelSpecError(f"unknown model {kind!r}; use sbm, dcsbm or rdpg")


def load_model_spec(path):
    """Read a model document from a JSON file."""
    try:
        with open(path, encoding='utf-8') as handle:
            doc = json.load(handle)
    except json.JSONDecodeError as bad:
        raise ModelSpecError(f"{path}: malformed JSON: {bad}") from None
    return model_spec_from_dict(doc)


def sample_model(spec, n, seed):
    """
    Dispatch to the matching generator.

    Returns:
        tuple[EdgeList, LabelVector, dict]: Graph, labels and any vertex parameters
        ({'theta': ...} or {'latent': ...}).
    """
    if isinstance(spec, DcsbmSpec):
        E, Y, theta = sample_dcsbm(spec, n, seed)
        return E, Y, {'theta': theta}
    if isinstance(spec, RdpgSpec):
        E, Y, X = sample_rdpg(spec, n, seed)
        return E, Y, {'latent': X}
    E, Y = sample_sbm(spec, n, seed)
    return E, Y, {}
