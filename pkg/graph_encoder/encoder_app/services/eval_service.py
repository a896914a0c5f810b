import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from sklearn.model_selection import StratifiedKFold

from ...config import Config
from ...errors import EvalConfigError
from .encoder_service import encode

logger = logging.getLogger(__name__)

CLASSIFIERS = ('lda', 'knn5')


@dataclass(frozen=True, eq=False)
class Fold:
    train: np.ndarray
    test: np.ndarray


@dataclass(frozen=True, eq=False)
class LdaModel:
    """
    Pooled-covariance linear discriminant.

    Attributes:
        classes (np.ndarray): Class ids in column order.
        means (np.ndarray): Class means, one row per class.
        covariance (np.ndarray): Regularized pooled covariance.
        priors (np.ndarray): Class frequencies in the training data.
    """
    classes: np.ndarray
    means: np.ndarray
    covariance: np.ndarray
    priors: np.ndarray


@dataclass
class KfoldResult:
    """Cross-validation errors of one classifier."""
    classifier: str
    per_fold: list = field(default_factory=list)

    @property
    def mean_error(self):
        return float(np.mean(self.per_fold))

    @property
    def std_error(self):
        return float(np.std(self.per_fold, ddof=1)) if len(self.per_fold) > 1 else 0.0


def stratified_folds(Y, folds, seed=None):
    """
    Split the labeled vertices into stratified folds.

    The shuffle runs over the labeled vertices in id order, so a given seed
    picks different folds once the vertices are renumbered; pass the folds
    explicitly to cross_validate to compare renumbered graphs.

    Parameters:
        Y (LabelVector): Labels; unknown vertices are left out.
        folds (int): Number of folds, at least 2.
        seed (int): Shuffle seed.

    Returns:
        list[Fold]: Disjoint test sets covering every labeled vertex.
    """
    if folds < 2:
        raise EvalConfigError(f"k-fold needs at least 2 folds, got {folds}")
    labels = Y.labels
    counts = np.bincount(labels, minlength=Y.K + 1)[1:]
    small = np.flatnonzero(counts < folds)
    if small.size:
        raise EvalConfigError(
            f"classes {(small + 1).tolist()} have fewer than {folds} labeled vertices"
        )

    known = np.flatnonzero(labels > 0)
    splitter = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    return [
        Fold(train=known[train], test=known[test])
        for train, test in splitter.split(known[:, None], labels[known])
    ]


def lda_fit(rows, labels):
    """
    Fit a pooled-covariance LDA; eps = 1e-6 * trace(cov) / d is added to the diagonal.

    Parameters:
        rows (np.ndarray): Training rows.
        labels (np.ndarray): Class of each row.

    Returns:
        LdaModel: The fitted model.
    """
    X = np.asarray(rows, dtype=np.float64)
    y = np.asarray(labels)
    classes, counts = np.unique(y, return_counts=True)
    if np.any(counts < 2):
        raise EvalConfigError(f"LDA needs at least 2 samples per class, got {dict(zip(classes.tolist(), counts.tolist()))}")
    means = np.stack([X[y == c].mean(axis=0) for c in classes])
    centered = X - means[np.searchsorted(classes, y)]
    dof = max(X.shape[0] - classes.size, 1)
    covariance = centered.T @ centered / dof
    eps = 1e-6 * np.trace(covariance) / X.shape[1]
    covariance += max(eps, 1e-12) * np.eye(X.shape[1])
    return LdaModel(classes, means, covariance, counts / counts.sum())


def lda_predict(model, rows):
    """
    Predict by the largest linear discriminant score; ties go to the lowest class.

    Parameters:
        model (LdaModel): The fitted model.
        rows (np.ndarray): One row or a matrix of rows.

    Returns:
        int | np.ndarray: Class of each row.
    """
    X = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    factor = linalg.cho_factor(model.covariance)
    projected = linalg.cho_solve(factor, model.means.T)
    scores = X @ projected - 0.5 * np.sum(model.means.T * projected, axis=0) + np.log(model.priors)
    predicted = model.classes[np.argmax(scores, axis=1)]
    return int(predicted[0]) if np.ndim(rows) == 1 else predicted


def knn_predict(train_rows, train_labels, rows, k=5, batch=1024):
    """
    Majority vote among the k nearest training rows (Euclidean).

    Distance ties keep the lower training index, vote ties the lower class.

    Parameters:
        train_rows (np.ndarray): Training rows.
        train_labels (np.ndarray): Their classes.
        rows (np.ndarray): One query row or a matrix of queries.
        k (int): Number of neighbours, at most the training size.

    Returns:
        int | np.ndarray: Predicted class per query.
    """
    train = np.asarray(train_rows, dtype=np.float64)
    labels = np.asarray(train_labels)
    if train.shape[0] == 0:
        raise EvalConfigError("k-NN needs a non-empty training set")
    if not 1 <= k <= train.shape[0]:
        raise EvalConfigError(f"k={k} outside 1..{train.shape[0]}")
    queries = np.atleast_2d(np.asarray(rows, dtype=np.float64))

    classes, encoded = np.unique(labels, return_inverse=True)
    predicted = np.empty(queries.shape[0], dtype=classes.dtype)
    for start in range(0, queries.shape[0], batch):
        chunk = queries[start:start + batch]
        distances = ((chunk[:, None, :] - train[None, :, :]) ** 2).sum(axis=2)
        nearest = np.argsort(distances, axis=1, kind='stable')[:, :k]
        votes = np.zeros((chunk.shape[0], classes.size), dtype=np.int64)
        np.add.at(votes, (np.repeat(np.arange(chunk.shape[0]), k), encoded[nearest].ravel()), 1)
        predicted[start:start + chunk.shape[0]] = classes[np.argmax(votes, axis=1)]
    return predicted[0].item() if np.ndim(rows) == 1 else predicted


def chance_error(Y):
    """1 - largest class frequency among the labeled vertices."""
    counts = np.bincount(Y.labels, minlength=Y.K + 1)[1:]
    return float(1 - counts.max() / counts.sum())


def encode_fold(E, Y, fold, variant='adjacency', threads=1):
    """
    Encode with the fold's test labels masked to 0.

    Returns:
        tuple[Embedding, EncoderWeights]
    """
    return encode(E, Y.masked(fold.test), variant, threads)


def _fold_errors(E, Y, fold, classifiers, variant, threads):
    embedding, _ = encode_fold(E, Y, fold, variant, threads)
    train_rows, test_rows = embedding.Z[fold.train], embedding.Z[fold.test]
    train_labels, test_labels = Y.labels[fold.train], Y.labels[fold.test]
    errors = {}
    for name in classifiers:
        if name == 'lda':
            predicted = lda_predict(lda_fit(train_rows, train_labels), test_rows)
        else:
            predicted = knn_predict(train_rows, train_labels, test_rows, k=5)
        errors[name] = float(np.mean(predicted != test_labels))
    return errors


def _resolve_folds(Y, folds, seed):
    if isinstance(folds, (int, np.integer)):
        return stratified_folds(Y, int(folds), seed)
    splits = list(folds)
    if len(splits) < 2:
        raise EvalConfigError(f"k-fold needs at least 2 folds, got {len(splits)}")
    for fold in splits:
        if np.any(Y.labels[fold.test] == 0) or np.any(Y.labels[fold.train] == 0):
            raise EvalConfigError("folds may only hold labeled vertices")
    return splits


def cross_validate(E, Y, folds=Config.FOLDS, classifiers=CLASSIFIERS, variant='adjacency', seed=None, threads=1):
    """
    k-fold vertex classification on the encoder embedding.

    Every fold re-encodes the graph with its test labels hidden, fits each
    classifier on the training rows and scores the test rows.

    Parameters:
        E (EdgeList): The graph.
        Y (LabelVector): Labels (0 = unknown, never used for scoring).
        folds (int | list[Fold]): Number of seeded stratified folds, or the folds themselves.
        classifiers (tuple): Any of 'lda', 'knn5'.
        variant (str): Embedding variant.
        seed (int): Fold shuffle seed.
        threads (int): Folds evaluated in parallel.

    Returns:
        dict[str, KfoldResult]: Errors per classifier.
    """
    unknown = set(classifiers) - set(CLASSIFIERS)
    if unknown or not classifiers:
        raise EvalConfigError(f"unknown classifiers {sorted(unknown)}; use {CLASSIFIERS}")
    splits = _resolve_folds(Y, folds, seed)
    started = time.perf_counter()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_fold = list(pool.map(lambda f: _fold_errors(E, Y, f, classifiers, variant, 1), splits))
    else:
        per_fold = [_fold_errors(E, Y, f, classifiers, variant, 1) for f in splits]
    results = {name: KfoldResult(name, [errors[name] for errors in per_fold]) for name in classifiers}
    logger.info(
        "cross-validated n=%d folds=%d variant=%s %s in %.1f ms", E.n, len(splits), variant,
        ' '.join(f"{name}={r.mean_error:.4f}" for name, r in results.items()),
        1000 * (time.perf_counter() - started),
    )
    return results


def kfold_error(E, Y, folds=Config.FOLDS, classifier='lda', variant='adjacency', seed=None, threads=1):
    """
    Mean and per-fold misclassification rate of one classifier.

    Returns:
        tuple[float, list]: Mean error and per-fold errors.
    """
    result = cross_validate(E, Y, folds, (classifier,), variant, seed, threads)[classifier]
    return result.mean_error, result.per_fold
