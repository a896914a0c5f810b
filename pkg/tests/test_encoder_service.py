import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graph_encoder.errors import GraphDomainError, LabelConfigError
from graph_encoder.encoder_app.services.encoder_service import (
    Embedding, build_weights, conditional_edge_estimate, encode, write_embedding,
)
from graph_encoder.encoder_app.services.graph_service import EdgeList, LabelVector, to_dense
from graph_encoder.encoder_app.services.model_service import SbmSpec, random_edgelist, sample_sbm


def random_graph(rng, directed):
    n = int(rng.integers(2, 200))
    s = int(rng.integers(0, 4 * n))
    src = rng.integers(0, n, size=s)
    dst = rng.integers(0, n, size=s)
    weight = rng.uniform(0.1, 3.0, size=s) if rng.random() < 0.5 else np.ones(s)
    K = int(rng.integers(1, min(n, 6) + 1))
    labels = rng.integers(0, K + 1, size=n)
    labels[rng.choice(n, size=K, replace=False)] = np.arange(1, K + 1)
    return EdgeList(n, src, dst, weight, directed), LabelVector(labels, K)


def test_weights_example():
    W = build_weights(LabelVector([1, 1, 2], 2)).dense()
    np.testing.assert_array_equal(W, [[0.5, 0], [0.5, 0], [0, 1]])


def test_weights_unknown_row_zero():
    W = build_weights(LabelVector([0, 1], 1)).dense()
    np.testing.assert_array_equal(W, [[0], [1]])


@settings(max_examples=50, deadline=None)
@given(labels=st.lists(st.integers(0, 4), min_size=1, max_size=30))
def test_weight_columns_sum_to_one(labels):
    K = max(labels)
    if K == 0 or len(set(labels) - {0}) < K:
        return
    sums = build_weights(LabelVector(labels, K)).column_sums()
    np.testing.assert_allclose(sums, np.ones(K))


def test_encode_two_vertex_example():
    E = EdgeList.from_edges(2, [(0, 1, 1.0)])
    embedding, _ = encode(E, LabelVector([1, 2], 2))
    np.testing.assert_array_equal(embedding.Z, [[0, 1], [1, 0]])


def test_encode_matches_dense_product():
    rng = np.random.default_rng(2024)
    for trial in range(200):
        E, Y = random_graph(rng, directed=bool(trial % 2))
        W = build_weights(Y).dense()
        A = to_dense(E)
        embedding, _ = encode(E, Y, 'adjacency')
        assert np.max(np.abs(embedding.Z - A @ W), initial=0.0) < 1e-12


def test_laplacian_matches_dense_product():
    rng = np.random.default_rng(99)
    for _ in range(200):
        E, Y = random_graph(rng, directed=False)
        A = to_dense(E)
        degrees = A.sum(axis=1)
        scale = np.zeros_like(degrees)
        np.divide(1.0, np.sqrt(degrees), out=scale, where=degrees > 0)
        expected = (scale[:, None] * A * scale[None, :]) @ build_weights(Y).dense()
        embedding, _ = encode(E, Y, 'lee')
        assert embedding.variant == 'laplacian'
        assert np.max(np.abs(embedding.Z - expected), initial=0.0) < 1e-12


def test_laplacian_matches_dense_product_directed():
    rng = np.random.default_rng(123)
    for _ in range(200):
        E, Y = random_graph(rng, directed=True)
        A = to_dense(E)
        # out-weight plus in-weight, a loop counted once
        degrees = A.sum(axis=1) + A.sum(axis=0) - np.diag(A)
        scale = np.zeros_like(degrees)
        np.divide(1.0, np.sqrt(degrees), out=scale, where=degrees > 0)
        expected = (scale[:, None] * A * scale[None, :]) @ build_weights(Y).dense()
        embedding, _ = encode(E, Y, 'laplacian')
        assert np.max(np.abs(embedding.Z - expected), initial=0.0) < 1e-12


def test_scaled_weights_scale_embedding():
    rng = np.random.default_rng(8)
    for trial in range(50):
        E, Y = random_graph(rng, directed=bool(trial % 2))
        Z = encode(E, Y)[0].Z
        # a power of two scales every partial sum exactly
        np.testing.assert_array_equal(encode(E.with_weights(4.0 * E.weight), Y)[0].Z, 4.0 * Z)
        np.testing.assert_allclose(encode(E.with_weights(2.5 * E.weight), Y)[0].Z, 2.5 * Z, rtol=1e-14, atol=0)


def test_unknown_isolated_vertices_leave_rows_unchanged():
    rng = np.random.default_rng(31)
    for _ in range(50):
        E, Y = random_graph(rng, directed=False)
        Z = encode(E, Y)[0].Z
        grown = LabelVector(np.concatenate([Y.labels, np.zeros(5, np.int64)]), Y.K)
        Z2 = encode(E.with_vertex_count(E.n + 5), grown)[0].Z
        np.testing.assert_array_equal(Z2[:E.n], Z)
        np.testing.assert_array_equal(Z2[E.n:], np.zeros((5, Y.K)))


def test_encode_threads_agree():
    E, Y = random_edgelist(5000, 200_000, 10, seed=3)
    sequential, _ = encode(E, Y, threads=1)
    parallel, _ = encode(E, Y, threads=4)
    np.testing.assert_allclose(parallel.Z, sequential.Z, rtol=0, atol=1e-12)


def test_encode_size_mismatch():
    E = EdgeList.from_edges(3, [(0, 1)])
    with pytest.raises(GraphDomainError):
        encode(E, LabelVector([1, 2], 2))


def test_encode_empty_class():
    E = EdgeList.from_edges(3, [(0, 1)])
    with pytest.raises(LabelConfigError):
        encode(E, LabelVector([1, 1, 0], 2))


def test_encode_unknown_variant():
    E = EdgeList.from_edges(2, [(0, 1)])
    with pytest.raises(GraphDomainError):
        encode(E, LabelVector([1, 2], 2), 'spectral')


def test_isolated_vertex_row_is_zero():
    E = EdgeList.from_edges(3, [(0, 1)])
    embedding, _ = encode(E, LabelVector([1, 2, 1], 2))
    assert conditional_edge_estimate(embedding, 2, 1) == 0.0
    assert conditional_edge_estimate(embedding, 2, 2) == 0.0


def test_edge_estimate_on_cliques(two_cliques):
    E, Y = two_cliques
    embedding, _ = encode(E, Y)
    # vertex 0 sees every other member of its own clique
    assert conditional_edge_estimate(embedding, 0, 1) == pytest.approx(19 / 20)
    assert conditional_edge_estimate(embedding, 0, 2) == 0.0
    # swap the class names between the cliques
    relabeled = LabelVector(np.r_[np.full(20, 2), np.full(20, 1)], 2)
    other, _ = encode(E, relabeled)
    assert conditional_edge_estimate(other, 25, 1) == pytest.approx(19 / 20)


def test_edge_estimate_bounds():
    embedding = Embedding(np.zeros((2, 2)))
    with pytest.raises(GraphDomainError):
        conditional_edge_estimate(embedding, 2, 1)
    with pytest.raises(GraphDomainError):
        conditional_edge_estimate(embedding, 0, 0)


def test_unknown_vertices_still_embedded():
    E = EdgeList.from_edges(3, [(0, 1), (1, 2)])
    embedding, _ = encode(E, LabelVector([1, 0, 2], 2))
    np.testing.assert_array_equal(embedding.Z, [[0, 0], [1, 1], [0, 0]])


def test_write_embedding_csv(tmp_path):
    E = EdgeList.from_edges(2, [(0, 1, 1.0)])
    embedding, _ = encode(E, LabelVector([1, 2], 2))
    path = write_embedding(embedding, str(tmp_path / "z.csv"))
    assert (tmp_path / "z.csv").read_text().splitlines() == ["vertex,z1,z2", "0,0,1", "1,1,0"]
    assert path.endswith("z.csv")


@pytest.mark.slow
def test_class_means_recover_block_rows():
    spec = SbmSpec(np.array([[0.13, 0.10], [0.10, 0.13]]))
    gaps = []
    for seed in range(20):
        E, Y = sample_sbm(spec, 2000, seed)
        embedding, _ = encode(E, Y)
        for y in (1, 2):
            mean = embedding.Z[Y.labels == y].mean(axis=0)
            gaps.append(np.max(np.abs(mean - spec.B[y - 1])))
    assert max(gaps) < 0.01


@pytest.mark.slow
def test_edge_estimates_within_three_standard_errors():
    spec = SbmSpec(np.array([[0.13, 0.10], [0.10, 0.13]]))
    E, Y = sample_sbm(spec, 5000, seed=11)
    embedding, _ = encode(E, Y)
    counts = np.bincount(Y.labels, minlength=3)[1:]
    inside = np.ones(E.n, dtype=bool)
    for i in range(E.n):
        for k in (1, 2):
            p = spec.B[Y.labels[i] - 1, k - 1]
            bound = 3 * np.sqrt(p * (1 - p) / counts[k - 1])
            if abs(conditional_edge_estimate(embedding, i, k) - p) >= bound:
                inside[i] = False
    assert inside.mean() >= 0.99


@pytest.mark.slow
def test_mean_error_shrinks_with_n():
    spec = SbmSpec(np.array([[0.13, 0.10], [0.10, 0.13]]))
    errors = []
    for n in (500, 1000, 2000, 4000):
        gaps = []
        for seed in range(20):
            E, Y = sample_sbm(spec, n, seed)
            embedding, _ = encode(E, Y)
            means = np.stack([embedding.Z[Y.labels == y].mean(axis=0) for y in (1, 2)])
            gaps.append(np.max(np.abs(means - spec.B)))
        errors.append(np.mean(gaps))
    assert all(a > b for a, b in zip(errors, errors[1:]))
