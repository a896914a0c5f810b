import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graph_encoder.errors import GraphDomainError, GraphParseError, LabelConfigError
from graph_encoder.encoder_app.services.graph_service import (
    EdgeList, LabelVector, align_labels, chunked_bincount, compute_degrees, laplacian_reweight,
    load_edgelist, load_labels, to_dense, validate_labels, write_edgelist, write_labels,
)
from conftest import write_lines


@st.composite
def weighted_graphs(draw, max_n=15):
    n = draw(st.integers(1, max_n))
    edges = draw(st.lists(
        st.tuples(st.integers(0, n - 1), st.integers(0, n - 1), st.floats(0.1, 5.0)),
        max_size=40,
    ))
    return EdgeList.from_edges(n, edges)


def test_load_edgelist_defaults_missing_weight(tmp_path):
    path = write_lines(tmp_path / "g.txt", ["0 1", "1 2"])
    E = load_edgelist(path)
    assert E.n == 3
    assert E.edges() == [(0, 1, 1.0), (1, 2, 1.0)]
    assert not E.directed


def test_load_edgelist_one_based_shift(tmp_path):
    path = write_lines(tmp_path / "g.txt", ["1 2 0.5"])
    E = load_edgelist(path, one_based=True)
    assert E.n == 2
    assert E.edges() == [(0, 1, 0.5)]


def test_load_edgelist_skips_comments(tmp_path):
    path = write_lines(tmp_path / "g.txt", ["# u v w", "0 3 2.0", "# trailing"])
    E = load_edgelist(path)
    assert E.n == 4
    assert E.edges() == [(0, 3, 2.0)]


def test_load_edgelist_reports_bad_line_number(tmp_path):
    path = write_lines(tmp_path / "g.txt", ["0 1", "foo bar", "1 2"])
    with pytest.raises(GraphParseError) as info:
        load_edgelist(path)
    assert info.value.line_number == 2
    assert "g.txt:2" in str(info.value)


def test_load_edgelist_rejects_extra_fields(tmp_path):
    path = write_lines(tmp_path / "g.txt", ["0 1", "0 1 1 1"])
    with pytest.raises(GraphParseError) as info:
        load_edgelist(path)
    assert info.value.line_number == 2


def test_load_edgelist_negative_id_after_shift(tmp_path):
    path = write_lines(tmp_path / "g.txt", ["0 1"])
    with pytest.raises(GraphDomainError):
        load_edgelist(path, one_based=True)


def test_load_edgelist_missing_file(tmp_path):
    missing = str(tmp_path / "nope.txt")
    with pytest.raises(FileNotFoundError, match="nope.txt"):
        load_edgelist(missing)


def test_load_edgelist_empty_file(tmp_path):
    path = write_lines(tmp_path / "g.txt", [])
    E = load_edgelist(path)
    assert E.n == 0 and E.s == 0


def test_edgelist_is_read_only():
    E = EdgeList.from_edges(3, [(0, 1), (1, 2)])
    with pytest.raises(ValueError):
        E.src[0] = 2
    with pytest.raises(ValueError):
        E.weight[0] = 3.0


def test_edgelist_rejects_out_of_range_ids():
    with pytest.raises(GraphDomainError):
        EdgeList.from_edges(2, [(0, 2)])


def test_mean_degree():
    assert EdgeList.from_edges(4, [(0, 1), (2, 3)]).mean_degree() == 1.0
    assert EdgeList.from_edges(4, [(0, 1), (2, 3)], directed=True).mean_degree() == 0.5


def test_degrees_single_edge():
    E = EdgeList.from_edges(2, [(0, 1, 1.0)])
    np.testing.assert_array_equal(compute_degrees(E), [1.0, 1.0])


def test_degrees_path():
    E = EdgeList.from_edges(3, [(0, 1), (1, 2)])
    np.testing.assert_array_equal(compute_degrees(E), [1.0, 2.0, 1.0])


def test_degrees_count_self_loop_once():
    E = EdgeList.from_edges(2, [(0, 0, 2.0), (0, 1, 1.0)])
    np.testing.assert_array_equal(compute_degrees(E), [3.0, 1.0])


@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_degrees_follow_vertex_relabeling(data):
    E = data.draw(weighted_graphs())
    perm = np.array(data.draw(st.permutations(range(E.n))))
    relabeled = EdgeList(E.n, perm[E.src], perm[E.dst], E.weight)
    degrees = compute_degrees(E)
    np.testing.assert_allclose(compute_degrees(relabeled)[perm], degrees)


@settings(max_examples=60, deadline=None)
@given(E=weighted_graphs())
def test_degrees_match_dense_row_sums(E):
    np.testing.assert_allclose(compute_degrees(E), to_dense(E).sum(axis=1))


def test_laplacian_single_edge_unchanged():
    E = EdgeList.from_edges(2, [(0, 1, 1.0)])
    assert laplacian_reweight(E).edges() == [(0, 1, 1.0)]


def test_laplacian_path_weights():
    E = EdgeList.from_edges(3, [(0, 1), (1, 2)])
    np.testing.assert_allclose(laplacian_reweight(E).weight, [1 / np.sqrt(2), 1 / np.sqrt(2)])


def test_chunked_bincount_threads_agree():
    rng = np.random.default_rng(7)
    index = rng.integers(0, 1000, size=300_000)
    weights = rng.random(300_000)
    sequential = chunked_bincount(index, weights, 1000, threads=1)
    parallel = chunked_bincount(index, weights, 1000, threads=4)
    np.testing.assert_allclose(parallel, sequential, rtol=1e-12)


def test_validate_labels_counts():
    np.testing.assert_array_equal(validate_labels(LabelVector([1, 1, 2], 2)), [2, 1])
    np.testing.assert_array_equal(validate_labels(LabelVector([0, 0, 1], 1)), [1])


def test_validate_labels_empty_class():
    with pytest.raises(LabelConfigError):
        validate_labels(LabelVector([1, 1], 2))


def test_validate_labels_out_of_range():
    with pytest.raises(GraphDomainError):
        validate_labels(LabelVector([1, 3], 2))


def test_label_vector_needs_a_class():
    with pytest.raises(LabelConfigError):
        LabelVector([0, 0], 0)


def test_label_vector_masked_copy():
    Y = LabelVector([1, 2, 1, 2], 2)
    masked = Y.masked([0, 3])
    np.testing.assert_array_equal(masked.labels, [0, 2, 1, 0])
    np.testing.assert_array_equal(Y.labels, [1, 2, 1, 2])


def test_load_labels_pads_and_normalizes(tmp_path):
    path = write_lines(tmp_path / "y.txt", ["1", "-1", "2"])
    Y = load_labels(path, n=5)
    np.testing.assert_array_equal(Y.labels, [1, 0, 2, 0, 0])
    assert Y.K == 2


def test_load_labels_longer_than_graph(tmp_path):
    path = write_lines(tmp_path / "y.txt", ["1", "2", "1"])
    with pytest.raises(GraphDomainError):
        load_labels(path, n=2)


def test_load_labels_bad_line(tmp_path):
    path = write_lines(tmp_path / "y.txt", ["1", "x"])
    with pytest.raises(GraphParseError) as info:
        load_labels(path)
    assert info.value.line_number == 2


def test_writers_produce_loadable_files(tmp_path):
    E = EdgeList.from_edges(4, [(0, 1, 0.1), (2, 3, 2.0)])
    edges_path = write_edgelist(E, str(tmp_path / "out.edges"))
    labels_path = write_labels(LabelVector([1, 1, 2, 2], 2), str(tmp_path / "out.labels"))
    loaded = load_edgelist(edges_path)
    assert loaded.edges() == E.edges()
    np.testing.assert_array_equal(load_labels(labels_path).labels, [1, 1, 2, 2])


def test_large_file_round_trip(tmp_path):
    rng = np.random.default_rng(17)
    s = 10_000
    u = rng.integers(0, 3000, size=s)
    v = rng.integers(0, 3000, size=s)
    u[0], v[0] = 2999, 2999
    weights = [f"{w:.6f}" for w in rng.uniform(0.001, 999.0, size=s)]
    source = write_lines(tmp_path / "big.edges", [f"{a} {b} {w}" for a, b, w in zip(u, v, weights)])

    first = load_edgelist(source)
    assert first.n == 3000 and first.s == s
    np.testing.assert_array_equal(first.weight, [float(w) for w in weights])
    second = load_edgelist(write_edgelist(first, str(tmp_path / "again.edges")))
    assert second.edges() == first.edges()


def test_align_labels_adds_trailing_isolated_vertices():
    E = EdgeList.from_edges(3, [(0, 1), (1, 2)])
    E2, Y2 = align_labels(E, LabelVector([1, 1, 2, 2, 1], 2))
    assert E2.n == 5 and E2.edges() == E.edges()
    assert Y2.n == 5


def test_align_labels_pads_short_label_file():
    E = EdgeList.from_edges(4, [(0, 3)])
    E2, Y2 = align_labels(E, LabelVector([1, 2], 2))
    assert E2 is E
    np.testing.assert_array_equal(Y2.labels, [1, 2, 0, 0])


def test_edgelist_cannot_shrink():
    with pytest.raises(GraphDomainError):
        EdgeList.from_edges(4, [(0, 3)]).with_vertex_count(3)


def test_to_dense_symmetric_with_loops():
    A = to_dense(EdgeList.from_edges(3, [(0, 1, 2.0), (2, 2, 1.0), (0, 1, 1.0)]))
    np.testing.assert_array_equal(A, [[0, 3, 0], [3, 0, 0], [0, 0, 1]])
