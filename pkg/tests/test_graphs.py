import numpy as np
import pytest

from core.errors import EXIT_GRAPH_SPEC, GraphSpecError
from core.graphs import (
    ExchangeKernel,
    complete_kernel,
    cycle_kernel,
    parse_edge_list,
    parse_graph_spec,
    path_kernel,
    read_edge_list,
    two_vertex_kernel,
)


def test_two_vertex_kernel():
    kernel = parse_graph_spec("two")
    assert kernel == two_vertex_kernel()
    assert kernel.total_rate == 1.0
    np.testing.assert_array_equal(kernel.rate_matrix(), [[0.0, 1.0], [1.0, 0.0]])


@pytest.mark.parametrize("spec, vertices, weight", [
    ("path:5", 5, 0.5),
    ("cycle:6", 6, 0.5),
    ("complete:4", 4, 1.0 / 3.0),
    ("  Cycle : 3 ", 3, 0.5),
])
def test_builtin_specs(spec, vertices, weight):
    kernel = parse_graph_spec(spec)
    assert kernel.num_vertices == vertices
    assert all(w == pytest.approx(weight) for _, _, w in kernel.edges)
    assert kernel.rate_matrix().sum(axis=1).max() <= 1.0 + 1e-12


def test_builders_match_specs():
    assert parse_graph_spec("path:4") == path_kernel(4)
    assert parse_graph_spec("cycle:5") == cycle_kernel(5)
    assert parse_graph_spec("complete:3") == complete_kernel(3)


def test_generator_rows_sum_to_zero():
    q = cycle_kernel(6).generator_matrix()
    np.testing.assert_allclose(q.sum(axis=1), 0.0, atol=1e-15)
    np.testing.assert_array_equal(q, q.T)


def test_edge_arrays_probabilities():
    i, j, probs = path_kernel(4).edge_arrays()
    np.testing.assert_array_equal(i, [0, 1, 2])
    np.testing.assert_array_equal(j, [1, 2, 3])
    np.testing.assert_allclose(probs, 1.0 / 3.0)


@pytest.mark.parametrize("spec", ["path:1", "cycle:2", "complete:1", "star:4", "no/such/file.txt"])
def test_bad_specs_rejected(spec):
    with pytest.raises(GraphSpecError) as excinfo:
        parse_graph_spec(spec)
    assert excinfo.value.exit_code == EXIT_GRAPH_SPEC


def test_kernel_validation():
    with pytest.raises(GraphSpecError, match="列和"):
        ExchangeKernel(3, ((0, 1, 0.6), (0, 2, 0.6)))
    with pytest.raises(GraphSpecError, match="連通"):
        ExchangeKernel(4, ((0, 1, 0.5), (2, 3, 0.5)))
    with pytest.raises(GraphSpecError):
        ExchangeKernel(2, ((1, 0, 0.5),))
    with pytest.raises(GraphSpecError):
        ExchangeKernel(3, ((0, 1, 0.5), (0, 1, 0.5), (1, 2, 0.5)))


def test_parse_edge_list_comments_and_bom():
    text = "\ufeff# 三角形\n0 1 0.5\n1 2 0.5  # 尾端註解\n\n2 0 0.5\n1 0 0.5\n"
    kernel = parse_edge_list(text)
    assert kernel.num_vertices == 3
    assert kernel.edges == ((0, 1, 0.5), (0, 2, 0.5), (1, 2, 0.5))


@pytest.mark.parametrize("text", [
    "0 1 0.5\n1 0 0.25\n",
    "0 1\n",
    "0 x 0.5\n",
    "1 1 0.5\n",
    "# 只有註解\n",
])
def test_parse_edge_list_rejects(text):
    with pytest.raises(GraphSpecError):
        parse_edge_list(text)


def test_read_edge_list_file(tmp_path):
    path = tmp_path / "graph.txt"
    path.write_text("0 1 1.0\n", encoding="utf-8")
    kernel = read_edge_list(str(path))
    assert kernel == two_vertex_kernel()
    assert parse_graph_spec(str(path)) == kernel
