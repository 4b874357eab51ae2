import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lib.core.errors import (DegenerateInputError, InfiniteDistanceError, InputError,
                             ParameterError)
from lib.core.metric import (Graph, MetricSpace, diameter_anchor, from_graph, generate,
                             load_space, validate)


def path_metric(n):
    return from_graph(generate('path', n=n))


def test_path_metric_properties():
    m = path_metric(4)
    assert m.d[0, 3] == 3.0
    assert m.diameter == 3.0
    assert m.min_nonzero == 1.0
    assert m.aspect_ratio == pytest.approx(3.0)
    assert m.path_length([0, 1, 2, 3]) == 3.0
    assert m.path_length([2]) == 0.0


def test_single_point_metric():
    m = MetricSpace([[0.0]])
    assert m.diameter == 0.0
    assert m.min_nonzero == 0.0
    assert m.aspect_ratio == 1.0
    with pytest.raises(DegenerateInputError):
        diameter_anchor(m)


def test_matrix_is_read_only():
    m = path_metric(3)
    with pytest.raises(ValueError):
        m.d[0, 1] = 5.0


def test_rejects_bad_matrices():
    with pytest.raises(InputError):
        MetricSpace([[0.0, 1.0]])
    with pytest.raises(InfiniteDistanceError):
        MetricSpace([[0.0, np.inf], [np.inf, 0.0]])


def test_validate_accepts_path():
    assert validate(path_metric(4)) == []


def test_validate_reports_triangle():
    m = MetricSpace([[0, 1, 5], [1, 0, 1], [5, 1, 0]])
    found = validate(m)
    assert len(found) == 1
    assert found[0].kind == 'triangle'
    assert found[0].where == (0, 1, 2)
    assert found[0].detail == (5.0, 2.0)


def test_validate_reports_symmetry_and_positivity():
    assert [v.kind for v in validate(MetricSpace([[0, 1], [2, 0]]))] == ['symmetry']
    kinds = [v.kind for v in validate(MetricSpace([[0, 0], [0, 0]]))]
    assert kinds == ['positivity', 'positivity']
    assert [v.kind for v in validate(MetricSpace([[1, 1], [1, 0]]))] == ['zero_diagonal']


def test_diameter_anchor_on_path():
    anchor = diameter_anchor(path_metric(4))
    assert (anchor.x, anchor.xbar, anchor.delta) == (0, 3, 3.0)


def test_graph_validation():
    with pytest.raises(InputError):
        Graph(3, [(1, 1)])
    with pytest.raises(InputError):
        Graph(3, [(0, 1), (1, 0)])
    with pytest.raises(InputError):
        Graph(3, [(0, 1, 0.0)])
    with pytest.raises(InputError):
        Graph(3, [(0, 3)])
    g = Graph(3, [(2, 1), (0, 1, 2.5)])
    assert g.edges == ((0, 1, 2.5), (1, 2, 1.0))
    assert not g.unweighted
    assert g.adjacency == ((1,), (0, 2), (1,))


def test_disconnected_graph_has_no_metric():
    with pytest.raises(InfiniteDistanceError):
        from_graph(Graph(3, [(0, 1)]))


def test_generators():
    assert len(generate('path', n=4).edges) == 3
    assert len(generate('cycle', n=5).edges) == 5
    cube = generate('hypercube', h=3)
    assert cube.n == 8 and len(cube.edges) == 12 and cube.max_degree == 3
    assert cube.diameter() == 3.0
    g = generate('random_regular', n=10, deg=3, seed=0)
    assert g.degrees() == [3] * 10 and g.is_connected()
    with pytest.raises(ParameterError):
        generate('cycle', n=2)
    with pytest.raises(ParameterError):
        generate('random_regular', n=9, deg=3)
    with pytest.raises(ParameterError):
        generate('grid', n=4)


def test_random_metric_is_seeded_metric():
    a = generate('random_metric', n=6, seed=1)
    b = generate('random_metric', n=6, seed=1)
    assert np.array_equal(a.d, b.d)
    assert validate(a) == []


def test_json_and_tsv_files(tmp_path):
    m = generate('random_metric', n=5, seed=3)
    path = str(tmp_path / 'm.json')
    m.save(path)
    assert load_space(path).same_as(m)
    g = generate('cycle', n=4)
    tsv = str(tmp_path / 'g.tsv')
    g.save(tsv)
    assert (tmp_path / 'g.tsv').read_text().startswith('# n=4\n')
    assert load_space(tsv).edges == g.edges
    assert load_space(g.to_json()).edges == g.edges
    with pytest.raises(InputError):
        Graph.from_tsv('0\t1\t1\n')


@settings(max_examples=20, deadline=None)
@given(n=st.integers(min_value=2, max_value=12), seed=st.integers(min_value=0, max_value=10_000))
def test_random_metrics_validate(n, seed):
    m = generate('random_metric', n=n, seed=seed)
    assert validate(m) == []
    anchor = diameter_anchor(m)
    assert m.d[anchor.x, anchor.xbar] == m.diameter
    assert 2 * np.count_nonzero(4 * m.d[anchor.x] < anchor.delta) <= n
