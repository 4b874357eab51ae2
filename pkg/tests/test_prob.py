import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lib.core.embed_ultra import audit_embedding, non_contraction_violations
from lib.core.errors import InputError
from lib.core.metric import from_graph, generate
from lib.core.prob import (pairwise_stretch, sample_embeddings, sample_tree_embedding,
                           single_tree_embedding, union_under_root)
from lib.core.realize import optimal_rep_path
from lib.core.ultrametric import validate_hst


def test_sampled_tree_has_singleton_fibers():
    m = generate('random_metric', n=9, seed=1)
    tree = sample_tree_embedding(m, 7)
    assert tree.leaf_count == 9
    assert all(len(f) == 1 for f in tree.fibers())
    assert validate_hst(tree, 1) == []
    assert tree.labels[0] == pytest.approx(m.diameter)


def test_sampling_is_seeded():
    m = from_graph(generate('cycle', n=10))
    a = sample_tree_embedding(m, 3)
    b = sample_tree_embedding(m, 3)
    assert a.parent.tolist() == b.parent.tolist()
    assert a.labels.tolist() == b.labels.tolist()
    assert a.point.tolist() == b.point.tolist()


def test_parallel_sampling_matches_serial():
    m = generate('random_metric', n=8, seed=2)
    serial = sample_embeddings(m, [0, 1, 2, 3])
    parallel = sample_embeddings(m, [0, 1, 2, 3], jobs=3)
    for x, y in zip(serial.trees, parallel.trees):
        assert x.parent.tolist() == y.parent.tolist()
        assert x.labels.tolist() == y.labels.tolist()


def test_union_shape():
    m = generate('random_metric', n=6, seed=0)
    union = union_under_root(sample_embeddings(m, range(5)))
    assert union.kind == 'prob'
    assert union.leaf_count == 5 * 6
    assert all(len(f) == 5 for f in union.fibers)
    assert union.target.labels[0] == pytest.approx(m.diameter)
    assert union.params['seeds'] == [0, 1, 2, 3, 4]
    assert audit_embedding(union) == []


def test_union_of_single_embeddings():
    m = from_graph(generate('path', n=5))
    singles = [single_tree_embedding(sample_tree_embedding(m, s), m, s) for s in (4, 9)]
    union = union_under_root(singles)
    assert union.params['seeds'] == [4, 9]
    assert union.leaf_count == 10


def test_union_rejects_mixed_sources():
    a = from_graph(generate('path', n=4))
    b = from_graph(generate('cycle', n=4))
    singles = [single_tree_embedding(sample_tree_embedding(a, 0), a),
               single_tree_embedding(sample_tree_embedding(b, 0), b)]
    with pytest.raises(InputError):
        union_under_root(singles)
    with pytest.raises(InputError):
        union_under_root([])


def test_single_point_union():
    m = generate('random_metric', n=1, seed=0)
    union = union_under_root(sample_embeddings(m, [0, 1]))
    assert union.leaf_count == 2
    assert union.target.labels[0] == 0.0


def test_union_beats_every_single_tree():
    m = generate('random_metric', n=7, seed=11)
    sample = sample_embeddings(m, range(4))
    union = union_under_root(sample)
    rng = np.random.default_rng(0)
    for _ in range(5):
        p = rng.integers(7, size=8)
        best_single = min(optimal_rep_path(single_tree_embedding(tree, m), p).length
                          for tree in sample.trees)
        assert optimal_rep_path(union, p).length <= best_single + 1e-9
        assert optimal_rep_path(union, p).length >= m.path_length(p) - 1e-9


def test_stretch_on_path():
    m = from_graph(generate('path', n=8))
    stretch = pairwise_stretch(single_tree_embedding(sample_tree_embedding(m, 5), m))
    assert stretch['min'] >= 1.0
    assert stretch['min'] <= stretch['mean'] <= stretch['max']
    one = generate('random_metric', n=1, seed=0)
    assert pairwise_stretch(single_tree_embedding(sample_tree_embedding(one, 0), one))['max'] == 1.0


@settings(max_examples=20, deadline=None)
@given(n=st.integers(min_value=2, max_value=16), seed=st.integers(min_value=0, max_value=1000))
def test_sampled_trees_never_contract(n, seed):
    m = generate('random_metric', n=n, seed=seed)
    me = single_tree_embedding(sample_tree_embedding(m, seed), m, seed)
    assert non_contraction_violations(me) == []
    assert pairwise_stretch(me)['min'] >= 1.0 - 1e-9
