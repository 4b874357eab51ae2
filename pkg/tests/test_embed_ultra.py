import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lib.core.embed_ultra import (MultiEmbedding, alpha_bound, audit_embedding, beta,
                                  build_ultrametric_embedding, non_contraction_violations,
                                  select_shell, shell_decomposition, t_for_beta)
from lib.core.errors import InputError, ParameterError
from lib.core.metric import KINDS, MetricSpace, from_graph, generate
from lib.core.ultrametric import UltraTree, validate_hst


def path_metric(n):
    return from_graph(generate('path', n=n))


def equilateral(n):
    return MetricSpace(np.ones((n, n)) - np.eye(n))


def test_beta_examples():
    b = beta(16, 15, 2)
    assert b.value == pytest.approx(2.0)
    assert b.criterion == 'size'
    assert beta(2, 1, 1) == (1.0, 'size')
    assert beta(1024, 4, 2).value == pytest.approx(math.sqrt(10))
    assert beta(2 ** 20, 4, 1) == (16.0, 'diameter')


def test_beta_rejects_bad_parameters():
    for t in (0, -1, 1.5, True):
        with pytest.raises(ParameterError):
            beta(4, 3, t)
    with pytest.raises(ParameterError):
        beta(0, 3, 1)
    with pytest.raises(ParameterError):
        beta(4, 0.5, 1)


def test_t_for_beta_picks_smallest_t():
    assert t_for_beta(16, 15, 2.0) == 2
    assert t_for_beta(1024, 4, 3.2) == 2
    assert t_for_beta(1024, 4, 10.0) == 1
    assert t_for_beta(1, 1, 1.5) == 1
    for target in (1.0, 0.5):
        with pytest.raises(ParameterError):
            t_for_beta(16, 15, target)


@pytest.mark.parametrize("kind,n,target", [("path", 32, 2.0), ("random_metric", 24, 1.5),
                                           ("hypercube", 16, 1.8)])
def test_embedding_for_target_beta_fits_size(kind, n, target):
    m = _space(kind, n, 3)
    t = t_for_beta(m.n, m.aspect_ratio, target)
    assert beta(m.n, m.aspect_ratio, t).value <= target
    if t > 1:
        assert beta(m.n, m.aspect_ratio, t - 1).value > target
    me = build_ultrametric_embedding(m, t)
    assert me.leaf_count <= m.n ** target * (1 + 1e-9)
    assert audit_embedding(me) == []


def test_shell_decomposition_on_paths():
    dec = shell_decomposition(path_metric(4), 1)
    assert dec.anchor == 0
    assert dec.sizes == [1, 1]
    assert dec.epsilons.tolist() == [0.25, 0.25]
    dec = shell_decomposition(path_metric(8), 2)
    assert dec.sizes == [1, 1, 2]
    assert dec.shell(2).tolist() == [False, True] + [False] * 6


def test_select_shell_examples():
    dec = shell_decomposition(path_metric(4), 1)
    assert select_shell(dec, 4, 3.0, 1, 'size') == 1
    dec = shell_decomposition(equilateral(8), 2)
    assert dec.sizes == [1, 1, 1]
    assert select_shell(dec, 8, 1.0, 2, 'size') == 1
    with pytest.raises(ParameterError):
        select_shell(dec, 8, 1.0, 2, 'volume')


def test_two_points():
    me = build_ultrametric_embedding(MetricSpace([[0, 5], [5, 0]]), 1)
    assert me.target.labels.tolist() == [5.0, 0.0, 0.0]
    assert me.leaf_count == 2
    assert me.target.distance(1, 2) == 5.0
    assert audit_embedding(me) == []


def test_single_point():
    me = build_ultrametric_embedding(MetricSpace([[0.0]]), 3)
    assert me.leaf_count == 1
    assert me.fibers == [[0]]


def test_path_caterpillar():
    trace = []
    me = build_ultrametric_embedding(path_metric(4), 1, trace=trace)
    tree = me.target
    assert tree.parent.tolist() == [-1, 0, 0, 2, 2, 4, 4]
    assert tree.labels.tolist() == [3, 0, 2, 0, 1, 0, 0]
    assert me.fibers == [[1], [3], [5], [6]]
    assert me.params == {'t': 1, 'beta': 2.0, 'criterion': 'size', 'fallbacks': 0}
    assert [(s.node, s.anchor, s.i_star, s.left, s.right) for s in trace] == [
        (0, 0, 1, [0], [1, 2, 3]),
        (2, 1, 1, [1], [2, 3]),
        (4, 2, 1, [2], [3]),
    ]
    assert audit_embedding(me) == []
    assert alpha_bound(me) == pytest.approx(8 * math.log2(3))


def test_equilateral_uses_diameter_branch():
    me = build_ultrametric_embedding(equilateral(32), 1)
    assert me.params['criterion'] == 'diameter'
    assert me.params['fallbacks'] == 0
    assert me.leaf_count == 32
    assert audit_embedding(me) == []


def test_path_16_t2():
    me = build_ultrametric_embedding(path_metric(16), 2)
    assert me.leaf_count <= 256
    assert audit_embedding(me) == []


def test_rejects_bad_t():
    with pytest.raises(ParameterError):
        build_ultrametric_embedding(path_metric(4), 0)


def test_injected_contraction_is_reported():
    # root label 2 is below d(0, 3) = 3
    tree = UltraTree([-1, 0, 0, 2, 2, 4, 4], [2, 0, 2, 0, 1, 0, 0], [-1, 0, -1, 1, -1, 2, 3])
    me = MultiEmbedding(path_metric(4), tree, params={'t': 1})
    found = non_contraction_violations(me)
    assert len(found) == 1
    assert found[0].where == (1, 6)
    assert found[0].detail == (2.0, 3.0)
    assert [v.kind for v in audit_embedding(me)] == ['contraction']


def test_non_surjective_target_is_rejected():
    tree = UltraTree([-1, 0, 0], [3, 0, 0], [-1, 0, 1], source_n=4)
    with pytest.raises(InputError):
        MultiEmbedding(path_metric(4), tree)


def test_embedding_file(tmp_path):
    me = build_ultrametric_embedding(generate('random_metric', n=7, seed=2), 2)
    path = str(tmp_path / 'e.json')
    me.save(path)
    data = json.loads((tmp_path / 'e.json').read_text())
    assert data['kind'] == 'ultra' and data['t'] == 2 and 'tree' in data
    back = MultiEmbedding.load(path)
    assert back.fibers == me.fibers
    assert back.params == me.params
    assert back.source.same_as(me.source)


def test_construction_is_deterministic():
    m = generate('random_metric', n=12, seed=5)
    a = build_ultrametric_embedding(m, 2).to_json()
    b = build_ultrametric_embedding(m, 2).to_json()
    assert json.dumps(a) == json.dumps(b)


def _space(kind, n, seed):
    if kind == 'random_metric':
        return generate(kind, n=n, seed=seed)
    if kind == 'random_regular':
        return from_graph(generate(kind, n=n + n % 2, deg=3, seed=seed))
    if kind == 'cycle':
        return from_graph(generate(kind, n=max(3, n)))
    if kind == 'hypercube':
        return from_graph(generate(kind, h=max(2, min(6, n.bit_length() - 1))))
    return from_graph(generate(kind, n=n))


@settings(max_examples=40, deadline=None)
@given(kind=st.sampled_from(KINDS),
       n=st.integers(min_value=4, max_value=64),
       seed=st.integers(min_value=0, max_value=9),
       t=st.integers(min_value=1, max_value=3))
def test_audit_passes_on_generated_metrics(kind, n, seed, t):
    m = _space(kind, n, seed)
    trace = []
    me = build_ultrametric_embedding(m, t, trace=trace)
    assert audit_embedding(me, t) == []
    assert validate_hst(me.target, 1) == []
    assert me.leaf_count <= m.n ** me.params['beta'] + 1e-9
    masks = me.target.subtree_masks()
    for step in trace:
        left, right = me.target.children[step.node]
        assert masks[left] == sum(1 << p for p in step.left)
        assert masks[right] == sum(1 << p for p in step.right)
