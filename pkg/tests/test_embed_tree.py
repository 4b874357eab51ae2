import numpy as np
import pytest

from lib.core.embed_tree import (StarTree, audit_star, build_path_star, enumerate_walks,
                                 expander_star, hypercube_star, realize_in_star, walk_count)
from lib.core.embed_ultra import MultiEmbedding, alpha_bound
from lib.core.errors import (BudgetError, InfiniteDistanceError, InputError, ParameterError,
                             UnknownLeafError)
from lib.core.metric import Graph, generate
from lib.core.realize import PathSampler, optimal_rep_path


def test_single_edge_star():
    me = build_path_star(generate('path', n=2), 1)
    star = me.target
    assert star.paths == ((0, 1), (1, 0))
    assert star.size == 5
    assert me.params['walks'] == 2
    assert me.fibers == [[1, 4], [2, 3]]
    assert star.distance(1, 2) == 1.0
    assert star.distance(2, 4) == 3.0
    assert star.distance(0, 1) == 0.5
    assert star.distance(1, 3) == 1.0
    assert audit_star(me) == []


def test_star_node_ids_are_checked():
    star = StarTree.from_paths([[0, 1]], 1.0, 1)
    with pytest.raises(UnknownLeafError):
        star.distances([0], [7])
    with pytest.raises(InputError):
        StarTree([], 1.0, 1)


def test_walk_counts():
    cube = generate('hypercube', h=3)
    assert walk_count(cube, 1) == 24
    assert len(enumerate_walks(cube, 2)) == walk_count(cube, 2) == 72
    walks = enumerate_walks(generate('path', n=3), 2)
    assert walks.tolist() == [[0, 1, 0], [0, 1, 2], [1, 0, 1], [1, 2, 1], [2, 1, 0], [2, 1, 2]]
    me = build_path_star(cube, 1)
    assert me.params['walks'] == 24


def test_hypercube_h4_s2():
    me = build_path_star(generate('hypercube', h=4), 2)
    assert me.params['path_count_bound'] == 256
    assert me.params['walks'] <= 256
    assert me.target.size <= me.params['node_bound']
    assert alpha_bound(me) == pytest.approx(4.0)


def test_preconditions():
    with pytest.raises(InputError):
        build_path_star(Graph(2, [(0, 1, 2.0)]), 1)
    with pytest.raises(ParameterError):
        build_path_star(generate('path', n=3), 0)
    with pytest.raises(InfiniteDistanceError):
        build_path_star(Graph(3, [(0, 1)]), 1)
    with pytest.raises(BudgetError):
        build_path_star(generate('hypercube', h=4), 6, budget=1000)


def test_realize_chunks_in_cube():
    me = build_path_star(generate('hypercube', h=4), 2)
    rep = realize_in_star(me, [0, 1, 3, 7, 15])
    assert rep.chunks == 2
    assert rep.hop_bound == 12.0
    assert rep.ratio_bound == 16.0
    assert rep.length == 8.0
    assert me.f(rep.leaves).tolist() == [0, 1, 3, 7, 15]
    assert optimal_rep_path(me, [0, 1, 3, 7, 15]).length <= rep.length


def test_realize_short_and_trivial_walks():
    me = build_path_star(generate('hypercube', h=4), 2)
    rep = realize_in_star(me, [0, 1, 3])
    assert rep.chunks == 1 and rep.length == 2.0
    single = realize_in_star(me, [5])
    assert single.length == 0.0 and me.f(single.leaves).tolist() == [5]
    with pytest.raises(InputError):
        realize_in_star(me, [0, 3])


def test_hypercube_instantiation():
    me, info = hypercube_star(3)
    assert info['s'] == 2
    assert info['ideal_size'] == 64
    assert info['walks'] == 72
    assert info['nodes'] == 1 + 72 * 3
    assert audit_star(me) == []


@pytest.mark.parametrize("n,seed", [(16, 0), (16, 1), (16, 2), (32, 0), (32, 1)])
def test_expander_walks_within_three(n, seed):
    me, info = expander_star(n, 3, seed=seed)
    assert info['distortion_bound'] == pytest.approx(3.0)
    s = info['s']
    sampler = PathSampler('walk', length=2 * s)
    for trial in range(10):
        seq = sampler.sample(me.source, np.random.default_rng([seed, trial]), me.graph)
        rep = realize_in_star(me, seq)
        ell = me.source.path_length(seq)
        assert rep.length <= 3 * ell + 1e-9
    if n == 16:
        assert audit_star(me, samples=20_000) == []


@pytest.mark.parametrize("h", [3, 4, 5])
def test_hypercube_walks_within_star_bound(h):
    me, info = hypercube_star(h)
    bound = alpha_bound(me)
    assert bound == pytest.approx(info['distortion_bound'])
    sampler = PathSampler('walk', length=3 * info['s'] + 1)
    for trial in range(20):
        seq = sampler.sample(me.source, np.random.default_rng([h, trial]), me.graph)
        rep = realize_in_star(me, seq)
        ell = me.source.path_length(seq)
        assert me.f(rep.leaves).tolist() == list(seq)
        assert rep.length <= rep.hop_bound + 1e-9
        assert rep.length <= bound * ell + 1e-9


def test_star_embedding_file(tmp_path):
    me = build_path_star(generate('cycle', n=5), 2)
    path = str(tmp_path / 'star.json')
    me.save(path)
    back = MultiEmbedding.load(path)
    assert back.kind == 'star'
    assert back.target.paths == me.target.paths
    assert back.graph.edges == me.graph.edges
    assert back.fibers == me.fibers
