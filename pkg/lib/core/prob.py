"""Random hierarchical-partition tree embeddings and their union under a common root."""
import logging
import math
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from lib.core.embed_ultra import MultiEmbedding
from lib.core.errors import InputError
from lib.core.ultrametric import UltraTree, leaf_tree

log = logging.getLogger(__name__)

EmbeddingSample = namedtuple('EmbeddingSample', ['source', 'trees', 'seeds'])


def _partition(m, cluster, radius, order):
    """Split cluster by balls of the given radius around centers in priority order."""
    remaining = np.ones(len(cluster), dtype=bool)
    parts = []
    for center in order:
        if not remaining.any():
            break
        ball = remaining & (m.d[center, cluster] <= radius)
        if ball.any():
            parts.append(cluster[ball])
            remaining &= ~ball
    return parts


def sample_tree_embedding(m, seed):
    """Singleton-fiber ultrametric from a random permutation and radius scale.

    Radii are beta * 2**i * min_distance for i counting down from
    ceil(log2(aspect ratio)); a tree node is created only where a cluster
    actually splits, labeled with the cluster's exact diameter.
    """
    if m.n == 1:
        return leaf_tree(0, 1)
    rng = np.random.default_rng(seed)
    order = rng.permutation(m.n)
    scale = rng.uniform(0.5, 1.0)
    unit = m.min_nonzero
    top = math.ceil(math.log2(m.aspect_ratio))
    parent, labels, point = [], [], []
    stack = [(np.arange(m.n), top, -1)]
    while stack:
        cluster, level, p = stack.pop()
        uid = len(parent)
        parent.append(p)
        if len(cluster) == 1:
            labels.append(0.0)
            point.append(int(cluster[0]))
            continue
        parts = [cluster]
        while len(parts) == 1:
            parts = _partition(m, cluster, scale * 2.0 ** level * unit, order)
            level -= 1
        labels.append(float(m.d[np.ix_(cluster, cluster)].max()))
        point.append(-1)
        for part in reversed(parts):
            stack.append((part, level, uid))
    return UltraTree(parent, labels, point, k=1.0, source_n=m.n)


def single_tree_embedding(tree, m, seed=None):
    return MultiEmbedding(m, tree, kind='prob', params={'seeds': [] if seed is None else [seed]})


def sample_embeddings(m, seeds, jobs=1):
    seeds = [int(s) for s in seeds]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            trees = list(pool.map(lambda s: sample_tree_embedding(m, s), seeds))
    else:
        trees = [sample_tree_embedding(m, s) for s in seeds]
    log.info('%d Baeume fuer n=%d gezogen', len(trees), m.n)
    return EmbeddingSample(m, trees, seeds)


def union_under_root(samples):
    """Hang all sampled trees under a new root labeled max(diameter, child labels)."""
    if isinstance(samples, EmbeddingSample):
        source, trees, seeds = samples.source, list(samples.trees), list(samples.seeds)
    else:
        samples = list(samples)
        if not samples:
            raise InputError('Vereinigung braucht mindestens einen Baum')
        source = samples[0].source
        if any(not me.source.same_as(source) for me in samples):
            raise InputError('Baeume ueber verschiedenen Quellmetriken')
        trees = [me.target for me in samples]
        seeds = [s for me in samples for s in me.params.get('seeds', [])]
    if not trees:
        raise InputError('Vereinigung braucht mindestens einen Baum')
    for tree in trees:
        if tree.source_n != source.n or tree.leaf_count != source.n:
            raise InputError('Baum passt nicht zur Quellmetrik (n=%d)' % source.n)
    root_label = max([source.diameter] + [float(tree.labels[0]) for tree in trees])
    parent, labels, point = [-1], [root_label], [-1]
    for tree in trees:
        offset = len(parent)
        shifted = np.where(tree.parent < 0, -offset, tree.parent) + offset
        parent.extend(shifted.tolist())
        labels.extend(tree.labels.tolist())
        point.extend(tree.point.tolist())
    union = UltraTree(parent, labels, point, k=1.0, source_n=source.n)
    log.info('Vereinigung: %d Baeume, %d Blaetter', len(trees), union.leaf_count)
    return MultiEmbedding(source, union, kind='prob', params={'seeds': seeds})


def pairwise_stretch(me):
    """Min/mean/max of target over source distance across all point pairs (singleton fibers)."""
    n = me.source.n
    if n < 2:
        return {'min': 1.0, 'mean': 1.0, 'max': 1.0}
    leaf = np.asarray([fiber[0] for fiber in me.fibers], dtype=np.int64)
    a, b = np.triu_indices(n, 1)
    ratio = me.target.distances(leaf[a], leaf[b]) / me.source.d[a, b]
    return {'min': float(ratio.min()), 'mean': float(ratio.mean()), 'max': float(ratio.max())}
