"""Star-of-walks multi-embedding of unweighted bounded-degree graphs into tree metrics."""
import logging
import math
from collections import namedtuple

import numpy as np

from lib.core.embed_ultra import MultiEmbedding
from lib.core.errors import (BudgetError, ConsistencyError, InfiniteDistanceError, InputError,
                             ParameterError, UnknownLeafError, Violation)
from lib.core.metric import from_graph, generate

log = logging.getLogger(__name__)

TOLERANCE = 1e-9
NODE_BUDGET = 10_000_000

StarRepPath = namedtuple('StarRepPath', ['leaves', 'length', 'chunks', 'hop_bound', 'ratio_bound'])


class StarTree:
    """Root joined by weight delta/2 edges to the heads of unit-edge paths.

    Node 0 is the root; node offsets[i] + a is position a on path i.
    """

    def __init__(self, paths, delta, s, source_n=None):
        self.paths = tuple(tuple(int(x) for x in path) for path in paths)
        if not self.paths or any(len(path) == 0 for path in self.paths):
            raise InputError('Stern braucht mindestens einen nicht leeren Pfad')
        self.delta = float(delta)
        self.s = int(s)
        lengths = np.asarray([len(path) for path in self.paths], dtype=np.int64)
        self.offsets = np.concatenate(([1], 1 + np.cumsum(lengths)[:-1]))
        self.node_path = np.concatenate(([-1], np.repeat(np.arange(len(self.paths)), lengths)))
        self.node_depth = np.concatenate(([0], np.concatenate([np.arange(k) for k in lengths])))
        self.point = np.concatenate(([-1], np.concatenate([np.asarray(p) for p in self.paths])))
        self.point = self.point.astype(np.int64)
        self.leaves = np.arange(1, len(self.point))
        self.source_n = int(source_n) if source_n is not None else int(self.point.max()) + 1

    @classmethod
    def from_paths(cls, paths, delta, s, source_n=None):
        return cls(paths, delta, s, source_n)

    @property
    def size(self):
        return len(self.point)

    @property
    def leaf_count(self):
        return len(self.leaves)

    def fibers(self):
        result = [[] for _ in range(self.source_n)]
        for node in self.leaves:
            p = self.point[node]
            if p < self.source_n:
                result[p].append(int(node))
        return result

    def path_nodes(self, i):
        return np.arange(self.offsets[i], self.offsets[i] + len(self.paths[i]))

    def _check_nodes(self, ids):
        ids = np.asarray(ids, dtype=np.int64)
        if np.any((ids < 0) | (ids >= self.size)):
            raise UnknownLeafError('Unbekannte Sternknoten: %s' % ids[(ids < 0) | (ids >= self.size)][:5])
        return ids

    def distances(self, a, b):
        """Vectorized node distances; the root is allowed as an endpoint."""
        a = self._check_nodes(np.atleast_1d(a))
        b = self._check_nodes(np.atleast_1d(b))
        da, db = self.node_depth[a], self.node_depth[b]
        pa, pb = self.node_path[a], self.node_path[b]
        half = self.delta / 2
        up_a = np.where(pa < 0, 0.0, half + da)
        up_b = np.where(pb < 0, 0.0, half + db)
        through_root = up_a + up_b
        along = np.abs(da - db).astype(np.float64)
        return np.where(a == b, 0.0, np.where((pa == pb) & (pa >= 0), along, through_root))

    def distance(self, a, b):
        return float(self.distances([a], [b])[0])

    def to_json(self):
        return {'delta': self.delta, 's': self.s, 'paths': [list(p) for p in self.paths]}

    @classmethod
    def from_json(cls, data, source_n=None):
        return cls(data['paths'], data['delta'], data['s'], source_n)


def walk_count(g, s):
    """Number of walks with exactly s edges, by repeated adjacency products."""
    counts = [1] * g.n
    for _ in range(s):
        counts = [sum(counts[u] for u in g.adjacency[v]) for v in range(g.n)]
    return sum(counts)


def enumerate_walks(g, s):
    """All s-edge walks in lexicographic order as an array of shape (count, s + 1)."""
    width = max(1, g.max_degree)
    nbr = np.full((g.n, width), -1, dtype=np.int64)
    for v, adj in enumerate(g.adjacency):
        nbr[v, :len(adj)] = adj
    walks = np.arange(g.n, dtype=np.int64)[:, None]
    for _ in range(s):
        ext = nbr[walks[:, -1]].ravel()
        walks = np.repeat(walks, width, axis=0)
        keep = ext >= 0
        walks = np.hstack([walks[keep], ext[keep][:, None]])
    return walks


def build_path_star(g, s, budget=NODE_BUDGET):
    """Hang every s-edge walk of g from a common root (edge weight delta/2)."""
    if not g.unweighted:
        raise InputError('build_path_star braucht einen ungewichteten Graphen')
    if isinstance(s, bool) or int(s) != s or s < 1:
        raise ParameterError('s muss eine ganze Zahl >= 1 sein, erhalten %r' % (s,))
    s = int(s)
    if not g.is_connected():
        raise InfiniteDistanceError('Graph ist nicht zusammenhaengend')
    source = from_graph(g)
    degree = g.max_degree
    params = {'s': s, 'delta': source.diameter, 'max_degree': degree,
              'path_count_bound': g.n * degree ** s,
              'node_bound': 1 + g.n * (s + 1) * degree ** s}
    if g.n == 1:
        star = StarTree([(0,)], 0.0, s, source_n=1)
        params['walks'] = 1
        return MultiEmbedding(source, star, kind='star', params=params, graph=g)
    count = walk_count(g, s)
    nodes = 1 + count * (s + 1)
    if nodes > budget:
        raise BudgetError('Stern mit s=%d haette %d Knoten, Budget %d' % (s, nodes, budget))
    walks = enumerate_walks(g, s)
    if len(walks) != count:
        raise ConsistencyError('Walk-Anzahl %d statt %d' % (len(walks), count))
    star = StarTree(walks.tolist(), source.diameter, s, source_n=g.n)
    params['walks'] = count
    log.info('Stern gebaut: n=%d, s=%d, %d Pfade, %d Knoten (Schranke %d)',
             g.n, s, count, star.size, params['node_bound'])
    return MultiEmbedding(source, star, kind='star', params=params, graph=g)


def _first_walk_with_prefix(star, walks, chunk):
    hits = np.flatnonzero(np.all(walks[:, :len(chunk)] == chunk, axis=1))
    if not hits.size:
        raise ConsistencyError('Kein Walk mit Praefix %s' % chunk.tolist())
    return int(hits[0])


def realize_in_star(me, p, tol=TOLERANCE):
    """Cut a walk into ceil(l/s) chunks, each realized on the smallest matching star path."""
    if me.kind != 'star':
        raise InputError('realize_in_star braucht eine Stern-Einbettung, erhalten %r' % me.kind)
    star = me.target
    seq = np.asarray(p, dtype=np.int64).ravel()
    if seq.size == 0 or seq.min() < 0 or seq.max() >= me.source.n:
        raise InputError('Pfad leer oder mit Punkten ausserhalb von 0..%d' % (me.source.n - 1))
    if me.source.n == 1:
        leaves = np.full(seq.size, star.leaves[0], dtype=np.int64)
        return StarRepPath(leaves, 0.0, 1, 0.0, None)
    graph = me.graph
    for u, v in zip(seq[:-1], seq[1:]):
        if graph is None or not graph.has_edge(int(u), int(v)):
            raise InputError('Kein Walk: (%d, %d) ist keine Kante' % (u, v))
    length = seq.size - 1
    s = star.s
    if length == 0:
        node = me.fibers[seq[0]][0]
        return StarRepPath(np.asarray([node], dtype=np.int64), 0.0, 1, 0.0, None)
    walks = np.asarray(star.paths, dtype=np.int64)
    chunks = math.ceil(length / s)
    leaves = np.empty(seq.size, dtype=np.int64)
    for c in range(chunks):
        lo = c * s
        hi = length if c == chunks - 1 else (c + 1) * s - 1
        part = seq[lo:hi + 1]
        path = _first_walk_with_prefix(star, walks, part)
        leaves[lo:hi + 1] = star.offsets[path] + np.arange(len(part))
    realized = float(star.distances(leaves[:-1], leaves[1:]).sum())
    hop_bound = 2 * length + (chunks - 1) * star.delta
    ratio_bound = (2 + star.delta / s) * length if length >= s else None
    if realized > hop_bound * (1 + tol) or (ratio_bound is not None
                                            and realized > ratio_bound * (1 + tol)):
        log.warning('Stern-Realisierung %.6g ueber der Schranke (%.6g / %s)',
                    realized, hop_bound, ratio_bound)
    return StarRepPath(leaves, realized, chunks, hop_bound, ratio_bound)


def audit_star(me, limit=2000, samples=200_000, seed=0, tol=TOLERANCE):
    """Structure, size and non-contraction checks (exhaustive up to limit nodes)."""
    star = me.target
    report = []
    for i, path in enumerate(star.paths):
        if len(path) > star.s + 1:
            report.append(Violation('path_length', (i,), len(path)))
        if me.graph is not None:
            for u, v in zip(path[:-1], path[1:]):
                if not me.graph.has_edge(u, v):
                    report.append(Violation('walk', (i, u, v), None))
    for x, fiber in enumerate(me.fibers):
        if not fiber:
            report.append(Violation('surjective', (x,), None))
    bound = me.params.get('node_bound')
    if bound is not None and star.size > bound:
        report.append(Violation('size', (star.size,), bound))
    nodes = star.leaves
    if len(nodes) <= limit:
        a, b = np.triu_indices(len(nodes), 1)
        a, b = nodes[a], nodes[b]
    else:
        rng = np.random.default_rng(seed)
        a = rng.choice(nodes, samples)
        b = rng.choice(nodes, samples)
    tree = star.distances(a, b)
    src = me.source.d[star.point[a], star.point[b]]
    for i in np.flatnonzero(tree < src * (1 - tol))[:1000]:
        report.append(Violation('contraction', (int(a[i]), int(b[i])), (float(tree[i]), float(src[i]))))
    if report:
        log.warning('Stern-Audit: %d Verletzungen', len(report))
    return report


def hypercube_star(h, budget=NODE_BUDGET):
    """Star of the h-cube with s = ceil(h / log2 h), with ideal and actual sizes."""
    g = generate('hypercube', h=h)
    s = math.ceil(h / math.log2(h)) if h > 1 else 1
    me = build_path_star(g, s, budget)
    info = {'h': h, 's': s, 'n': g.n, 'ideal_size': g.n ** 2, 'walks': me.params['walks'],
            'nodes': me.target.size, 'distortion_bound': 2 + me.params['delta'] / s}
    return me, info


def expander_star(n, deg=3, seed=0, budget=NODE_BUDGET):
    """Star of a random regular graph with s equal to its measured diameter."""
    g = generate('random_regular', n=n, deg=deg, seed=seed)
    diameter = int(round(from_graph(g).diameter))
    me = build_path_star(g, max(1, diameter), budget)
    info = {'n': n, 'deg': deg, 'seed': seed, 's': max(1, diameter), 'diameter': diameter,
            'walks': me.params['walks'], 'nodes': me.target.size,
            'distortion_bound': 2 + me.params['delta'] / max(1, diameter)}
    return me, info
