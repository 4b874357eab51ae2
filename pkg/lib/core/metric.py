"""Finite metric spaces, graphs, benchmark generators and validation."""
import json
import logging
from collections import namedtuple

import networkx as nx
import numpy as np

from lib.core.errors import (ConsistencyError, DegenerateInputError, GenerationError,
                             InfiniteDistanceError, InputError, ParameterError, Violation)

log = logging.getLogger(__name__)

TOLERANCE = 1e-9
MAX_LISTED = 1000
KINDS = ('path', 'cycle', 'hypercube', 'random_regular', 'random_metric')

DiameterAnchor = namedtuple('DiameterAnchor', ['x', 'xbar', 'delta'])


class MetricSpace:
    """Finite point set with a dense, read-only distance matrix."""

    def __init__(self, d, labels=None):
        d = np.array(d, dtype=np.float64)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] < 1:
            raise InputError('Distanzmatrix muss quadratisch und nicht leer sein')
        if not np.all(np.isfinite(d)):
            raise InfiniteDistanceError('Distanzmatrix enthaelt unendliche Werte')
        d.setflags(write=False)
        self.d = d
        self.n = d.shape[0]
        if labels is not None:
            labels = tuple(str(x) for x in labels)
            if len(labels) != self.n:
                raise InputError('Anzahl der Labels passt nicht zu n=%d' % self.n)
        self.labels = labels

    @property
    def diameter(self):
        return float(self.d.max())

    @property
    def min_nonzero(self):
        positive = self.d[self.d > 0]
        return float(positive.min()) if positive.size else 0.0

    @property
    def aspect_ratio(self):
        """Diameter over minimum nonzero distance; 1 for a single point."""
        m = self.min_nonzero
        return self.diameter / m if m > 0 else 1.0

    def check_point(self, x):
        if not 0 <= int(x) < self.n:
            raise InputError('Punkt %s ausserhalb von 0..%d' % (x, self.n - 1))
        return int(x)

    def path_length(self, seq):
        seq = np.asarray(seq, dtype=np.int64)
        if seq.size < 2:
            return 0.0
        return float(self.d[seq[:-1], seq[1:]].sum())

    def same_as(self, other):
        return other is self or (isinstance(other, MetricSpace) and other.n == self.n
                                 and np.array_equal(other.d, self.d))

    def to_json(self):
        data = {'n': self.n, 'd': [float(x) for x in self.d.ravel()]}
        if self.labels:
            data['labels'] = list(self.labels)
        return data

    @classmethod
    def from_json(cls, data):
        n = int(data['n'])
        flat = data['d']
        if len(flat) != n * n:
            raise InputError('Metrik-JSON: %d Werte statt n*n=%d' % (len(flat), n * n))
        return cls(np.array(flat, dtype=np.float64).reshape(n, n), data.get('labels'))

    def save(self, path):
        with open(path, 'w') as f:
            json.dump(self.to_json(), f)

    @classmethod
    def load(cls, path):
        with open(path, 'r') as f:
            return cls.from_json(json.load(f))


class Graph:
    """Undirected weighted graph on vertices 0..n-1."""

    def __init__(self, n, edges):
        self.n = int(n)
        if self.n < 1:
            raise InputError('Graph braucht mindestens einen Knoten')
        seen = {}
        for edge in edges:
            u, v = int(edge[0]), int(edge[1])
            w = float(edge[2]) if len(edge) > 2 else 1.0
            if u == v:
                raise InputError('Schleife an Knoten %d' % u)
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise InputError('Kante (%d,%d) ausserhalb von 0..%d' % (u, v, self.n - 1))
            if not w > 0:
                raise InputError('Kantengewicht muss positiv sein: (%d,%d,%r)' % (u, v, w))
            key = (min(u, v), max(u, v))
            if key in seen:
                raise InputError('Doppelte Kante %s' % (key,))
            seen[key] = w
        self.edges = tuple((u, v, w) for (u, v), w in sorted(seen.items()))
        self.unweighted = all(w == 1.0 for _, _, w in self.edges)
        adjacency = [[] for _ in range(self.n)]
        for u, v, _ in self.edges:
            adjacency[u].append(v)
            adjacency[v].append(u)
        self.adjacency = tuple(tuple(sorted(a)) for a in adjacency)

    @property
    def max_degree(self):
        return max(len(a) for a in self.adjacency)

    def degrees(self):
        return [len(a) for a in self.adjacency]

    def has_edge(self, u, v):
        return v in self.adjacency[u]

    def to_networkx(self):
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_weighted_edges_from(self.edges)
        return g

    def is_connected(self):
        return self.n == 1 or nx.is_connected(self.to_networkx())

    def diameter(self):
        return from_graph(self).diameter

    def to_json(self):
        return {'n': self.n, 'edges': [[u, v, w] for u, v, w in self.edges]}

    @classmethod
    def from_json(cls, data):
        return cls(data['n'], data['edges'])

    def to_tsv(self):
        lines = ['# n=%d' % self.n]
        for u, v, w in self.edges:
            lines.append('%d\t%d\t%s' % (u, v, _fmt_weight(w)))
        return '\n'.join(lines) + '\n'

    @classmethod
    def from_tsv(cls, text):
        n = None
        edges = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith('#'):
                body = line[1:].strip()
                if body.startswith('n='):
                    n = int(body[2:])
                continue
            parts = line.split('\t')
            if len(parts) != 3:
                raise InputError('Graph-TSV: erwartet u<TAB>v<TAB>w, erhalten %r' % line)
            edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
        if n is None:
            raise InputError('Graph-TSV: Kopfzeile "# n=<int>" fehlt')
        return cls(n, edges)

    def save(self, path):
        with open(path, 'w') as f:
            f.write(self.to_tsv())

    @classmethod
    def load(cls, path):
        with open(path, 'r') as f:
            return cls.from_tsv(f.read())


def load_space(ref):
    """Inline metric/graph JSON, or a path to a metric JSON, graph JSON or graph TSV file."""
    if isinstance(ref, str):
        if ref.endswith('.tsv'):
            return Graph.load(ref)
        with open(ref, 'r') as f:
            ref = json.load(f)
    if not isinstance(ref, dict):
        raise InputError('Raum-Referenz muss ein Objekt oder ein Dateipfad sein')
    if ref.get('type') == 'graph' or 'edges' in ref:
        return Graph.from_json(ref)
    if 'd' not in ref:
        raise InputError('Raum-JSON ohne "d" oder "edges"')
    return MetricSpace.from_json(ref)


def as_metric(space):
    return from_graph(space) if isinstance(space, Graph) else space


def _fmt_weight(w):
    return '%d' % w if float(w).is_integer() else repr(float(w))


def generate(kind, seed=0, weight_low=1.0, weight_high=10.0, retries=100, **params):
    """Build a benchmark Graph (path, cycle, hypercube, random_regular) or MetricSpace."""
    if kind == 'path':
        n = _param(params, 'n', 1)
        return Graph(n, [(i, i + 1) for i in range(n - 1)])
    if kind == 'cycle':
        n = _param(params, 'n', 3)
        return Graph(n, [(i, (i + 1) % n) for i in range(n)])
    if kind == 'hypercube':
        h = _param(params, 'h', 1)
        cube = nx.hypercube_graph(h)
        index = {node: sum(bit << b for b, bit in enumerate(node)) for node in cube.nodes}
        return Graph(2 ** h, [(index[u], index[v]) for u, v in cube.edges])
    if kind == 'random_regular':
        n = _param(params, 'n', 2)
        deg = _param(params, 'deg', 1)
        if deg >= n or (n * deg) % 2:
            raise ParameterError('random_regular: braucht deg < n und n*deg gerade (n=%d, deg=%d)'
                                 % (n, deg))
        return _random_regular(n, deg, seed, retries)
    if kind == 'random_metric':
        n = _param(params, 'n', 1)
        rng = np.random.default_rng(seed)
        w = np.triu(rng.uniform(weight_low, weight_high, size=(n, n)), 1)
        g = nx.from_numpy_array(w + w.T)
        d = np.asarray(nx.floyd_warshall_numpy(g, nodelist=range(n), weight='weight'))
        return MetricSpace(d)
    raise ParameterError('Unbekannte Familie %r, erlaubt: %s' % (kind, ', '.join(KINDS)))


def _param(params, name, minimum):
    if name not in params or params[name] is None:
        raise ParameterError('Parameter %s fehlt' % name)
    value = int(params[name])
    if value < minimum:
        raise ParameterError('Parameter %s=%d kleiner als %d' % (name, value, minimum))
    return value


def _random_regular(n, deg, seed, retries):
    rng = np.random.default_rng(seed)
    for attempt in range(retries):
        sub_seed = int(rng.integers(2 ** 31))
        try:
            g = nx.random_regular_graph(deg, n, seed=sub_seed)
        except nx.NetworkXError as e:
            log.debug('random_regular Versuch %d fehlgeschlagen: %s', attempt, e)
            continue
        if nx.is_connected(g):
            return Graph(n, sorted(g.edges))
        log.debug('random_regular Versuch %d nicht zusammenhaengend', attempt)
    raise GenerationError('random_regular(n=%d, deg=%d): kein zusammenhaengender Graph nach %d Versuchen'
                          % (n, deg, retries))


def from_graph(g):
    """Shortest-path metric of a connected graph."""
    if g.n == 1:
        return MetricSpace([[0.0]])
    d = np.asarray(nx.floyd_warshall_numpy(g.to_networkx(), nodelist=range(g.n), weight='weight'))
    if not np.all(np.isfinite(d)):
        raise InfiniteDistanceError('Graph ist nicht zusammenhaengend')
    return MetricSpace(d)


def anchor_of(d):
    """Diameter pair of a distance matrix, endpoint with a small Delta/4 ball first."""
    n = d.shape[0]
    i, j = divmod(int(np.argmax(d)), n)
    delta = float(d[i, j])
    for x, xbar in ((i, j), (j, i)):
        if 2 * np.count_nonzero(4.0 * d[x] < delta) <= n:
            return DiameterAnchor(x, xbar, delta)
    raise ConsistencyError('Kein Durchmesser-Endpunkt mit |Ball(x, Delta/4)| <= n/2')


def diameter_anchor(m):
    if m.n < 2:
        raise DegenerateInputError('diameter_anchor braucht mindestens zwei Punkte')
    return anchor_of(m.d)


def validate(m, tol=TOLERANCE):
    """List every violated metric invariant; empty iff m is a metric."""
    d = m.d
    n = m.n
    report = []
    for i in np.flatnonzero(np.diagonal(d) != 0):
        report.append(Violation('zero_diagonal', (int(i),), float(d[i, i])))
    scale = np.maximum(np.abs(d), np.abs(d.T))
    asym = np.argwhere(np.triu(np.abs(d - d.T) > tol * scale, 1))
    for i, j in asym[:MAX_LISTED]:
        report.append(Violation('symmetry', (int(i), int(j)), (float(d[i, j]), float(d[j, i]))))
    off = ~np.eye(n, dtype=bool)
    for i, j in np.argwhere(off & (d <= 0))[:MAX_LISTED]:
        report.append(Violation('positivity', (int(i), int(j)), float(d[i, j])))
    listed = 0
    total = 0
    for j in range(n):
        detour = (d[:, j, None] + d[None, j, :]) * (1 + tol)
        bad = np.argwhere(np.triu(d > detour, 1))
        total += len(bad)
        for i, k in bad:
            if listed < MAX_LISTED:
                report.append(Violation('triangle', (int(i), j, int(k)),
                                        (float(d[i, k]), float(d[i, j] + d[j, k]))))
                listed += 1
    if total > listed:
        report.append(Violation('truncated', ('triangle',), total - listed))
    return report
