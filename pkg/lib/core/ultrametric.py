"""Labeled rooted trees as ultrametrics and k-HSTs over their leaves."""
import json
import math
import threading
from collections import namedtuple

import numpy as np

from lib.core.errors import InputError, ParameterError, UnknownLeafError, Violation

TOLERANCE = 1e-9

LcaIndex = namedtuple('LcaIndex', ['tour', 'depth', 'first', 'table', 'log'])


class UltraTree:
    """Rooted tree with node labels; leaf distance is the label of the LCA.

    Nodes are numbered in pre-order, so the root is 0 and every parent id is
    smaller than its children's ids. Leaves carry the source point they map to,
    internal nodes carry point -1.
    """

    def __init__(self, parent, labels, point, k=1.0, source_n=None):
        self.parent = np.asarray(parent, dtype=np.int64)
        self.labels = np.asarray(labels, dtype=np.float64)
        self.point = np.asarray(point, dtype=np.int64)
        size = len(self.parent)
        if size < 1 or len(self.labels) != size or len(self.point) != size:
            raise InputError('Baum: parent, labels und point muessen gleich lang und nicht leer sein')
        if self.parent[0] != -1 or np.any(self.parent[1:] >= np.arange(1, size)) \
                or np.any(self.parent[1:] < 0):
            raise InputError('Baum: Knoten muessen in Pre-Order nummeriert sein (Wurzel 0)')
        self.k = float(k)
        children = [[] for _ in range(size)]
        for v in range(1, size):
            children[self.parent[v]].append(v)
        self.children = tuple(tuple(c) for c in children)
        self.leaves = np.flatnonzero(self.point >= 0)
        self.source_n = int(source_n) if source_n is not None else int(self.point.max()) + 1
        self._index = None
        self._lock = threading.Lock()

    @property
    def size(self):
        return len(self.parent)

    @property
    def leaf_count(self):
        return len(self.leaves)

    def fibers(self):
        """Sorted leaf ids per source point."""
        result = [[] for _ in range(self.source_n)]
        for leaf in self.leaves:
            p = self.point[leaf]
            if p < self.source_n:
                result[p].append(int(leaf))
        return result

    def subtree_masks(self):
        """Point set under every node as an integer bitmask."""
        masks = [0] * self.size
        for u in range(self.size - 1, -1, -1):
            if self.point[u] >= 0:
                masks[u] = 1 << int(self.point[u])
            else:
                m = 0
                for c in self.children[u]:
                    m |= masks[c]
                masks[u] = m
        return masks

    def subtree_leaves(self, u):
        out = []
        stack = [u]
        while stack:
            v = stack.pop()
            if self.point[v] >= 0:
                out.append(v)
            stack.extend(self.children[v])
        return sorted(out)

    def _check_leaves(self, ids):
        ids = np.asarray(ids, dtype=np.int64)
        bad = (ids < 0) | (ids >= self.size)
        if not np.any(bad):
            bad = self.point[ids] < 0
        if np.any(bad):
            raise UnknownLeafError('Kein Blatt: %s' % ids[bad][:5].tolist())
        return ids

    def lca_index(self):
        """Euler tour plus sparse table, built once and then shared read-only."""
        if self._index is not None:
            return self._index
        with self._lock:
            if self._index is None:
                self._index = self._build_index()
        return self._index

    def _build_index(self):
        tour = []
        depth = []
        first = np.full(self.size, -1, dtype=np.int64)
        stack = [[0, 0]]
        while stack:
            frame = stack[-1]
            u, i = frame
            if i == 0:
                first[u] = len(tour)
            tour.append(u)
            depth.append(len(stack) - 1)
            if i < len(self.children[u]):
                frame[1] += 1
                stack.append([self.children[u][i], 0])
            else:
                stack.pop()
        tour = np.asarray(tour, dtype=np.int64)
        depth = np.asarray(depth, dtype=np.int64)
        m = len(tour)
        levels = max(1, m.bit_length())
        table = np.zeros((levels, m), dtype=np.int64)
        table[0] = np.arange(m)
        for j in range(1, levels):
            span = 1 << j
            if span > m:
                break
            half = span >> 1
            left = table[j - 1, :m - span + 1]
            right = table[j - 1, half:half + m - span + 1]
            table[j, :m - span + 1] = np.where(depth[left] <= depth[right], left, right)
        log = np.zeros(m + 1, dtype=np.int64)
        j = 0
        while (1 << (j + 1)) <= m:
            log[1 << (j + 1):] = j + 1
            j += 1
        return LcaIndex(tour, depth, first, table, log)

    def lca(self, a, b):
        index = self.lca_index()
        fa = index.first[np.asarray(a, dtype=np.int64)]
        fb = index.first[np.asarray(b, dtype=np.int64)]
        lo = np.minimum(fa, fb)
        hi = np.maximum(fa, fb)
        j = index.log[hi - lo + 1]
        x = index.table[j, lo]
        y = index.table[j, hi - np.left_shift(1, j) + 1]
        return index.tour[np.where(index.depth[x] <= index.depth[y], x, y)]

    def distances(self, a, b):
        """Vectorized leaf distances for equal-length leaf arrays."""
        a = self._check_leaves(np.atleast_1d(a))
        b = self._check_leaves(np.atleast_1d(b))
        return np.where(a == b, 0.0, self.labels[self.lca(a, b)])

    def distance(self, a, b):
        return float(self.distances([a], [b])[0])

    def to_json(self):
        nodes = [None] * self.size
        for u in range(self.size - 1, -1, -1):
            if self.point[u] >= 0:
                nodes[u] = {'label': float(self.labels[u]), 'point': int(self.point[u])}
            else:
                nodes[u] = {'label': float(self.labels[u]),
                            'children': [nodes[c] for c in self.children[u]]}
        return {'k': self.k, 'source_n': self.source_n, 'root': nodes[0]}

    @classmethod
    def from_json(cls, data):
        parent, labels, point = [], [], []
        stack = [(data['root'], -1)]
        while stack:
            node, p = stack.pop()
            uid = len(parent)
            parent.append(p)
            labels.append(float(node['label']))
            if 'point' in node:
                point.append(int(node['point']))
            else:
                point.append(-1)
                for child in reversed(node.get('children', [])):
                    stack.append((child, uid))
        return cls(parent, labels, point, k=data.get('k', 1.0), source_n=data.get('source_n'))

    def save(self, path):
        with open(path, 'w') as f:
            json.dump(self.to_json(), f)

    @classmethod
    def load(cls, path):
        with open(path, 'r') as f:
            return cls.from_json(json.load(f))


def leaf_tree(point=0, source_n=1):
    return UltraTree([-1], [0.0], [point], source_n=source_n)


def tree_distance(t, a, b):
    return t.distance(a, b)


def validate_hst(t, k=1.0, tol=TOLERANCE):
    """List label and separation violations; empty iff t is a valid k-HST."""
    if k < 1:
        raise ParameterError('validate_hst braucht k >= 1, erhalten %r' % k)
    report = []
    for u in range(t.size):
        leaf = t.point[u] >= 0
        if leaf and t.children[u]:
            report.append(Violation('leaf_children', (u,), len(t.children[u])))
        if leaf and t.labels[u] != 0:
            report.append(Violation('leaf_label', (u,), float(t.labels[u])))
        if not leaf and not t.children[u]:
            report.append(Violation('dangling', (u,), None))
        if not leaf and not t.labels[u] > 0:
            report.append(Violation('internal_label', (u,), float(t.labels[u])))
        for v in t.children[u]:
            limit = t.labels[u] / k
            if t.labels[v] > limit * (1 + tol):
                report.append(Violation('separation', (u, v), (float(t.labels[v]), float(limit))))
    points = t.point[t.leaves]
    outside = points[(points < 0) | (points >= t.source_n)]
    for p in np.unique(outside):
        report.append(Violation('leaf_point', (int(p),), t.source_n))
    missing = np.setdiff1d(np.arange(t.source_n), points)
    for p in missing:
        report.append(Violation('surjective', (int(p),), None))
    return report


def _power_ceiling(x, k):
    e = math.ceil(math.log(x) / math.log(k))
    if k ** (e - 1) >= x:
        e -= 1
    if k ** e < x:
        e += 1
    return k ** e


def to_khst(t, k):
    """Round internal labels up to powers of k and contract equal-label chains."""
    if not k > 1:
        raise ParameterError('to_khst braucht k > 1, erhalten %r' % k)
    rounded = [(_power_ceiling(float(x), k) if t.point[u] < 0 and x > 0 else float(x))
               for u, x in enumerate(t.labels)]
    parent, labels, point = [], [], []
    stack = [(0, -1)]
    while stack:
        u, p = stack.pop()
        if p >= 0 and t.point[u] < 0 and rounded[u] == labels[p]:
            for c in reversed(t.children[u]):
                stack.append((c, p))
            continue
        uid = len(parent)
        parent.append(p)
        labels.append(rounded[u])
        point.append(int(t.point[u]))
        for c in reversed(t.children[u]):
            stack.append((c, uid))
    return UltraTree(parent, labels, point, k=k, source_n=t.source_n)
