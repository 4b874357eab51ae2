"""Shell-duplication multi-embedding of a finite metric into a binary ultrametric."""
import json
import logging
import math
from collections import namedtuple

import numpy as np

from lib.core.errors import ConsistencyError, InputError, ParameterError, Violation
from lib.core.metric import MetricSpace, anchor_of
from lib.core.ultrametric import UltraTree, leaf_tree, validate_hst

log = logging.getLogger(__name__)

TOLERANCE = 1e-9
CRITERIA = ('size', 'diameter')

Beta = namedtuple('Beta', ['value', 'criterion'])
TraceStep = namedtuple('TraceStep', ['node', 'points', 'anchor', 'delta', 'i_star', 'left', 'right'])


class ShellDecomposition(namedtuple('ShellDecomposition', ['anchor', 'delta', 't', 'dist'])):
    """Rings A_0 = {x} and A_i = {y: d(x,y) < i*delta/(4t)} around a local anchor."""
    __slots__ = ()

    @property
    def n(self):
        return len(self.dist)

    def ring(self, i):
        if i == 0:
            mask = np.zeros(self.n, dtype=bool)
            mask[self.anchor] = True
            return mask
        return 4 * self.t * self.dist < i * self.delta

    def shell(self, i):
        return self.ring(i) & ~self.ring(i - 1)

    @property
    def sizes(self):
        return [int(np.count_nonzero(self.ring(i))) for i in range(self.t + 1)]

    @property
    def epsilons(self):
        return np.asarray(self.sizes, dtype=np.float64) / self.n


def _check_t(t):
    if isinstance(t, bool) or int(t) != t or t < 1:
        raise ParameterError('t muss eine ganze Zahl >= 1 sein, erhalten %r' % (t,))
    return int(t)


def _beta_size(n, t):
    return math.log2(n) ** (1.0 / t) if n > 1 else 0.0


def _beta_diameter(delta, t):
    return (t * math.log2(4 * delta)) ** (2.0 / t)


def beta(n, delta, t):
    """Exponent of the size bound n**beta and the branch attaining it (ties: size)."""
    t = _check_t(t)
    if n < 1:
        raise ParameterError('n muss >= 1 sein, erhalten %r' % (n,))
    if delta < 1:
        raise ParameterError('Delta muss >= 1 sein, erhalten %r' % (delta,))
    by_size = _beta_size(n, t)
    by_diameter = _beta_diameter(delta, t)
    if by_size <= by_diameter:
        return Beta(by_size, 'size')
    return Beta(by_diameter, 'diameter')


def t_for_beta(n, delta, target):
    """Smallest t with beta(n, delta, t) <= target, for a target exponent above 1."""
    target = float(target)
    if not target > 1:
        raise ParameterError('beta muss > 1 sein, erhalten %r' % (target,))
    # the size branch alone reaches target at this t, so the search is finite
    log_n = math.log2(n) if n > 1 else 1.0
    t_max = max(1, math.ceil(math.log(log_n) / math.log(target))) if log_n > 1 else 1
    for t in range(1, t_max + 1):
        if beta(n, delta, t).value <= target:
            return t
    return t_max


def shell_decomposition(m, t, anchor=None):
    """Rings around the diameter anchor of m (or a given anchor point)."""
    t = _check_t(t)
    d = m.d if isinstance(m, MetricSpace) else np.asarray(m)
    if anchor is None:
        anchor = anchor_of(d).x
    delta = float(d.max())
    return ShellDecomposition(int(anchor), delta, t, d[anchor])


def select_shell(dec, n, delta, t, criterion, tol=TOLERANCE):
    """Smallest i in 1..t satisfying the branch's shell inequality.

    delta is the normalized diameter of the current subset (diameter over the
    minimum nonzero distance of the whole input).
    """
    if criterion not in CRITERIA:
        raise ParameterError('Unbekanntes Kriterium %r' % (criterion,))
    logs = np.log(dec.epsilons)
    if criterion == 'diameter' and delta >= 1:
        b_half = _beta_diameter(delta / 2.0, t)
        b_full = _beta_diameter(delta, t)
        offset = (b_half - b_full) * math.log(n)
        for i in range(1, t + 1):
            if logs[i - 1] >= b_half * logs[i] + offset - tol:
                return i
    else:
        b = _beta_size(n, t)
        for i in range(1, t + 1):
            if logs[i - 1] >= b * logs[i] - tol:
                return i
    raise ConsistencyError('Keine Schale erfuellt die Bedingung (n=%d, Delta=%r, t=%d, %s)'
                           % (n, delta, t, criterion))


class MultiEmbedding:
    """Target tree (UltraTree or StarTree) plus the surjection f onto the source points."""

    def __init__(self, source, target, kind='ultra', params=None, graph=None):
        self.source = source
        self.target = target
        self.kind = kind
        self.params = dict(params or {})
        self.graph = graph
        self.fibers = target.fibers()
        empty = [x for x, fiber in enumerate(self.fibers) if not fiber]
        if len(self.fibers) != source.n or empty:
            raise InputError('Abbildung nicht surjektiv, leere Fasern: %s' % empty[:10])

    @property
    def leaf_count(self):
        return self.target.leaf_count

    def f(self, leaves):
        return self.target.point[np.asarray(leaves, dtype=np.int64)]

    def check_source(self, space):
        if not self.source.same_as(space):
            raise InputError('Instanz passt nicht zur Quellmetrik der Einbettung')

    def to_json(self):
        data = {'kind': self.kind, 'metric_ref': self.source.to_json()}
        data.update(self.params)
        if self.kind == 'star':
            data['star'] = self.target.to_json()
        else:
            data['tree'] = self.target.to_json()
        if self.graph is not None:
            data['graph'] = self.graph.to_json()
        data['fibers'] = self.fibers
        return data

    @classmethod
    def from_json(cls, data):
        ref = data['metric_ref']
        if isinstance(ref, str):
            source = MetricSpace.load(ref)
        else:
            source = MetricSpace.from_json(ref)
        kind = data.get('kind', 'ultra')
        params = {k: v for k, v in data.items()
                  if k not in ('kind', 'metric_ref', 'tree', 'star', 'graph', 'fibers')}
        graph = None
        if 'graph' in data:
            from lib.core.metric import Graph
            graph = Graph.from_json(data['graph'])
        if kind == 'star':
            from lib.core.embed_tree import StarTree
            target = StarTree.from_json(data['star'], source_n=source.n)
        else:
            target = UltraTree.from_json(data['tree'])
        return cls(source, target, kind=kind, params=params, graph=graph)

    def save(self, path):
        with open(path, 'w') as f:
            json.dump(self.to_json(), f)

    @classmethod
    def load(cls, path):
        with open(path, 'r') as f:
            return cls.from_json(json.load(f))


def build_ultrametric_embedding(m, t, trace=None, tol=TOLERANCE):
    """Recursive shell duplication: A_i into the first child, V minus A_{i-1} into the second.

    Passing a list as trace collects one TraceStep per internal node.
    """
    t = _check_t(t)
    n = m.n
    delta_norm = m.aspect_ratio
    top = beta(n, delta_norm, t)
    params = {'t': t, 'beta': top.value, 'criterion': top.criterion, 'fallbacks': 0}
    if n == 1:
        return MultiEmbedding(m, leaf_tree(0, 1), params=params)
    unit = m.min_nonzero
    parent, labels, point = [], [], []
    stack = [(np.arange(n), -1)]
    while stack:
        pts, p = stack.pop()
        uid = len(parent)
        parent.append(p)
        if len(pts) == 1:
            labels.append(0.0)
            point.append(int(pts[0]))
            continue
        sub = m.d[np.ix_(pts, pts)]
        anchor = anchor_of(sub)
        dec = ShellDecomposition(anchor.x, anchor.delta, t, sub[anchor.x])
        criterion = top.criterion
        if criterion == 'diameter' and anchor.delta / unit < 1:
            criterion = 'size'
            params['fallbacks'] += 1
            log.info('Durchmesser < 1 an Knoten %d, Groessenkriterium verwendet', uid)
        i_star = select_shell(dec, len(pts), anchor.delta / unit, t, criterion, tol)
        left = pts[dec.ring(i_star)]
        right = pts[~dec.ring(i_star - 1)]
        labels.append(anchor.delta)
        point.append(-1)
        if trace is not None:
            trace.append(TraceStep(uid, pts.tolist(), int(pts[anchor.x]), anchor.delta,
                                   i_star, left.tolist(), right.tolist()))
        log.debug('Knoten %d: %d Punkte, i*=%d, links %d, rechts %d',
                  uid, len(pts), i_star, len(left), len(right))
        stack.append((right, uid))
        stack.append((left, uid))
    tree = UltraTree(parent, labels, point, k=1.0, source_n=n)
    log.info('Ultrametrik gebaut: n=%d, t=%d, %d Blaetter (Schranke n^beta=%.1f, %s)',
             n, t, tree.leaf_count, n ** top.value, top.criterion)
    return MultiEmbedding(m, tree, params=params)


def alpha_bound(me):
    """Path distortion guaranteed by the construction, None where only measured."""
    if me.kind == 'ultra':
        t = me.params['t']
        return 8 * t * max(1.0, math.log2(min(me.source.n, me.source.aspect_ratio)))
    if me.kind == 'star':
        return 2 + me.params['delta'] / me.params['s']
    return None


def _bits(mask):
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return np.asarray(out, dtype=np.int64)


def _leaf_with_point(tree, u, x):
    for leaf in tree.subtree_leaves(u):
        if tree.point[leaf] == x:
            return leaf
    raise ConsistencyError('Punkt %d fehlt unter Knoten %d' % (x, u))


def non_contraction_violations(me, tol=TOLERANCE, max_listed=20):
    """Cross-child point pairs whose source distance exceeds the node label.

    A pair of leaves separated at node u has tree distance label(u), so checking
    every node against the point sets of its children covers all leaf pairs.
    """
    tree = me.target
    d = me.source.d
    masks = tree.subtree_masks()
    report = []
    for u in range(tree.size):
        kids = tree.children[u]
        if len(kids) < 2:
            continue
        label = tree.labels[u]
        sets = [_bits(masks[c]) for c in kids]
        for a in range(len(kids)):
            for b in range(a + 1, len(kids)):
                block = d[np.ix_(sets[a], sets[b])]
                bad = np.argwhere(block > label * (1 + tol))
                for r, c in bad[:max_listed]:
                    x, y = int(sets[a][r]), int(sets[b][c])
                    pair = (int(_leaf_with_point(tree, kids[a], x)),
                            int(_leaf_with_point(tree, kids[b], y)))
                    report.append(Violation('contraction', pair, (float(label), float(d[x, y]))))
    return report


def audit_embedding(me, t=None, tol=TOLERANCE):
    """Check size, non-contraction, binary shape and the per-node split properties."""
    tree = me.target
    report = list(validate_hst(tree, 1.0, tol))
    report.extend(non_contraction_violations(me, tol))
    if me.kind != 'ultra':
        return report
    t = _check_t(t if t is not None else me.params['t'])
    n = me.source.n
    b = me.params.get('beta')
    if b is None:
        b = beta(n, me.source.aspect_ratio, t).value
    if tree.leaf_count > n ** b * (1 + tol):
        report.append(Violation('size', (tree.leaf_count,), float(n ** b)))
    d = me.source.d
    masks = tree.subtree_masks()
    for u in range(tree.size):
        if tree.point[u] >= 0:
            continue
        kids = tree.children[u]
        if len(kids) != 2:
            report.append(Violation('binary', (u,), len(kids)))
            continue
        label = tree.labels[u]
        m1, m2 = masks[kids[0]], masks[kids[1]]
        only1, only2 = _bits(m1 & ~m2), _bits(m2 & ~m1)
        if len(only1) and len(only2):
            gap = float(d[np.ix_(only1, only2)].min())
            if gap < label / (4 * t) * (1 - tol):
                report.append(Violation('separation_split', (u,), (gap, float(label / (4 * t)))))
        if 2 * bin(m1).count('1') > bin(m1 | m2).count('1'):
            report.append(Violation('support', (u,), (bin(m1).count('1'), bin(m1 | m2).count('1'))))
        if tree.labels[kids[0]] > label / 2 * (1 + tol):
            report.append(Violation('diameter_halving', (u,), (float(tree.labels[kids[0]]),
                                                               float(label))))
    if report:
        log.warning('Audit: %d Verletzungen', len(report))
    return report
