"""Representative paths: constructive realization, DP optimum, distortion statistics."""
import itertools
import logging
import math
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor

import networkx as nx
import numpy as np

from lib.core.embed_ultra import alpha_bound
from lib.core.errors import (BudgetError, ConsistencyError, InputError, ParameterError)
from lib.core.metric import diameter_anchor
from lib.core.tracker import RatioTracker

log = logging.getLogger(__name__)

TOLERANCE = 1e-9
SAMPLERS = ('uniform', 'local', 'walk')

PointPath = namedtuple('PointPath', ['seq', 'length'])
RepPath = namedtuple('RepPath', ['leaves', 'length'])
TrialResult = namedtuple('TrialResult', ['trial', 'path_len', 'realized', 'optimal', 'short'])


def point_path(m, seq):
    seq = np.asarray(seq, dtype=np.int64).ravel()
    if seq.size == 0:
        raise InputError('Pfad darf nicht leer sein')
    if seq.min() < 0 or seq.max() >= m.n:
        raise InputError('Pfad enthaelt Punkte ausserhalb von 0..%d' % (m.n - 1))
    return PointPath(seq, m.path_length(seq))


def _as_path(m, p):
    return p if isinstance(p, PointPath) else point_path(m, p)


def rep_length(target, leaves):
    leaves = np.asarray(leaves, dtype=np.int64)
    if leaves.size < 2:
        return 0.0
    return float(target.distances(leaves[:-1], leaves[1:]).sum())


def _check_image(me, leaves, seq):
    if np.any(leaves < 0) or not np.array_equal(me.f(leaves), seq):
        raise ConsistencyError('Repraesentantenpfad bildet nicht auf den Eingabepfad ab')


def _prefix(inside):
    miss = np.flatnonzero(~inside)
    return int(miss[0]) if miss.size else len(inside)


def realize_path(me, p, t=None):
    """Realize p in a shell-duplication tree by the alternating two-subtree partition.

    At each internal node the path is cut at the indices j_i where it first
    leaves the current side; main pieces recurse into their side and the
    connector interiors, which have representatives on both sides, recurse
    into the first child.
    """
    if me.kind != 'ultra':
        raise InputError('realize_path braucht eine Ultrametrik-Einbettung, erhalten %r' % me.kind)
    if t is not None and me.params.get('t') != t:
        raise ParameterError('t=%r passt nicht zur Einbettung (t=%r)' % (t, me.params.get('t')))
    path = _as_path(me.source, p)
    seq = path.seq
    tree = me.target
    masks = tree.subtree_masks()
    cache = {}

    def member(u):
        if u not in cache:
            row = np.zeros(me.source.n, dtype=bool)
            mask = masks[u]
            row[[i for i in range(me.source.n) if mask >> i & 1]] = True
            cache[u] = row
        return cache[u]

    out = np.full(len(seq), -1, dtype=np.int64)
    tasks = [(0, 0, len(seq) - 1)]
    while tasks:
        u, lo, hi = tasks.pop()
        if tree.point[u] >= 0:
            out[lo:hi + 1] = u
            continue
        kids = tree.children[u]
        if len(kids) != 2:
            raise ConsistencyError('Knoten %d ist nicht binaer' % u)
        seg = seq[lo:hi + 1]
        inside = (member(kids[0])[seg], member(kids[1])[seg])
        side = 0 if _prefix(inside[0]) >= _prefix(inside[1]) else 1
        js, sides = [lo], [side]
        while True:
            start = js[-1] - lo
            miss = np.flatnonzero(~inside[sides[-1]][start:])
            if not miss.size:
                break
            js.append(js[-1] + int(miss[0]))
            sides.append(1 - sides[-1])
        for i in range(len(js)):
            if i == len(js) - 1:
                k = hi
            else:
                window = ~inside[sides[i + 1]][js[i] - lo:js[i + 1] - lo]
                hits = np.flatnonzero(window)
                if not hits.size:
                    raise ConsistencyError('Kein k_i an Knoten %d (Eigenschaft 3 verletzt?)' % u)
                k = js[i] + int(hits[-1])
                if k + 1 <= js[i + 1] - 1:
                    tasks.append((kids[0], k + 1, js[i + 1] - 1))
            tasks.append((kids[sides[i]], js[i], k))
    _check_image(me, out, seq)
    return RepPath(out, rep_length(tree, out))


def optimal_rep_path(me, p):
    """Minimum-length representative path by stage DP over the fibers."""
    path = _as_path(me.source, p)
    tree = me.target
    stages = [np.asarray(me.fibers[x], dtype=np.int64) for x in path.seq]
    cost = np.zeros(len(stages[0]))
    back = []
    for prev, cur in zip(stages, stages[1:]):
        hop = tree.distances(np.repeat(prev, len(cur)), np.tile(cur, len(prev)))
        total = cost[:, None] + hop.reshape(len(prev), len(cur))
        arg = np.argmin(total, axis=0)
        cost = total[arg, np.arange(len(cur))]
        back.append(arg)
    pick = int(np.argmin(cost))
    chosen = [pick]
    for arg in reversed(back):
        pick = int(arg[pick])
        chosen.append(pick)
    chosen.reverse()
    leaves = np.asarray([stage[i] for stage, i in zip(stages, chosen)], dtype=np.int64)
    _check_image(me, leaves, path.seq)
    return RepPath(leaves, rep_length(tree, leaves))


def brute_force_rep_path(me, p, budget=100_000):
    """Exhaustive enumeration over every representative choice."""
    path = _as_path(me.source, p)
    stages = [me.fibers[x] for x in path.seq]
    count = math.prod(len(s) for s in stages)
    if count > budget:
        raise BudgetError('%d Repraesentantenfolgen ueberschreiten das Budget %d' % (count, budget))
    best = None
    for choice in itertools.product(*stages):
        length = rep_length(me.target, choice)
        if best is None or length < best.length:
            best = RepPath(np.asarray(choice, dtype=np.int64), length)
    return best


def sweep_path(m):
    """All points ordered by distance from the diameter anchor."""
    if m.n < 2:
        return np.zeros(1, dtype=np.int64)
    x = diameter_anchor(m).x
    return np.argsort(m.d[x], kind='stable').astype(np.int64)


def diameter_walk(m, graph):
    """Shortest graph path between the two diameter anchor points."""
    if m.n < 2:
        return np.zeros(1, dtype=np.int64)
    anchor = diameter_anchor(m)
    path = nx.shortest_path(graph.to_networkx(), anchor.x, anchor.xbar, weight='weight')
    return np.asarray(path, dtype=np.int64)


class PathSampler:
    """Random point paths: uniform jumps, k-nearest steps or graph walks."""

    def __init__(self, kind='uniform', length=16, neighbors=3):
        if kind not in SAMPLERS:
            raise ParameterError('Unbekannter Sampler %r, erlaubt: %s' % (kind, ', '.join(SAMPLERS)))
        if length < 0 or neighbors < 1:
            raise ParameterError('Sampler braucht length >= 0 und neighbors >= 1')
        self.kind = kind
        self.length = int(length)
        self.neighbors = int(neighbors)

    def describe(self):
        return {'kind': self.kind, 'length': self.length, 'neighbors': self.neighbors}

    def sample(self, m, rng, graph=None):
        steps = self.length
        if self.kind == 'uniform':
            return rng.integers(m.n, size=steps + 1)
        seq = np.empty(steps + 1, dtype=np.int64)
        seq[0] = rng.integers(m.n)
        if self.kind == 'local':
            order = np.argsort(m.d, axis=1, kind='stable')[:, 1:self.neighbors + 1]
            if order.shape[1] == 0:
                return np.zeros(steps + 1, dtype=np.int64)
            for i in range(1, steps + 1):
                seq[i] = order[seq[i - 1], rng.integers(order.shape[1])]
            return seq
        if graph is None:
            raise InputError('Sampler "walk" braucht einen Quellgraphen')
        for i in range(1, steps + 1):
            nbrs = graph.adjacency[seq[i - 1]]
            seq[i] = nbrs[rng.integers(len(nbrs))] if nbrs else seq[i - 1]
        return seq


def _realize(me, seq):
    if me.kind == 'ultra':
        return realize_path(me, seq).length
    if me.kind == 'star':
        from lib.core.embed_tree import realize_in_star
        return realize_in_star(me, seq).length
    return None


def _trial(me, sampler, seed, trial, trials):
    if trial == trials and me.kind == 'star':
        seq = diameter_walk(me.source, me.graph)
    elif trial == trials:
        seq = sweep_path(me.source)
    else:
        seq = sampler.sample(me.source, np.random.default_rng([seed, trial]), me.graph)
    path = point_path(me.source, seq)
    optimal = optimal_rep_path(me, path).length
    realized = _realize(me, path.seq)
    if realized is None:
        realized = optimal
    short = me.kind == 'star' and path.length < me.params['s']
    return TrialResult(trial, path.length, realized, optimal, short)


def distortion_stats(me, sampler=None, trials=10, seed=0, trial_logger=None, jobs=1,
                     tol=TOLERANCE):
    """Sampled realized/optimal ratios against the construction's distortion bound.

    The last row (trial index = trials) is a deterministic full-diameter path: the
    distance sweep from the anchor, or a shortest anchor-to-anchor walk for stars.
    """
    if trials < 1:
        raise ParameterError('trials muss >= 1 sein, erhalten %r' % (trials,))
    if sampler is None:
        sampler = PathSampler('walk' if me.kind == 'star' else 'uniform')
    bound = alpha_bound(me)
    indices = list(range(trials + 1))
    if me.kind == 'star' and me.graph is None:
        indices.pop()
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda i: _trial(me, sampler, seed, i, trials), indices))
    else:
        results = [_trial(me, sampler, seed, i, trials) for i in indices]
    realized = RatioTracker(bound, tol)
    optimal = RatioTracker(bound, tol)
    excluded = 0
    short = 0
    not_optimal = 0
    for r in results:
        if trial_logger is not None:
            trial_logger.log_trial(trial=r.trial, path_len=r.path_len,
                                   realized=r.realized, optimal=r.optimal)
        if r.optimal > r.realized * (1 + tol):
            not_optimal += 1
        if r.path_len <= 0:
            excluded += 1
            continue
        if r.short:
            short += 1
            continue
        realized.add(r.realized / r.path_len)
        optimal.add(r.optimal / r.path_len)
    violations = realized.above_bound + not_optimal
    if violations:
        log.warning('Verzerrung: %d Verletzungen der Schranke %s', violations, bound)
    return {
        'trials': trials,
        'bound': bound,
        'max_ratio_realized': realized.maximum,
        'max_ratio_optimal': optimal.maximum,
        'mean_ratio': optimal.mean(),
        'mean_ratio_realized': realized.mean(),
        'violations': violations,
        'kind': me.kind,
        'n': me.source.n,
        'leaf_count': me.leaf_count,
        'sampler': sampler.describe(),
        'seed': seed,
        'rows': len(results),
        'excluded_zero_length': excluded,
        'short_paths': short,
        'aspect_ratio': me.source.aspect_ratio,
        'diameter': me.source.diameter,
    }


def lower_bound_check(me, tol=TOLERANCE):
    """Optimal realization of the full path on P_n against g(n) = (n/2)*log2(n)."""
    m = me.source
    idx = np.arange(m.n)
    if not np.array_equal(m.d, np.abs(idx[:, None] - idx[None, :]).astype(np.float64)):
        raise InputError('lower_bound_check braucht die Pfadmetrik P_n als Quelle')
    best = optimal_rep_path(me, idx)
    g = m.n / 2 * math.log2(m.n) if m.n > 1 else 0.0
    holds = best.length >= g * (1 - tol)
    if not holds:
        log.warning('Untere Schranke verletzt: %.6g < g(%d)=%.6g', best.length, m.n, g)
    return {
        'n': m.n,
        'optimal_length': best.length,
        'g': g,
        'implied_distortion': g / (m.n - 1) if m.n > 1 else 0.0,
        'optimal_ratio': best.length / (m.n - 1) if m.n > 1 else 0.0,
        'margin': best.length - g,
        'holds': bool(holds),
    }
