"""Group Steiner tree through a multi-embedding: reduce, solve on the tree, project back."""
import itertools
import json
import logging
import math
from collections import namedtuple

import networkx as nx
import numpy as np

from lib.core.embed_tree import StarTree, build_path_star
from lib.core.embed_ultra import alpha_bound, build_ultrametric_embedding
from lib.core.errors import BudgetError, ConsistencyError, InputError
from lib.core.metric import Graph, MetricSpace, from_graph, load_space
from lib.core.ultrametric import UltraTree

log = logging.getLogger(__name__)

TOLERANCE = 1e-9
TREE_GROUPS = 14
ORACLE_CHOICES = 100_000
ORACLE_VERTICES = 20

SteinerSolution = namedtuple('SteinerSolution', ['vertices', 'edges', 'cost'])


class GstInstance:
    """A space (metric, graph or target tree) with k nonempty vertex groups."""

    def __init__(self, space, groups):
        self.space = space
        self.groups = tuple(tuple(sorted(set(int(v) for v in g))) for g in groups)
        if not self.groups:
            raise InputError('GST braucht mindestens eine Gruppe')
        size = vertex_count(space)
        for j, g in enumerate(self.groups):
            if not g:
                raise InputError('Gruppe %d ist leer' % j)
            if g[0] < 0 or g[-1] >= size:
                raise InputError('Gruppe %d enthaelt Knoten ausserhalb von 0..%d' % (j, size - 1))

    @property
    def k(self):
        return len(self.groups)

    def metric(self):
        if isinstance(self.space, MetricSpace):
            return self.space
        if isinstance(self.space, Graph):
            return from_graph(self.space)
        raise InputError('Instanz ueber einem Baum hat keine Quellmetrik')

    def to_json(self):
        if isinstance(self.space, Graph):
            space = dict(self.space.to_json(), type='graph')
        else:
            space = dict(self.space.to_json(), type='metric')
        return {'space': space, 'groups': [list(g) for g in self.groups]}

    @classmethod
    def from_json(cls, data):
        return cls(load_space(data['space']), data['groups'])

    @classmethod
    def load(cls, path):
        with open(path, 'r') as f:
            return cls.from_json(json.load(f))


def vertex_count(space):
    if isinstance(space, (MetricSpace, Graph)):
        return space.n
    return space.size


def expand_tree(target):
    """Edge-weighted tree whose leaf-to-leaf distances equal the target metric."""
    g = nx.Graph()
    g.add_nodes_from(range(target.size))
    if isinstance(target, UltraTree):
        for v in range(1, target.size):
            u = int(target.parent[v])
            g.add_edge(u, v, weight=float(target.labels[u] - target.labels[v]) / 2)
    elif isinstance(target, StarTree):
        for i in range(len(target.paths)):
            nodes = target.path_nodes(i)
            g.add_edge(0, int(nodes[0]), weight=target.delta / 2)
            for a, b in zip(nodes[:-1], nodes[1:]):
                g.add_edge(int(a), int(b), weight=1.0)
    else:
        raise InputError('Kein Baumziel: %r' % type(target).__name__)
    return g


def space_graph(space):
    """Weighted networkx graph in which solutions of the space live."""
    if isinstance(space, Graph):
        return space.to_networkx()
    if isinstance(space, MetricSpace):
        g = nx.Graph()
        g.add_nodes_from(range(space.n))
        for u, v in itertools.combinations(range(space.n), 2):
            g.add_edge(u, v, weight=float(space.d[u, v]))
        return g
    return expand_tree(space)


def _solution(graph, edges, vertices=None):
    edges = sorted((min(u, v), max(u, v)) for u, v in edges)
    nodes = set(vertices or ())
    for u, v in edges:
        nodes.update((u, v))
    cost = float(sum(graph[u][v]['weight'] for u, v in edges))
    return SteinerSolution(tuple(sorted(int(x) for x in nodes)), tuple(edges), cost)


def is_feasible(inst, sol):
    vertices = set(sol.vertices)
    if not vertices or any(not vertices.intersection(g) for g in inst.groups):
        return False
    tree = nx.Graph()
    tree.add_nodes_from(vertices)
    tree.add_edges_from(sol.edges)
    return tree.number_of_nodes() == len(vertices) and nx.is_tree(tree)


def solution_json(sol):
    return {'vertices': list(sol.vertices), 'edges': [list(e) for e in sol.edges], 'cost': sol.cost}


def reduce_gst(me, inst):
    """Replace every group by the union of its members' fibers in the target."""
    space = inst.space
    if isinstance(space, Graph):
        space = from_graph(space)
    me.check_source(space)
    groups = [sorted(leaf for x in g for leaf in me.fibers[x]) for g in inst.groups]
    return GstInstance(me.target, groups)


def _tree_masks(inst):
    masks = np.zeros(vertex_count(inst.space), dtype=np.int64)
    for j, g in enumerate(inst.groups):
        masks[list(g)] |= 1 << j
    return masks


def solve_tree_exact(inst, budget=TREE_GROUPS):
    """Exact group Steiner tree on a tree by DP over (node, covered groups)."""
    if not isinstance(inst.space, (UltraTree, StarTree)):
        raise InputError('solve_tree_exact braucht eine Baum-Instanz')
    k = inst.k
    if k > budget:
        raise BudgetError('%d Gruppen ueberschreiten das Budget %d' % (k, budget))
    tree = expand_tree(inst.space)
    full = (1 << k) - 1
    size = 1 << k
    masks = _tree_masks(inst)
    order = list(nx.dfs_preorder_nodes(tree, 0))
    parent = nx.dfs_predecessors(tree, 0)
    kids = {v: [] for v in order}
    for v in order[1:]:
        kids[parent[v]].append(v)
    subsets = np.arange(size)
    supersets = [subsets[(subsets & t) == t] for t in range(size)]
    dp = {}
    choices = {}
    top = {}
    for v in reversed(order):
        best = np.where((subsets & ~int(masks[v])) == 0, 0.0, np.inf)
        steps = []
        for c in kids[v]:
            w = tree[v][c]['weight']
            child = dp.pop(c)
            merged = best.copy()
            pick = np.zeros(size, dtype=np.int16)
            for t in range(1, size):
                if not np.isfinite(child[t]):
                    continue
                sup = supersets[t]
                cand = best[sup ^ t] + child[t] + w
                better = cand < merged[sup]
                merged[sup[better]] = cand[better]
                pick[sup[better]] = t
            best = merged
            steps.append((c, pick))
        dp[v] = best
        choices[v] = steps
        top[v] = best[full]
    root = min(order, key=lambda v: (top[v], v))
    if not np.isfinite(top[root]):
        raise ConsistencyError('Keine zulaessige Loesung im Baum')
    edges = []
    stack = [(root, full)]
    while stack:
        v, cover = stack.pop()
        for c, pick in reversed(choices[v]):
            t = int(pick[cover])
            if t:
                edges.append((v, c))
                stack.append((c, t))
                cover ^= t
    sol = _solution(tree, edges, [root])
    log.info('Baum-DP: k=%d, Kosten %.6g, %d Knoten', k, sol.cost, len(sol.vertices))
    return sol


def shortcut_skeleton(me, sol):
    """MST over the solution's mapped target vertices under the target metric."""
    target = me.target
    mapped = [v for v in sol.vertices if target.point[v] >= 0]
    g = nx.Graph()
    g.add_nodes_from(mapped)
    if len(mapped) > 1:
        a, b = np.triu_indices(len(mapped), 1)
        nodes = np.asarray(mapped, dtype=np.int64)
        dist = target.distances(nodes[a], nodes[b])
        for i, j, w in zip(a, b, dist):
            g.add_edge(mapped[i], mapped[j], weight=float(w))
    mst = nx.minimum_spanning_tree(g, weight='weight', algorithm='kruskal')
    return _solution(g, mst.edges(), mapped)


def project_solution(me, sol, inst):
    """Map a target solution back through f and take spanning trees of the image.

    Leaves sharing a source point merge into one vertex. The result costs at most
    the shortcut skeleton, which costs at most twice the target solution.
    """
    reduced = reduce_gst(me, inst)
    if not is_feasible(reduced, sol):
        raise InputError('Zielloesung ist fuer die reduzierte Instanz nicht zulaessig')
    skeleton = shortcut_skeleton(me, sol)
    m = me.source
    image = nx.Graph()
    points = sorted(set(int(me.target.point[v]) for v in skeleton.vertices))
    image.add_nodes_from(points)
    for u, v in skeleton.edges:
        x, y = int(me.target.point[u]), int(me.target.point[v])
        if x != y:
            image.add_edge(min(x, y), max(x, y), weight=float(m.d[x, y]))
    mst = nx.minimum_spanning_tree(image, weight='weight', algorithm='kruskal')
    if not isinstance(inst.space, Graph):
        result = _solution(image, mst.edges(), points)
    else:
        graph = inst.space.to_networkx()
        union = nx.Graph()
        union.add_nodes_from(points)
        for x, y in sorted(mst.edges()):
            path = nx.shortest_path(graph, x, y, weight='weight')
            for a, b in zip(path[:-1], path[1:]):
                union.add_edge(a, b, weight=graph[a][b]['weight'])
        span = nx.minimum_spanning_tree(union, weight='weight', algorithm='kruskal')
        result = _solution(union, span.edges(), points)
    if not is_feasible(inst, result):
        raise ConsistencyError('Projektion ist nicht zulaessig')
    log.info('Projektion: Ziel %.6g, Skelett %.6g, Quelle %.6g', sol.cost, skeleton.cost, result.cost)
    return result


def greedy_hitting_set(sets, universe):
    """Greedy hitting set: repeatedly take the element hitting most unhit sets (ties: smallest)."""
    open_sets = [set(s) for s in sets]
    if any(not s for s in open_sets):
        raise InputError('Leere Menge kann nicht getroffen werden')
    chosen = []
    while open_sets:
        counts = np.zeros(universe, dtype=np.int64)
        for s in open_sets:
            counts[list(s)] += 1
        pick = int(np.argmax(counts))
        chosen.append(pick)
        open_sets = [s for s in open_sets if pick not in s]
    return chosen


def _check_star_shape(star, s, delta):
    if not isinstance(star, StarTree):
        raise InputError('greedy_star_solver braucht einen Stern als Raum')
    if any(len(p) > s + 1 for p in star.paths) or not delta > 0:
        raise InputError('Sternform verletzt (Pfade laenger als s=%d oder Delta=%r)' % (s, delta))


def greedy_star_solver(inst, s=None, delta=None):
    """Best single-path interval, or greedy hitting set over whole paths, whichever is cheaper."""
    star = inst.space
    s = star.s if s is None and isinstance(star, StarTree) else s
    delta = star.delta if delta is None and isinstance(star, StarTree) else delta
    _check_star_shape(star, s, delta)
    tree = expand_tree(star)
    positions = []
    for i in range(len(star.paths)):
        nodes = star.path_nodes(i)
        per_group = []
        for g in inst.groups:
            hit = np.flatnonzero(np.isin(nodes, g))
            per_group.append(hit)
        positions.append(per_group)
    best = None
    for i, per_group in enumerate(positions):
        if any(not len(h) for h in per_group):
            continue
        length = len(star.paths[i])
        for a in range(length):
            for b in range(a, length):
                if b - a >= (best[0] if best else math.inf):
                    break
                if all(np.any((h >= a) & (h <= b)) for h in per_group):
                    best = (b - a, i, a, b)
                    break
    interval = None
    if best is not None:
        _, i, a, b = best
        nodes = star.path_nodes(i)[a:b + 1].tolist()
        interval = _solution(tree, zip(nodes[:-1], nodes[1:]), nodes)
    hits = [set(i for i in range(len(star.paths)) if len(positions[i][j])) for j in range(inst.k)]
    chosen = greedy_hitting_set(hits, len(star.paths))
    depth = {}
    for j in range(inst.k):
        i = next(p for p in chosen if p in hits[j])
        depth[i] = max(depth.get(i, 0), int(positions[i][j][0]))
    edges = []
    for i in sorted(depth):
        nodes = star.path_nodes(i)[:depth[i] + 1].tolist()
        edges.append((0, nodes[0]))
        edges.extend(zip(nodes[:-1], nodes[1:]))
    covering = _solution(tree, edges, [0])
    result = covering if interval is None or covering.cost < interval.cost else interval
    log.info('Stern-Greedy: Intervall %s, Hitting Set %d Pfade (%.6g)',
             None if interval is None else interval.cost, len(chosen), covering.cost)
    return result


def greedy_star_bound(k, s, delta):
    return (1 + 2 * s / delta) * (1 + math.log(k))


def _apsp(graph, n):
    return np.asarray(nx.floyd_warshall_numpy(graph, nodelist=range(n), weight='weight'))


def _dreyfus_wagner(dist, terminals, keep=False):
    t = len(terminals)
    n = dist.shape[0]
    size = 1 << t
    dp = np.full((size, n), np.inf)
    via = np.zeros((size, n), dtype=np.int64) if keep else None
    split = np.zeros((size, n), dtype=np.int64) if keep else None
    for i, term in enumerate(terminals):
        dp[1 << i] = dist[term]
        if keep:
            via[1 << i] = term
    for mask in range(1, size):
        if mask & (mask - 1) == 0:
            continue
        low = mask & -mask
        merged = np.full(n, np.inf)
        arg = np.zeros(n, dtype=np.int64)
        sub = (mask - 1) & mask
        while sub:
            if sub & low:
                cand = dp[sub] + dp[mask ^ sub]
                better = cand < merged
                merged[better] = cand[better]
                arg[better] = sub
            sub = (sub - 1) & mask
        total = merged[:, None] + dist
        pick = np.argmin(total, axis=0)
        dp[mask] = total[pick, np.arange(n)]
        if keep:
            via[mask] = pick
            split[mask] = arg
    return dp, via, split


def steiner_tree(graph, terminals, dist=None):
    """Exact Steiner tree on fixed terminals (Dreyfus-Wagner with reconstruction)."""
    terminals = sorted(set(int(x) for x in terminals))
    n = graph.number_of_nodes()
    if len(terminals) == 1:
        return SteinerSolution((terminals[0],), (), 0.0)
    if dist is None:
        dist = _apsp(graph, n)
    dp, via, split = _dreyfus_wagner(dist, terminals, keep=True)
    full = (1 << len(terminals)) - 1
    end = int(np.argmin(dp[full]))
    union = nx.Graph()
    stack = [(full, end)]
    while stack:
        mask, v = stack.pop()
        u = int(via[mask, v])
        if u != v:
            path = nx.shortest_path(graph, u, v, weight='weight')
            for a, b in zip(path[:-1], path[1:]):
                union.add_edge(a, b, weight=graph[a][b]['weight'])
        union.add_node(u)
        if mask & (mask - 1):
            a = int(split[mask, u])
            stack.append((a, u))
            stack.append((mask ^ a, u))
    span = nx.minimum_spanning_tree(union, weight='weight', algorithm='kruskal')
    sol = _solution(union, span.edges(), span.nodes())
    if sol.cost > dp[full, end] * (1 + TOLERANCE) + TOLERANCE:
        raise ConsistencyError('Rekonstruktion teurer als DP (%.6g > %.6g)' % (sol.cost, dp[full, end]))
    return sol


def exact_oracle(inst, budget=ORACLE_CHOICES, max_vertices=ORACLE_VERTICES):
    """Brute force: one representative per group, exact Steiner tree on each terminal set."""
    n = vertex_count(inst.space)
    if n > max_vertices:
        raise BudgetError('Orakel: %d Knoten ueber dem Limit %d' % (n, max_vertices))
    choices = math.prod(len(g) for g in inst.groups)
    if choices > budget:
        raise BudgetError('Orakel: %d Repraesentantenwahlen ueber dem Budget %d' % (choices, budget))
    graph = space_graph(inst.space)
    dist = _apsp(graph, n)
    seen = {}
    best = None
    for choice in itertools.product(*inst.groups):
        terminals = tuple(sorted(set(choice)))
        if terminals in seen:
            continue
        if len(terminals) == 1:
            cost = 0.0
        else:
            dp, _, _ = _dreyfus_wagner(dist, list(terminals))
            cost = float(dp[-1].min())
        seen[terminals] = cost
        if best is None or cost < best[0] - TOLERANCE * max(1.0, best[0]):
            best = (cost, terminals)
        elif abs(cost - best[0]) <= TOLERANCE * max(1.0, best[0]) and terminals < best[1]:
            best = (cost, terminals)
    sol = steiner_tree(graph, best[1], dist)
    log.info('Orakel: %d Terminalmengen, Optimum %.6g', len(seen), sol.cost)
    return sol


def build_embedding(space, via='ultra', t=1, s=None, seeds=None):
    """Embedding of the instance's source for the requested target family."""
    if via == 'ultra':
        m = space if isinstance(space, MetricSpace) else from_graph(space)
        return build_ultrametric_embedding(m, t)
    if via == 'star':
        if not isinstance(space, Graph):
            raise InputError('Stern-Einbettung braucht einen Graphen als Raum')
        if s is None:
            raise InputError('Stern-Einbettung braucht s')
        return build_path_star(space, s)
    if via == 'prob':
        from lib.core.prob import sample_embeddings, union_under_root
        m = space if isinstance(space, MetricSpace) else from_graph(space)
        return union_under_root(sample_embeddings(m, seeds or [0]))
    raise InputError('Unbekanntes Ziel %r' % (via,))


def run_pipeline(inst, via='ultra', t=1, s=None, seeds=None, oracle=False,
                 tree_budget=TREE_GROUPS, oracle_budget=ORACLE_CHOICES,
                 oracle_vertices=ORACLE_VERTICES, tol=TOLERANCE):
    """Embed, reduce, solve exactly on the tree, project back and compare with the oracle."""
    me = build_embedding(inst.space, via, t, s, seeds)
    reduced = reduce_gst(me, inst)
    target_sol = solve_tree_exact(reduced, tree_budget)
    skeleton = shortcut_skeleton(me, target_sol)
    projected = project_solution(me, target_sol, inst)
    alpha = alpha_bound(me)
    report = {
        'via': via,
        'k': inst.k,
        'n': vertex_count(inst.space),
        'target_leaves': me.leaf_count,
        'alpha_bound': alpha,
        'target_cost': target_sol.cost,
        'skeleton_cost': skeleton.cost,
        'projected_cost': projected.cost,
        'feasible': is_feasible(inst, projected),
        'solution': solution_json(projected),
        'violations': [],
    }
    if projected.cost > skeleton.cost * (1 + tol) + tol:
        report['violations'].append('projection_cost')
    if via == 'star':
        greedy = greedy_star_solver(reduced)
        report['greedy_cost'] = greedy.cost
        report['greedy_bound'] = greedy_star_bound(inst.k, me.params['s'], me.params['delta'])
    if oracle:
        best = exact_oracle(inst, oracle_budget, oracle_vertices)
        report['oracle_cost'] = best.cost
        report['ratio'] = projected.cost / best.cost if best.cost > 0 else (
            1.0 if projected.cost <= tol else math.inf)
        if alpha is not None:
            report['bound'] = 2 * alpha
            if projected.cost > 2 * alpha * best.cost * (1 + tol) + tol:
                report['violations'].append('approximation')
        if 'greedy_cost' in report:
            limit = report['greedy_bound'] * best.cost
            if report['greedy_cost'] > limit * (1 + tol) + tol:
                report['violations'].append('greedy')
    report['holds'] = report['feasible'] and not report['violations']
    if not report['holds']:
        log.warning('GST-Pipeline verletzt: %s', report['violations'])
    return report


def random_groups(size, k, seed, group_size=2):
    rng = np.random.default_rng([seed, k])
    return [sorted(rng.choice(size, size=min(group_size, size), replace=False).tolist())
            for _ in range(k)]
