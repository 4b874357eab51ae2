"""Metrical task systems: offline optimum, work-function online play, reduction experiments."""
import itertools
import json
import logging
from collections import namedtuple

import numpy as np

from lib.core.embed_ultra import alpha_bound
from lib.core.errors import BudgetError, InputError
from lib.core.metric import MetricSpace

log = logging.getLogger(__name__)

TOLERANCE = 1e-9
INF_CAP = 1e12
FORBIDDEN = 1e11

Schedule = namedtuple('Schedule', ['states', 'cost'])


def _parse_cost(value):
    if isinstance(value, str):
        if value.strip().lower() in ('inf', 'infinity', '+inf'):
            return INF_CAP
        value = float(value)
    value = float(value)
    if value < 0:
        raise InputError('Servicekosten muessen nicht negativ sein, erhalten %r' % value)
    return min(value, INF_CAP)


class MtsInstance:
    """States of a metric space with a sequence of task cost vectors."""

    def __init__(self, space, tasks, start=0, state_points=None):
        self.space = space
        rows = [[_parse_cost(c) for c in row] for row in tasks]
        if any(len(row) != space.n for row in rows):
            raise InputError('Jeder Task braucht %d Eintraege' % space.n)
        self.tasks = np.asarray(rows, dtype=np.float64).reshape(len(rows), space.n)
        self.start = space.check_point(start)
        self.state_points = None if state_points is None else np.asarray(state_points, dtype=np.int64)

    @property
    def m(self):
        return len(self.tasks)

    @property
    def n(self):
        return self.space.n

    def to_json(self):
        tasks = [['inf' if c >= FORBIDDEN else float(c) for c in row] for row in self.tasks]
        return {'space': self.space.to_json(), 'start': self.start, 'tasks': tasks}

    @classmethod
    def from_json(cls, data):
        ref = data['space']
        space = MetricSpace.load(ref) if isinstance(ref, str) else MetricSpace.from_json(ref)
        return cls(space, data['tasks'], data.get('start', 0))

    def save(self, path):
        with open(path, 'w') as f:
            json.dump(self.to_json(), f)

    @classmethod
    def load(cls, path):
        with open(path, 'r') as f:
            return cls.from_json(json.load(f))


def _finish(cost):
    return float('inf') if cost >= FORBIDDEN else float(cost)


def schedule_cost(inst, states):
    """Movement plus service cost of a schedule, saturating at the internal cap."""
    states = np.asarray(states, dtype=np.int64)
    if len(states) != inst.m:
        raise InputError('Plan hat %d Zustaende, erwartet %d' % (len(states), inst.m))
    if not inst.m:
        return 0.0
    prev = np.concatenate(([inst.start], states[:-1]))
    total = inst.space.d[prev, states].sum() + inst.tasks[np.arange(inst.m), states].sum()
    return _finish(min(total, INF_CAP))


def _work_functions(inst, starts=None):
    d = inst.space.d
    base = d[inst.start] if starts is None else d[np.asarray(starts, dtype=np.int64)].min(axis=0)
    w = np.minimum(base + inst.tasks[0], INF_CAP)
    yield w, None
    for i in range(1, inst.m):
        total = w[:, None] + d
        arg = np.argmin(total, axis=0)
        w = np.minimum(total[arg, np.arange(inst.n)] + inst.tasks[i], INF_CAP)
        yield w, arg


def offline_opt(inst, starts=None):
    """Exact offline optimum by DP over (task, state); ties toward the smaller state.

    With starts given, the schedule may begin from whichever of those states is cheapest.
    """
    if not inst.m:
        return 0.0, Schedule([], 0.0)
    back = []
    w = None
    for w, arg in _work_functions(inst, starts):
        if arg is not None:
            back.append(arg)
    state = int(np.argmin(w))
    states = [state]
    for arg in reversed(back):
        state = int(arg[state])
        states.append(state)
    states.reverse()
    cost = _finish(w[states[-1]])
    if cost == float('inf'):
        log.info('Offline-Optimum: Instanz unzulaessig')
    return cost, Schedule(states, cost)


def wfa_online(inst):
    """Work-function rule: after task i move to argmin_u w_i(u) + d(u, current)."""
    if not inst.m:
        return 0.0, Schedule([], 0.0)
    d = inst.space.d
    current = inst.start
    states = []
    total = 0.0
    for i, (w, _) in enumerate(_work_functions(inst)):
        nxt = int(np.argmin(w + d[:, current]))
        total = min(total + d[current, nxt] + inst.tasks[i, nxt], INF_CAP)
        states.append(nxt)
        current = nxt
    cost = _finish(total)
    return cost, Schedule(states, cost)


def brute_force_opt(inst, max_states=4, max_tasks=6):
    if inst.n > max_states or inst.m > max_tasks:
        raise BudgetError('Brute Force nur fuer n <= %d und m <= %d' % (max_states, max_tasks))
    best = None
    for states in itertools.product(range(inst.n), repeat=inst.m):
        cost = schedule_cost(inst, states)
        if best is None or cost < best.cost:
            best = Schedule(list(states), cost)
    return best.cost, best


def reduce_tasks(me, inst):
    """Task vectors over target leaves: tau_N(leaf) = tau(f(leaf))."""
    me.check_source(inst.space)
    leaves = me.target.leaves
    points = me.target.point[leaves]
    a, b = np.meshgrid(leaves, leaves, indexing='ij')
    d = me.target.distances(a.ravel(), b.ravel()).reshape(len(leaves), len(leaves))
    start_leaf = me.fibers[inst.start][0]
    start = int(np.flatnonzero(leaves == start_leaf)[0])
    target = MtsInstance(MetricSpace(d), [], start, state_points=points)
    target.tasks = inst.tasks[:, points] if inst.m else np.zeros((0, len(leaves)))
    return target


def pull_back(state_points, inst, schedule):
    """Map a target schedule through f and recost it in the source."""
    if hasattr(state_points, 'state_points'):
        state_points = state_points.state_points
    states = [int(state_points[s]) for s in schedule.states]
    return Schedule(states, schedule_cost(inst, states))


def random_tasks(n, m, seed, high=10.0, inf_share=0.0):
    """Uniform costs in [0, high); optional infinite entries, never a whole row."""
    rng = np.random.default_rng(seed)
    tasks = rng.uniform(0.0, high, size=(m, n))
    if inf_share > 0 and n > 1:
        blocked = rng.random((m, n)) < inf_share
        blocked[np.arange(m), rng.integers(n, size=m)] = False
        tasks = np.where(blocked, np.inf, tasks)
    return tasks


def run_experiment(me, inst, tol=TOLERANCE):
    """Check both reduction inequalities on one instance and report the costs."""
    source_opt, _ = offline_opt(inst)
    target = reduce_tasks(me, inst)
    target_opt, _ = offline_opt(target)
    # the start representative is free here; the fixed start only adds a constant
    free_opt, _ = offline_opt(target, starts=np.flatnonzero(target.state_points == inst.start))
    online, online_schedule = wfa_online(target)
    pulled = pull_back(target, inst, online_schedule)
    alpha = alpha_bound(me)
    violations = []
    if pulled.cost > online * (1 + tol) + tol:
        violations.append('pull_back')
    finite = source_opt != float('inf')
    if alpha is not None and finite and free_opt > alpha * source_opt * (1 + tol) + tol:
        violations.append('opt_ratio')
    report = {
        'n': inst.n,
        'm': inst.m,
        'target_states': target.n,
        'alpha_bound': alpha,
        'source_opt': source_opt,
        'target_opt': target_opt,
        'target_opt_free_start': free_opt,
        'target_online': online,
        'pulled_back': pulled.cost,
        'opt_ratio': free_opt / source_opt if finite and source_opt > 0 else None,
        'online_ratio': online / target_opt if target_opt not in (0, float('inf')) else None,
        'pull_back_margin': online - pulled.cost,
        'opt_margin': None if alpha is None or not finite else alpha * source_opt - free_opt,
        'violations': violations,
        'holds': not violations,
    }
    if violations:
        log.warning('MTS-Reduktion verletzt: %s', violations)
    return report
