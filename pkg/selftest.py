import logging

from lib.apps.mts import MtsInstance, offline_opt, wfa_online
from lib.core.embed_ultra import audit_embedding, build_ultrametric_embedding
from lib.core.logger import setup_logging
from lib.core.metric import from_graph, generate
from lib.core.realize import lower_bound_check, optimal_rep_path, realize_path

log = logging.getLogger('selftest')


def run_tests():
    log.info('Selftest Start')

    # P_4: caterpillar with labels 3, 2, 1 and singleton fibers
    m = from_graph(generate('path', n=4))
    me = build_ultrametric_embedding(m, 1)
    print('Blaetter:', me.leaf_count, 'Fasern:', me.fibers)
    violations = audit_embedding(me)
    if violations:
        raise AssertionError('Audit meldet Verletzungen: %s' % violations)

    rep = realize_path(me, [0, 1, 2, 3])
    best = optimal_rep_path(me, [0, 1, 2, 3])
    print('Realisiert:', rep.length, 'Optimal:', best.length)
    if best.length > rep.length:
        raise AssertionError('Optimum laenger als Realisierung')

    bound = lower_bound_check(me)
    print('Untere Schranke:', bound)
    if not bound['holds']:
        raise AssertionError('Untere Schranke verletzt')

    two = from_graph(generate('path', n=2))
    inst = MtsInstance(two, [[0, 5], [5, 0], [0, 5]])
    opt, _ = offline_opt(inst)
    online, _ = wfa_online(inst)
    print('MTS OPT:', opt, 'online:', online)
    if opt != 2.0 or online < opt:
        raise AssertionError('MTS-Beispiel falsch')
    print('Selftest OK')


def run_selftest():
    setup_logging('INFO')
    run_tests()


if __name__ == '__main__':
    run_selftest()
