"""Command line entry point of the multi-embedding toolkit."""

import argparse
import json
import logging
import sys
import time

import numpy as np

from lib.apps import gst, mts
from lib.core.embed_tree import audit_star, build_path_star, realize_in_star
from lib.core.embed_ultra import (MultiEmbedding, alpha_bound, audit_embedding, build_ultrametric_embedding,
                                  t_for_beta)
from lib.core.errors import ConsistencyError, EmbeddingError, InputError, violation_dicts
from lib.core.logger import TrialLogger, setup_logging
from lib.core.metric import KINDS, Graph, as_metric, from_graph, generate, load_space, validate
from lib.core.prob import pairwise_stretch, sample_embeddings, single_tree_embedding, union_under_root
from lib.core.realize import (PathSampler, SAMPLERS, brute_force_rep_path, distortion_stats,
                              lower_bound_check, optimal_rep_path, realize_path)
from lib.core.settings import Settings
from lib.ui.alarm import EXIT_FALSIFIED, EXIT_USAGE, FalsificationAlarm
from lib.ui.report import ReportWriter, load_manifest

log = logging.getLogger('main')

RANDOM_KINDS = ('random_regular', 'random_metric')


class ToolkitController:
    """Runs one subcommand: load inputs, call the library, write reports and manifests."""

    def __init__(self, settings, jobs=1):
        self.settings = settings
        self.tol = settings.tolerance
        self.jobs = max(1, int(jobs))
        self.alarm = FalsificationAlarm()
        self.seeds = []
        self.inputs = []

    def _space(self, path):
        self.inputs.append(path)
        return load_space(path)

    def _embedding(self, path):
        self.inputs.append(path)
        return MultiEmbedding.load(path)

    def _require_seed(self, args, what):
        if args.seed is None:
            raise InputError('%s braucht --seed' % what)
        self.seeds.append(args.seed)
        return args.seed

    def _prob_seeds(self, args):
        seed = self._require_seed(args, 'Zufallsbaeume')
        if args.samples < 1:
            raise InputError('--samples muss >= 1 sein')
        return [seed + i for i in range(args.samples)]

    def run(self, args, writer):
        handler = getattr(self, '_cmd_' + args.command.replace(' ', '_'))
        handler(args, writer)

    def _cmd_gen(self, args, writer):
        gen = self.settings.section('generators')
        seed = 0
        if args.kind in RANDOM_KINDS:
            seed = self._require_seed(args, 'gen --kind %s' % args.kind)
        space = generate(args.kind, seed=seed, weight_low=gen['weight_low'],
                         weight_high=gen['weight_high'], retries=gen['regular_retries'],
                         n=args.n, deg=args.deg, h=args.h)
        if isinstance(space, Graph) and args.graph:
            if args.output and args.output.endswith('.tsv'):
                writer.emit_text(space.to_tsv())
            else:
                writer.emit_json(space.to_json())
            return
        if args.graph:
            raise InputError('Familie %s liefert keinen Graphen' % args.kind)
        writer.emit_json(as_metric(space).to_json())

    def _embed(self, args, via, space, trace=None):
        if via == 'ultra':
            m = as_metric(space)
            target = getattr(args, 'beta', None)
            t = args.t if target is None else t_for_beta(m.n, m.aspect_ratio, target)
            me = build_ultrametric_embedding(m, t, trace=trace, tol=self.tol)
            if target is not None:
                me.params['beta_target'] = float(target)
            if isinstance(space, Graph):
                me.graph = space
            return me
        if via == 'star':
            if not isinstance(space, Graph):
                raise InputError('embed star braucht einen Graphen (JSON mit "edges" oder TSV)')
            if args.s is None:
                raise InputError('embed star braucht --s')
            return build_path_star(space, args.s, self.settings.budget('star_nodes'))
        union = union_under_root(sample_embeddings(as_metric(space), self._prob_seeds(args), self.jobs))
        if isinstance(space, Graph):
            union.graph = space
        return union

    def _cmd_embed(self, args, writer):
        space = self._space(args.input)
        trace = [] if args.trace and args.via == 'ultra' else None
        me = self._embed(args, args.via, space, trace)
        writer.emit_json(me.to_json())
        if trace is not None:
            writer.emit_json([step._asdict() for step in trace], path=args.trace)

    def _cmd_audit(self, args, writer):
        self.inputs.append(args.input)
        with open(args.input, 'r') as f:
            data = json.load(f)
        if 'metric_ref' not in data:
            space = load_space(data)
            found = validate(as_metric(space), self.tol)
            report = {'kind': 'metric', 'n': space.n, 'violations': violation_dicts(found)}
        else:
            me = MultiEmbedding.from_json(data)
            if me.kind == 'star':
                budgets = self.settings.section('budgets')
                found = audit_star(me, limit=budgets['audit_exhaustive'], seed=args.seed or 0,
                                   tol=self.tol)
            else:
                found = audit_embedding(me, tol=self.tol)
            report = {'kind': me.kind, 'n': me.source.n, 'leaf_count': me.leaf_count,
                      'alpha_bound': alpha_bound(me), 'violations': violation_dicts(found)}
            if me.kind == 'prob':
                report['stretch'] = pairwise_stretch(me)
        self.alarm.check_violations('audit', found)
        writer.emit_json(report)

    def _cmd_realize(self, args, writer):
        me = self._embedding(args.input)
        seq = np.asarray(args.path, dtype=np.int64)
        report = {'kind': me.kind, 'path': seq, 'path_length': me.source.path_length(seq)}
        best = optimal_rep_path(me, seq)
        report['optimal'] = {'leaves': best.leaves, 'length': best.length}
        if me.kind == 'ultra':
            rep = realize_path(me, seq)
            report['realized'] = {'leaves': rep.leaves, 'length': rep.length}
        elif me.kind == 'star':
            rep = realize_in_star(me, seq, self.tol)
            report['realized'] = {'leaves': rep.leaves, 'length': rep.length, 'chunks': rep.chunks,
                                  'hop_bound': rep.hop_bound, 'ratio_bound': rep.ratio_bound}
        if args.brute_force:
            brute = brute_force_rep_path(me, seq, self.settings.budget('rep_enumeration'))
            report['brute_force'] = {'leaves': brute.leaves, 'length': brute.length}
            if abs(brute.length - best.length) > self.tol * max(1.0, brute.length):
                self.alarm.trigger_alarm('realize', 'DP %.12g != Brute Force %.12g'
                                         % (best.length, brute.length))
        if 'realized' in report and best.length > report['realized']['length'] * (1 + self.tol) + self.tol:
            self.alarm.trigger_alarm('realize', 'Optimum laenger als Realisierung')
        bound = alpha_bound(me)
        report['alpha_bound'] = bound
        if bound is not None and me.kind == 'ultra' and 'realized' in report:
            if report['realized']['length'] > bound * report['path_length'] * (1 + self.tol) + self.tol:
                self.alarm.trigger_alarm('realize', 'Realisierung ueber alpha * Laenge')
        writer.emit_json(report)

    def _cmd_distortion(self, args, writer):
        me = self._embedding(args.input)
        seed = self._require_seed(args, 'distortion')
        dist = self.settings.section('distortion')
        sampler = PathSampler(args.sampler or ('walk' if me.kind == 'star' else dist['sampler']),
                              args.length if args.length is not None else dist['walk_length'],
                              args.neighbors if args.neighbors is not None else dist['neighbors'])
        trials = TrialLogger(args.csv)
        stats = distortion_stats(me, sampler, args.trials, seed, trials, self.jobs, self.tol)
        if args.csv:
            trials.flush()
            writer.written.append(args.csv)
        self.alarm.check_report('distortion', stats)
        writer.emit_json(stats)

    def _cmd_lowerbound(self, args, writer):
        if args.input:
            me = self._embedding(args.input)
        else:
            if args.n is None:
                raise InputError('lowerbound braucht -i oder --n')
            me = build_ultrametric_embedding(from_graph(generate('path', n=args.n)), args.t, tol=self.tol)
        report = lower_bound_check(me, self.tol)
        self.alarm.check_report('lowerbound', report)
        writer.emit_json(report)

    def _gst_instance(self, args):
        self.inputs.append(args.input)
        return gst.GstInstance.load(args.input)

    def _gst_seeds(self, args):
        return self._prob_seeds(args) if args.via == 'prob' else None

    def _cmd_gst_reduce(self, args, writer):
        inst = self._gst_instance(args)
        me = gst.build_embedding(inst.space, args.via, args.t, args.s, self._gst_seeds(args))
        reduced = gst.reduce_gst(me, inst)
        writer.emit_json({'embedding': me.to_json(), 'groups': [list(g) for g in reduced.groups]})

    def _cmd_gst_solve(self, args, writer):
        inst = self._gst_instance(args)
        budgets = self.settings.section('budgets')
        report = gst.run_pipeline(inst, args.via, args.t, args.s, self._gst_seeds(args), args.oracle,
                                  tree_budget=budgets['tree_groups'],
                                  oracle_budget=budgets['oracle_choices'],
                                  oracle_vertices=budgets['oracle_vertices'], tol=self.tol)
        self.alarm.check_report('gst', report)
        writer.emit_json(report)

    def _cmd_gst_oracle(self, args, writer):
        inst = self._gst_instance(args)
        budgets = self.settings.section('budgets')
        sol = gst.exact_oracle(inst, budgets['oracle_choices'], budgets['oracle_vertices'])
        writer.emit_json(gst.solution_json(sol))

    def _cmd_mts_gen(self, args, writer):
        space = as_metric(self._space(args.input))
        seed = self._require_seed(args, 'mts gen')
        tasks = mts.random_tasks(space.n, args.m, seed, inf_share=args.inf_share)
        writer.emit_json(mts.MtsInstance(space, tasks.tolist(), args.start).to_json())

    def _cmd_mts_run(self, args, writer):
        self.inputs.append(args.input)
        inst = mts.MtsInstance.load(args.input)
        if args.via == 'prob':
            seeds = self._prob_seeds(args)
            me = union_under_root(sample_embeddings(inst.space, seeds, self.jobs))
        else:
            me = build_ultrametric_embedding(inst.space, args.t, tol=self.tol)
        report = mts.run_experiment(me, inst, self.tol)
        if args.brute_force:
            brute, _ = mts.brute_force_opt(inst)
            report['brute_force_opt'] = brute
            if abs(brute - report['source_opt']) > self.tol * max(1.0, brute):
                report['violations'].append('offline_opt')
                report['holds'] = False
        self.alarm.check_report('mts', report)
        writer.emit_json(report)

    def _cmd_prob_sample(self, args, writer):
        m = as_metric(self._space(args.input))
        sample = sample_embeddings(m, self._prob_seeds(args), self.jobs)
        embeddings = [single_tree_embedding(tree, m, seed) for tree, seed in zip(sample.trees, sample.seeds)]
        writer.emit_json({'seeds': sample.seeds, 'samples': [me.to_json() for me in embeddings]})

    def _cmd_prob_union(self, args, writer):
        self.inputs.append(args.input)
        with open(args.input, 'r') as f:
            data = json.load(f)
        samples = [MultiEmbedding.from_json(item) for item in data['samples']]
        writer.emit_json(union_under_root(samples).to_json())


def _add_io(p, output=True):
    p.add_argument('-i', '--input', required=True, help='Eingabedatei')
    if output:
        p.add_argument('-o', '--output', help='Ausgabedatei (sonst stdout)')


def _add_embedding_choice(p, default='ultra'):
    p.add_argument('--via', choices=('ultra', 'star', 'prob'), default=default)
    p.add_argument('--t', type=int, default=1)
    p.add_argument('--s', type=int)
    p.add_argument('--seed', type=int)
    p.add_argument('--samples', type=int, default=8)


def build_parser():
    parser = argparse.ArgumentParser(prog='main.py', description='Multi-Einbettungen endlicher Metriken')
    parser.add_argument('--config', default='config.json')
    parser.add_argument('--log-level')
    parser.add_argument('--jobs', type=int, default=1)
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('gen', help='Benchmark-Metrik oder -Graph erzeugen')
    p.add_argument('--kind', choices=KINDS, required=True)
    p.add_argument('--n', type=int)
    p.add_argument('--deg', type=int)
    p.add_argument('--h', type=int)
    p.add_argument('--seed', type=int)
    p.add_argument('--graph', action='store_true', help='Graph statt Metrik schreiben')
    p.add_argument('-o', '--output')

    p = sub.add_parser('embed', help='Multi-Einbettung bauen')
    p.add_argument('via', choices=('ultra', 'star', 'prob'))
    _add_io(p)
    p.add_argument('--t', type=int, default=1)
    p.add_argument('--beta', type=float, help='Groessenexponent > 1 statt --t (kleinstes passendes t)')
    p.add_argument('--s', type=int)
    p.add_argument('--seed', type=int)
    p.add_argument('--samples', type=int, default=8)
    p.add_argument('--trace', help='Konstruktionsprotokoll (nur ultra) in diese Datei')

    p = sub.add_parser('audit', help='Metrik oder Einbettung pruefen')
    _add_io(p)
    p.add_argument('--seed', type=int)

    p = sub.add_parser('realize', help='Repraesentantenpfad berechnen')
    _add_io(p)
    p.add_argument('--path', type=int, nargs='+', required=True)
    p.add_argument('--brute-force', action='store_true')

    p = sub.add_parser('distortion', help='Pfadverzerrung messen')
    _add_io(p)
    p.add_argument('--trials', type=int, default=10)
    p.add_argument('--seed', type=int)
    p.add_argument('--sampler', choices=SAMPLERS)
    p.add_argument('--length', type=int)
    p.add_argument('--neighbors', type=int)
    p.add_argument('--csv', help='Tabelle pro Versuch')

    p = sub.add_parser('lowerbound', help='Untere Schranke auf P_n pruefen')
    p.add_argument('-i', '--input')
    p.add_argument('--n', type=int)
    p.add_argument('--t', type=int, default=1)
    p.add_argument('-o', '--output')

    p = sub.add_parser('gst', help='Group Steiner Tree')
    gsub = p.add_subparsers(dest='action', required=True)
    for action in ('reduce', 'solve'):
        q = gsub.add_parser(action)
        _add_io(q)
        _add_embedding_choice(q)
        if action == 'solve':
            q.add_argument('--oracle', action='store_true')
    q = gsub.add_parser('oracle')
    _add_io(q)

    p = sub.add_parser('mts', help='Metrische Task-Systeme')
    msub = p.add_subparsers(dest='action', required=True)
    q = msub.add_parser('run')
    _add_io(q)
    q.add_argument('--via', choices=('ultra', 'prob'), default='ultra')
    q.add_argument('--t', type=int, default=1)
    q.add_argument('--seed', type=int)
    q.add_argument('--samples', type=int, default=8)
    q.add_argument('--brute-force', action='store_true')
    q = msub.add_parser('gen')
    _add_io(q)
    q.add_argument('--m', type=int, required=True)
    q.add_argument('--seed', type=int)
    q.add_argument('--start', type=int, default=0)
    q.add_argument('--inf-share', type=float, default=0.0)

    p = sub.add_parser('prob', help='Zufallsbaeume ziehen und vereinigen')
    psub = p.add_subparsers(dest='action', required=True)
    q = psub.add_parser('sample')
    _add_io(q)
    q.add_argument('--seed', type=int)
    q.add_argument('--samples', type=int, default=8)
    q = psub.add_parser('union')
    _add_io(q)

    p = sub.add_parser('replay', help='Lauf aus einem Manifest wiederholen')
    p.add_argument('-i', '--input', required=True)
    return parser


def _command_name(args):
    action = getattr(args, 'action', None)
    return args.command + (' ' + action if action else '')


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    settings = Settings.load(args.config)
    setup_logging(args.log_level or settings.get('logging', 'level', 'INFO'))
    if args.command == 'replay':
        try:
            manifest = load_manifest(args.input)
        except (OSError, ValueError) as e:
            log.error('Manifest nicht lesbar: %s', e)
            return EXIT_USAGE
        log.info('Wiederhole %s', manifest['command'])
        return main(manifest['argv'])
    command = _command_name(args)
    args.command = command
    controller = ToolkitController(settings, args.jobs)
    writer = ReportWriter(getattr(args, 'output', None))
    started = time.perf_counter()
    try:
        controller.run(args, writer)
    except ConsistencyError as e:
        log.error('Interne Invariante verletzt: %s', e)
        return EXIT_FALSIFIED
    except (EmbeddingError, OSError, ValueError, KeyError) as e:
        log.error('%s: %s', type(e).__name__, e)
        return EXIT_USAGE
    params = {k: v for k, v in vars(args).items() if k not in ('command', 'action')}
    writer.write_manifest(command, argv, params, controller.seeds, controller.inputs,
                          settings.version, round(time.perf_counter() - started, 3))
    return controller.alarm.exit_code()


if __name__ == '__main__':
    sys.exit(main())
