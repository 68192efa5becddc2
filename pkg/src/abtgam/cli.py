"""Command line: compile, run, compose, equiv and fixtures.

Text output is split into sections introduced by ``=== name ===`` lines.
``run`` can also draw the multiplexed trees Φ and Ψ to PNG files.

Exit codes: 0 answer, 1 free answer, 2 blocked, 3 fuel exhausted (``run``
and ``compose``); ``equiv`` and ``fixtures check`` return 0 iff everything
agrees.  64 is a usage error, 65 a bad input program, 66 a missing file.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path

from .extensions import (InteractiveDriver, ScriptDriver, readback_composition,
                         show_composite, show_lambda_readback, strong_exhaustive,
                         strong_run)
from .frontends import FRONTENDS, load_program
from .machines import (eam_run, gam_run, phi_psi, render_trees, sam_run,
                       vam_run)
from .syntax import AbtError, parse_move, show_forest, show_strategy

EX_USAGE, EX_DATAERR, EX_NOINPUT = 64, 65, 66
MACHINES = ('gam', 'vam', 'sam', 'eam')


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f'{self.prog}: error: {message}', file=sys.stderr)
        raise SystemExit(EX_USAGE)


# ----------------------------------------------------------------------------
# Output helpers

class Report:
    """Collects delimited text sections, or a JSON object."""

    def __init__(self, fmt):
        self.fmt = fmt
        self.sections = []
        self.data = {}

    def section(self, name, body, value=None):
        self.sections.append((name, body))
        self.data[name] = body if value is None else value

    def render(self):
        if self.fmt == 'json':
            return json.dumps(self.data, ensure_ascii=False, indent=2) + '\n'
        out = []
        for name, body in self.sections:
            out.append(f'=== {name} ===')
            if body:
                out.append(body)
        return '\n'.join(out) + '\n'


def _read(path):
    if path == '-':
        return sys.stdin.read()
    return Path(path).read_text(encoding='utf-8')


def _load(args):
    frontend = args.frontend
    if getattr(args, 'star', False):
        if frontend == 'lambda':
            frontend = 'lambda-star'
        elif frontend != 'lambda-star':
            raise UsageError('--star needs the lambda frontend')
    prog = load_program(_read(args.file), frontend)
    if getattr(args, 'star', False) and (prog.counter or prog.more):
        raise UsageError('--star takes a single strategy, no counter-strategy')
    return prog, frontend


def _eta_mode(args):
    if not args.eta:
        return False
    if args.eta == 'arity' and args.frontend not in ('lambda', 'abt'):
        raise UsageError('--eta needs an arity-annotated frontend (lambda or abt)')
    return True if args.eta == 'arity' else 'fax'


def _trace_text(trace):
    return '\n'.join(str(s) for s in trace)


def _trees_section(rep, items, termination=None):
    # A blocked query never got an answer, so the trees stop at the last
    # player move.
    if termination is not None and termination.kind == 'blocked' and termination.query:
        items = items[:-1]
    phi, psi = phi_psi(items)
    rep.section('phi', render_trees(phi), [t.render() for t in phi])
    rep.section('psi', render_trees(psi), [t.render() for t in psi])
    return phi, psi


# ----------------------------------------------------------------------------
# Figures

def _layout(tree, x0, depth, out):
    kids = sorted(tree.kids.values(), key=lambda t: t.key())
    if not kids:
        out.append((tree, x0, depth))
        return x0 + 1, x0
    xs = []
    x = x0
    for k in kids:
        x, kx = _layout(k, x, depth + 1, out)
        xs.append(kx)
    mid = (xs[0] + xs[-1]) / 2
    out.append((tree, mid, depth))
    return x, mid


def draw_trees(trees, path, title):
    """Node-link drawing of multiplexed trees; dashed arcs are pointers."""
    import matplotlib
    matplotlib.use('Agg')
    import matplotlib.pyplot as plt

    placed, parent, x = [], {}, 0
    for t in trees:
        spot = []
        x, _ = _layout(t, x, 0, spot)
        x += 0.5
        placed.extend(spot)
        stack = [t]
        while stack:
            n = stack.pop()
            for c in n.kids.values():
                parent[id(c)] = n
                stack.append(c)
    pos = {id(n): (px, -d) for n, px, d in placed}
    width = max(4.0, 1.6 * max((p[0] for p in pos.values()), default=1) + 2)
    height = max(2.5, 1.1 * max((-p[1] for p in pos.values()), default=0) + 2)
    fig, ax = plt.subplots(figsize=(width, height))
    for n, px, d in placed:
        p = parent.get(id(n))
        if p is not None:
            qx, qy = pos[id(p)]
            ax.plot([qx, px], [qy, -d], color='0.4', lw=1, zorder=1)
        label = str(n.opp) + ('' if n.pl is None else ' ' + str(n.pl))
        ax.text(px, -d, label, ha='center', va='center', fontsize=9, zorder=3,
                bbox=dict(boxstyle='round', fc='white', ec='0.3'))
        k = None if n.pl is None else n.pl.ptr
        if isinstance(k, int) and k > 0:
            target = n
            for _ in range(k):
                target = parent.get(id(target), target)
            tx, ty = pos[id(target)]
            ax.annotate('', xy=(tx + 0.15, ty - 0.15), xytext=(px + 0.15, -d + 0.15),
                        arrowprops=dict(arrowstyle='->', ls='--', color='tab:blue',
                                        connectionstyle='arc3,rad=-0.4'), zorder=2)
    ax.set_title(title)
    ax.set_axis_off()
    ax.margins(0.15)
    fig.savefig(path, dpi=120, bbox_inches='tight')
    plt.close(fig)


# ----------------------------------------------------------------------------
# Commands

def _probe_moves(numbers):
    """Moves tried on lazily generated branches when printing."""
    from .syntax import Cbv, Num
    out = [Num(n) for n in numbers]
    for pol in '?!':
        out.extend(Cbv(pol, n) for n in numbers)
    return out


def _force(node, moves, depth=8):
    if depth <= 0:
        return
    if node.gen is not None:
        for b in moves:
            node.child(b)
    for _, c in node.materialized():
        _force(c, moves, depth - 1)


def _probe(prog, numbers):
    """Materialize generated branches (and generated roots) for the given
    numerals, so that a finite slice of an infinite tree can be shown."""
    from .syntax import Cbv, CounterStrategy
    moves = _probe_moves(numbers)
    phi, psi = prog.strategy(), prog.forest()
    if getattr(psi, 'gen', None) is not None:
        names = sorted({x for x, _ in (prog.bindings or ()) if isinstance(x, str)})
        found = dict(dict.items(psi))
        for x in names:
            for n in numbers:
                t = psi.get(Cbv('?', n, x))
                if t is not None:
                    found[Cbv('?', n, x)] = t
        psi = CounterStrategy(found.items())
    _force(phi, moves)
    for _, t in dict.items(psi):
        _force(t, moves)
    return phi, psi


def cmd_compile(args, out):
    from .syntax import compile_forest
    prog, frontend = _load(args)
    if args.probe:
        numbers = [int(n) for n in args.probe.split(',') if n.strip()]
        phi, psi = _probe(prog, numbers)
    else:
        phi, psi = prog.strategy(), prog.forest()
    rep = Report(args.format)
    rep.section('strategy', show_strategy(phi, args.superscripts))
    rep.section('counter-strategy', show_forest(psi, args.superscripts))
    for i, f in enumerate(prog.more, 2):
        rep.section(f'level {i}', show_forest(compile_forest(f), args.superscripts))
    out.write(rep.render())
    return 0


def _run_machine(prog, machine, fuel, star, eta):
    if prog.more and machine != 'gam':
        raise UsageError('multi-level programs only run on the gam')
    if eta and machine != 'gam':
        raise UsageError('--eta is only available on the gam')
    if machine == 'gam':
        return gam_run(levels=prog.levels(), fuel=fuel, star=star, eta=eta)
    if machine == 'vam':
        return vam_run(levels=prog.levels(), fuel=fuel, star=star)
    if machine == 'sam':
        return sam_run(levels=prog.levels(), fuel=fuel, star=star)
    return eam_run(prog.main, prog.counter, fuel=fuel, star=star)


def cmd_run(args, out):
    prog, frontend = _load(args)
    eta = _eta_mode(args)
    mode = 'star' if args.star else ('eta' if eta else 'plain')
    r = _run_machine(prog, args.machine, args.max_steps, args.star, eta)
    rep = Report(args.format)
    rep.section('program', f'frontend: {frontend}\nmachine: {args.machine}\nmode: {mode}',
                {'frontend': frontend, 'machine': args.machine, 'mode': mode})
    if args.trace:
        rep.section('trace', _trace_text(r.trace), [s.to_json() for s in r.trace])
    rep.section('termination', str(r.termination), r.termination.to_json())
    if args.machine == 'gam':
        phi, psi = _trees_section(rep, r.state.items, r.termination)
        if args.figures:
            d = Path(args.figures)
            d.mkdir(parents=True, exist_ok=True)
            paths = [d / 'phi.png', d / 'psi.png']
            draw_trees(phi, paths[0], 'Φ')
            draw_trees(psi, paths[1], 'Ψ')
            rep.section('figures', '\n'.join(map(str, paths)), [str(p) for p in paths])
    out.write(rep.render())
    return r.termination.exit_code


def _driver(spec):
    if spec == 'interactive':
        return 'run', InteractiveDriver()
    kind, _, arg = spec.partition(':')
    if kind == 'script' and arg:
        toks = [t.strip() for t in _read(arg).splitlines()]
        return 'run', ScriptDriver([parse_move(t) for t in toks if t])
    if kind == 'exhaustive' and arg.isdigit():
        return 'exhaustive', int(arg)
    raise UsageError(f'bad driver {spec!r}')


def cmd_compose(args, out):
    if not args.strong:
        raise UsageError('compose needs --strong')
    prog, frontend = _load(args)
    eta = _eta_mode(args)
    kind, driver = _driver(args.driver)
    rep = Report(args.format)
    shown = args.driver
    if shown.startswith('script:'):
        shown = 'script:' + Path(shown[7:]).name
    rep.section('program', f'frontend: {frontend}\ndriver: {shown}',
                {'frontend': frontend, 'driver': shown})
    levels = prog.levels()
    code, term = 0, None
    if kind == 'exhaustive':
        comps = strong_exhaustive(levels=levels, depth=driver, fuel=args.max_steps, eta=eta)
    else:
        r = strong_run(levels=levels, driver=driver, fuel=args.max_steps, eta=eta)
        comps, term = r.responses, r.outcome
        if args.trace:
            rep.section('trace', _trace_text(r.trace), [s.to_json() for s in r.trace])
        _trees_section(rep, r.state.gam.items, r.termination)
    rep.section('composite', '\n'.join(show_composite(c) for c in comps),
                [show_composite(c) for c in comps])
    if comps:
        back = readback_composition(comps)
        rep.section('readback', show_strategy(back))
        rep.section('lambda', show_lambda_readback(back))
    if term is not None:
        rep.section('termination', str(term), term.to_json())
        code = term.exit_code
    out.write(rep.render())
    return code


def cmd_equiv(args, out):
    from .equivalence import check_lockstep, random_pair
    machines = tuple(m for m in args.machines.split(',') if m)
    if any(m not in MACHINES for m in machines):
        raise UsageError(f'unknown machine in {args.machines!r}')
    reports = []
    if args.file:
        prog, _ = _load(args)
        if prog.more:
            raise UsageError('multi-level programs only run on the gam')
        counter = {} if args.star else prog.counter
        psi = None if args.star else prog.forest()
        reports.append(check_lockstep(prog.strategy(), psi, machines, args.max_steps,
                                      star=args.star, concrete=(prog.main, counter)))
    rng = random.Random(args.seed)
    for _ in range(args.random):
        seed = rng.randrange(2 ** 32)
        phi, psi = random_pair(seed)
        rep = check_lockstep(phi, psi, machines, args.max_steps)
        rep.seed = seed
        reports.append(rep)
    bad = [r for r in reports if not r.ok]
    body = {'cases': len(reports), 'ok': not bad,
            'reports': [r.to_json() for r in (reports if args.file and not args.random
                                              else bad)]}
    out.write(json.dumps(body, ensure_ascii=False, indent=2) + '\n')
    return 0 if not bad else 1


# ----------------------------------------------------------------------------
# Fixtures: fixtures/<name>/{meta.json, program.txt, figure.txt, golden.txt}
#
# golden.txt is the text output of the command recorded in meta.json.
# figure.txt holds hand-transcribed expected trees in the same sectioned
# layout; its trees are compared structurally.

def default_root():
    here = Path.cwd() / 'fixtures'
    if here.is_dir():
        return here
    return Path(__file__).resolve().parents[2] / 'fixtures'


def fixture_names(root):
    return sorted(p.parent.name for p in Path(root).glob('*/meta.json'))


def load_meta(root, name):
    return json.loads((Path(root) / name / 'meta.json').read_text(encoding='utf-8'))


def fixture_output(root, name):
    import io
    meta = load_meta(root, name)
    d = Path(root) / name
    args = [a.replace('{dir}', str(d)) for a in meta['args']]
    buf = io.StringIO()
    code = main([meta['command'], str(d / meta.get('program', 'program.txt')), *args], buf)
    return code, buf.getvalue()


def split_sections(text):
    out, cur = {}, None
    for line in text.splitlines():
        if line.startswith('=== ') and line.endswith(' ==='):
            cur = line[4:-4]
            out[cur] = []
        elif cur is not None:
            out[cur].append(line)
    return {k: '\n'.join(v) for k, v in out.items()}


def _figure_problems(figure, produced):
    from .machines import parse_mtrees
    problems = []
    for sec, want in split_sections(figure).items():
        got = produced.get(sec)
        if got is None:
            problems.append(f'figure section {sec!r} missing from output')
        elif sec in ('phi', 'psi'):
            if sorted(parse_mtrees(want)) != sorted(parse_mtrees(got)):
                problems.append(f'{sec} trees differ from the figure')
        elif sec == 'lambda':
            wanted = show_strategy(load_program(want, 'lambda').strategy())
            if wanted != produced.get('readback'):
                problems.append(f'readback differs from {want.strip()}')
        elif want.strip() != got.strip():
            problems.append(f'{sec}: expected {want.strip()!r}, got {got.strip()!r}')
    return problems


def check(root, name):
    meta = load_meta(root, name)
    d = Path(root) / name
    code, text = fixture_output(root, name)
    problems = []
    if code != meta.get('exit', code):
        problems.append(f'exit code {code}, expected {meta["exit"]}')
    golden = d / 'golden.txt'
    if not golden.exists():
        problems.append('golden.txt missing')
    elif golden.read_text(encoding='utf-8') != text:
        problems.append('output differs from golden.txt')
    fig = d / 'figure.txt'
    if fig.exists():
        problems += _figure_problems(fig.read_text(encoding='utf-8'), split_sections(text))
    return problems


def regen(root, name):
    _, text = fixture_output(root, name)
    (Path(root) / name / 'golden.txt').write_text(text, encoding='utf-8')


def cmd_fixtures(args, out):
    root = Path(args.root) if args.root else default_root()
    names = args.names or fixture_names(root)
    if args.action == 'list':
        for n in names:
            out.write(f'{n}\n')
        return 0
    failed = 0
    for n in names:
        if args.action == 'regen':
            regen(root, n)
            out.write(f'{n}: written\n')
            continue
        problems = check(root, n)
        failed += bool(problems)
        out.write(f'{n}: {"ok" if not problems else "FAIL"}\n')
        for p in problems:
            out.write(f'  {p}\n')
    return 1 if failed else 0


# ----------------------------------------------------------------------------
# Argument parsing

def build_parser():
    p = _Parser(prog='abtgam', description='Abstract Böhm trees and their machines.')
    sub = p.add_subparsers(dest='command', required=True, parser_class=_Parser)

    def common(sp, file_required=True):
        sp.add_argument('file', nargs=None if file_required else '?',
                        help="program file, '-' for stdin")
        sp.add_argument('--frontend', default='lambda', choices=sorted(FRONTENDS))
        sp.add_argument('--format', default='text', choices=('text', 'json'))
        sp.add_argument('--max-steps', type=int, default=100000, metavar='N')

    c = sub.add_parser('compile', help='print the compiled strategy and counter-strategy')
    common(c)
    c.add_argument('--star', action='store_true')
    c.add_argument('--superscripts', action='store_true', help='show arity superscripts')
    c.add_argument('--probe', metavar='N,N,...',
                   help='numerals to try on lazily generated branches')
    c.set_defaults(func=cmd_compile)

    r = sub.add_parser('run', help='run a weak machine')
    common(r)
    r.add_argument('--machine', default='gam', choices=MACHINES)
    r.add_argument('--star', action='store_true', help='non-normal term, single strategy')
    r.add_argument('--eta', nargs='?', const='arity', choices=('arity', 'fax'),
                   help='dynamic eta expansion (gam only)')
    r.add_argument('--no-trace', dest='trace', action='store_false')
    r.add_argument('--figures', metavar='DIR', help='write phi.png and psi.png here')
    r.set_defaults(func=cmd_run)

    s = sub.add_parser('compose', help='strong composition and readback')
    common(s)
    s.add_argument('--strong', action='store_true')
    s.add_argument('--driver', default='exhaustive:3',
                   help='script:<file> | interactive | exhaustive:<depth>')
    s.add_argument('--eta', nargs='?', const='arity', choices=('arity', 'fax'))
    s.add_argument('--no-trace', dest='trace', action='store_false')
    s.set_defaults(func=cmd_compose, star=False)

    e = sub.add_parser('equiv', help='lock-step machine equivalence report (JSON)')
    common(e, file_required=False)
    e.add_argument('--star', action='store_true')
    e.add_argument('--machines', default=','.join(MACHINES))
    e.add_argument('--random', type=int, default=0, metavar='N',
                   help='also check N random finite pairs')
    e.add_argument('--seed', type=int, default=0)
    e.set_defaults(func=cmd_equiv)

    f = sub.add_parser('fixtures', help='list, check or regenerate golden fixtures')
    f.add_argument('action', choices=('list', 'check', 'regen'))
    f.add_argument('names', nargs='*')
    f.add_argument('--root', help='fixtures directory')
    f.set_defaults(func=cmd_fixtures)
    return p


def main(argv=None, out=None):
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    if args.command == 'equiv' and not args.file and not args.random:
        print('abtgam: error: equiv needs a file or --random N', file=sys.stderr)
        return EX_USAGE
    try:
        return args.func(args, out)
    except UsageError as e:
        print(f'abtgam: error: {e}', file=sys.stderr)
        return EX_USAGE
    except FileNotFoundError as e:
        print(f'abtgam: error: {e}', file=sys.stderr)
        return EX_NOINPUT
    except AbtError as e:
        print(f'abtgam: error: {type(e).__name__}: {e}', file=sys.stderr)
        return EX_DATAERR


if __name__ == '__main__':
    sys.exit(main())
