"""Source languages and their compilation to abstract Bohm trees.

Five frontends: untyped lambda terms (normal forms, plus redexes for the
star pipeline), Pcf trees, classical Pcf trees, classical call-by-value
trees and ludics designs.  Each has a lark grammar, a compiler to the
concrete syntax of ``syntax.Abs``/``syntax.Code`` and, for the last three, a
source-level reference machine used as a differential oracle.

Every program text is ``main [name <- term, ...]``: the bracketed bindings
form the counter-strategy.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

from lark import Lark, Token, Transformer, v_args
from lark.exceptions import LarkError, VisitError

from .syntax import (DAIMON, OMEGA, STAR, Abs, AbtError, Cbv, Code, Const,
                     LazyMap, LudicsPair, Num, ParseError,
                     Special, Sym, compile_ca, compile_forest)


class NotNormalForm(AbtError):
    pass


class UnboundName(AbtError):
    pass


class MissingTypeAnnotation(AbtError):
    pass


class TypeMismatch(AbtError):
    pass


class StuckState(AbtError):
    pass


class FuelExhausted(AbtError):
    pass


@dataclass
class Program:
    """A compiled program: the main term and its counter-strategy, in concrete
    syntax.  ``levels`` holds further counter-strategies for multi-hop runs."""
    main: Abs
    counter: LazyMap = field(default_factory=LazyMap)
    source: object = None
    bindings: object = None
    more: list = field(default_factory=list)

    def strategy(self):
        return compile_ca(self.main)

    def forest(self):
        return compile_forest(self.counter)

    def levels(self):
        from .machines import make_levels
        return make_levels(self.strategy(), self.forest(),
                           [compile_forest(f) for f in self.more])


class _Fresh:
    def __init__(self, prefix='x'):
        self.prefix, self.k = prefix, itertools.count(1)

    def __call__(self):
        return f'{self.prefix}{next(self.k)}'


def _parse(parser, text, what):
    try:
        return parser.parse(text)
    except LarkError as e:
        raise ParseError(f'{what}: {e}') from None


def _transform(transformer, parser, text, what):
    """Parse and transform, surfacing errors raised inside the transformer."""
    tree = _parse(parser, text, what)
    try:
        return transformer.transform(tree)
    except VisitError as e:
        if isinstance(e.orig_exc, AbtError):
            raise e.orig_exc from None
        raise


_COMMON = r'''
    %import common.WS
    %ignore WS
    %ignore /;[^\n]*/
    ARROW: "<-" | "←"
    LAMBDA: "λ" | "\\"
    INT: /\d+/
'''

# ----------------------------------------------------------------------------
# Lambda terms

@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Lam:
    var: str
    body: object


@dataclass(frozen=True)
class App:
    fun: object
    arg: object


def lams(vs, body):
    for v in reversed(vs):
        body = Lam(v, body)
    return body


def apps(f, *args):
    for a in args:
        f = App(f, a)
    return f


def show_lambda(t):
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Lam):
        vs, b = [], t
        while isinstance(b, Lam):
            vs.append(b.var)
            b = b.body
        return f'λ{" ".join(vs)}.{show_lambda(b)}'
    h, args = spine(t)
    hs = show_lambda(h)
    if not isinstance(h, Var):
        hs = f'({hs})'
    return hs + ''.join(f'({show_lambda(a)})' for a in args)


def spine(t):
    args = []
    while isinstance(t, App):
        args.append(t.arg)
        t = t.fun
    return t, args[::-1]


def lam_block(t):
    vs = []
    while isinstance(t, Lam):
        vs.append(t.var)
        t = t.body
    return vs, t


LAMBDA_GRAMMAR = r'''
    start: term bindings*
    bindings: "[" bind ("," bind)* "]"
    bind: NAME ARROW term
    ?term: lam | letin | app
    lam: LAMBDA NAME+ "." term
    letin: "let" NAME "=" term "in" term
    app: atom+
    ?atom: NAME -> var
         | "(" term ")"
    NAME: /(?!(let|in)\b)[^\W\d_λ][\w']*|[Ω✠]/
''' + _COMMON


@v_args(inline=True)
class _LambdaT(Transformer):
    def var(self, n):
        return Var(str(n))

    def lam(self, _l, *rest):
        *vs, body = rest
        return lams([str(v) for v in vs], body)

    def letin(self, x, m, n):
        return App(Lam(str(x), n), m)

    def app(self, *xs):
        return apps(*xs)

    def bind(self, n, _a, t):
        return (str(n), t)

    def bindings(self, *bs):
        return list(bs)

    def start(self, t, *groups):
        return t, list(groups)


_lambda_parser = Lark(LAMBDA_GRAMMAR, parser='earley')


def parse_lambda_levels(text):
    """Returns (term, [[(name, term), ...], ...]), one group per level."""
    return _transform(_LambdaT(), _lambda_parser, text, 'lambda')


def parse_lambda(text):
    """Returns (term, [(name, term), ...]) for a single binding group."""
    t, groups = parse_lambda_levels(text)
    if len(groups) > 1:
        raise ParseError('several binding groups; use parse_lambda_levels')
    return t, (groups[0] if groups else [])


def parse_lambda_term(text):
    t, groups = parse_lambda_levels(text)
    if groups:
        raise ParseError('unexpected bindings')
    return t


_SPECIAL_NAMES = {'Ω': OMEGA, '✠': DAIMON}


def _head_move(name):
    return _SPECIAL_NAMES.get(name, Sym(name))


def compile_bohm(t, star=False, fresh=None, env=None):
    """Lambda term to concrete syntax, recording the eta superscripts.

    Bound occurrences become ``[i|x]`` with x the binder of the lambda block
    declaring the variable.  With ``star`` a redex head becomes ``[⋆|_]``
    with the function under the ⋆ branch."""
    fresh = fresh or _Fresh()
    return _bohm(t, dict(env or {}), star, fresh)


def _bohm(t, env, star, fresh):
    vs, body = lam_block(t)
    tok = fresh() if vs else None
    env = dict(env)
    for i, v in enumerate(vs):
        env[v] = (tok, i + 1)
    head, args = spine(body)
    branches = [(Num(k + 1), _bohm(a, env, star, fresh)) for k, a in enumerate(args)]
    if isinstance(head, Var):
        if head.name in env:
            b, i = env[head.name]
            code = Code(Num(i), b, branches, arity=len(args))
        else:
            code = Code(_head_move(head.name), None, branches, arity=len(args))
    elif star:
        branches.append((STAR, _bohm(head, env, star, fresh)))
        code = Code(STAR, None, branches, arity=len(args))
    else:
        raise NotNormalForm(f'redex at {show_lambda(body)}')
    return Abs(tok, code, nbind=len(vs))


def compile_lambda_star(t, fresh=None):
    return compile_bohm(t, star=True, fresh=fresh)


def lambda_program(text, star=False):
    """Further binding groups after the first give the extra levels used by
    multi-hop runs (a free move of level k hooks onto a root of level k+1)."""
    t, groups = parse_lambda_levels(text)
    fresh = _Fresh()
    main = compile_bohm(t, star, fresh)
    forests = [LazyMap([(_head_move(x), compile_bohm(n, star, fresh)) for x, n in bs])
               for bs in groups]
    counter = forests[0] if forests else LazyMap()
    return Program(main, counter, t, groups[0] if groups else [], forests[1:])


def free_vars(t):
    if isinstance(t, Var):
        return {t.name}
    if isinstance(t, Lam):
        return free_vars(t.body) - {t.var}
    return free_vars(t.fun) | free_vars(t.arg)


# ----------------------------------------------------------------------------
# Pcf trees

@dataclass(frozen=True)
class PcfB:
    vars: tuple
    body: object


@dataclass(frozen=True)
class PcfCase:
    head: str
    args: tuple
    branches: tuple   # ((const, PcfB), ...)


@dataclass(frozen=True)
class PcfConst:
    value: str


PCF_GRAMMAR = r'''
    start: b bindings?
    bindings: "[" bind ("," bind)* "]"
    bind: NAME ARROW b
    b: LAMBDA NAME+ "." p -> blam
     | p -> bplain
    ?p: "case"? NAME arg* cases? -> pcase
      | CONST -> pconst
    cases: "[" case ("," case)* "]"
    case: CONST ("=>" | "⇒") b
    ?arg: NAME -> avar
        | CONST -> aconst
        | "(" b ")"
    CONST.2: /(tt|ff)\b/ | INT
    NAME: /(?!(case|tt|ff)\b)[^\W\d_λ][\w']*/
''' + _COMMON


@v_args(inline=True)
class _PcfT(Transformer):
    def blam(self, _l, *rest):
        *vs, p = rest
        return PcfB(tuple(str(v) for v in vs), p)

    def bplain(self, p):
        return PcfB((), p)

    def pcase(self, head, *rest):
        cases = ()
        if rest and isinstance(rest[-1], tuple):
            cases, rest = rest[-1], rest[:-1]
        return PcfCase(str(head), tuple(rest), cases)

    def pconst(self, c):
        return PcfConst(str(c))

    def avar(self, n):
        return PcfB((), PcfCase(str(n), (), ()))

    def aconst(self, c):
        return PcfB((), PcfConst(str(c)))

    def cases(self, *cs):
        consts = [c for c, _ in cs]
        if len(set(consts)) != len(consts):
            raise ParseError('case constants must be distinct')
        return tuple(cs)

    def case(self, c, b):
        return (str(c), b)

    def bind(self, n, _a, t):
        return (str(n), t)

    def bindings(self, *bs):
        return list(bs)

    def start(self, t, bs=None):
        return t, bs or []


_pcf_parser = Lark(PCF_GRAMMAR, parser='earley')


def parse_pcf(text):
    try:
        return _transform(_PcfT(), _pcf_parser, text, 'pcf')
    except LarkError as e:
        raise ParseError(str(e)) from None


def compile_pcf(b, fresh=None, env=None, answer=None):
    """Pcf tree to concrete syntax.  A constant answers to the binder of the
    nearest enclosing tree that is not a case branch."""
    return _pcf_b(b, dict(env or {}), fresh or _Fresh(), answer)


def _pcf_b(b, env, fresh, answer):
    tok = fresh()
    env = dict(env)
    for i, v in enumerate(b.vars):
        env[v] = (tok, i + 1)
    ans = tok if answer is None else answer
    p = b.body
    if isinstance(p, PcfConst):
        return Abs(tok, Code(Const(p.value), ans), nbind=len(b.vars))
    branches = [(Num(k + 1), _pcf_b(a, env, fresh, None)) for k, a in enumerate(p.args)]
    branches += [(Const(c), _pcf_b(bb, env, fresh, ans)) for c, bb in p.branches]
    if p.head in env:
        bt, i = env[p.head]
        code = Code(Num(i), bt, branches, arity=len(p.args))
    else:
        code = Code(Sym(p.head), None, branches, arity=len(p.args))
    return Abs(tok, code, nbind=len(b.vars))


def pcf_program(text):
    b, bs = parse_pcf(text)
    fresh = _Fresh()
    counter = LazyMap([(Sym(x), compile_pcf(t, fresh)) for x, t in bs])
    return Program(compile_pcf(b, fresh), counter, b, bs)


# ----------------------------------------------------------------------------
# Classical Pcf trees

@dataclass(frozen=True)
class MuTerm:
    vars: tuple
    cont: str
    body: object


@dataclass(frozen=True)
class MuCase:
    head: str
    args: tuple
    branches: tuple   # ((n, command), ...)


@dataclass(frozen=True)
class MuRet:
    cont: str
    value: int


PCF_MU_GRAMMAR = r'''
    start: term bindings?
    bindings: "[" bind ("," bind)* "]"
    bind: NAME ARROW term
    term: (LAMBDA NAME+ ".")? MU NAME "." cmd
    ?cmd: "case" NAME targ* "[" [branch ("," branch)*] "]" -> mcase
        | "[" NAME "]" INT -> mret
    ?targ: "(" term ")"
    branch: INT ("->" | "→") cmd
    MU: "μ" | "mu"
    NAME: /(?!(case|mu)\b)[^\W\d_λμ][\w']*/
''' + _COMMON


@v_args(inline=True)
class _MuT(Transformer):
    def term(self, *xs):
        xs = [x for x in xs if not (isinstance(x, Token) and x.type in ('LAMBDA', 'MU'))]
        *vs, beta, body = xs
        return MuTerm(tuple(str(v) for v in vs), str(beta), body)

    def mcase(self, head, *rest):
        args = tuple(r for r in rest if isinstance(r, MuTerm))
        brs = tuple(r for r in rest if isinstance(r, tuple))
        return MuCase(str(head), args, brs)

    def branch(self, n, c):
        return (int(n), c)

    def mret(self, a, n):
        return MuRet(str(a), int(n))

    def bind(self, n, _a, t):
        return (str(n), t)

    def bindings(self, *bs):
        return list(bs)

    def start(self, t, bs=None):
        return t, bs or []


_mu_parser = Lark(PCF_MU_GRAMMAR, parser='earley')


def parse_classical_pcf(text):
    return _transform(_MuT(), _mu_parser, text, 'pcf-mu')


def compile_classical_pcf(m, rho=None, fresh=None):
    """Classical Pcf tree to concrete syntax.  Arguments become ``?i``
    branches, values ``!n`` branches.  A bound head ``x_i`` plays ``?i`` so
    that it meets the argument branches; ``[α]n`` with α free becomes the
    free pair move ``(!n,α)``."""
    return _mu_term(m, dict(rho or {}), fresh or _Fresh())


def _mu_term(m, rho, fresh):
    tok = fresh()
    rho = dict(rho)
    for i, v in enumerate(m.vars):
        rho[v] = (tok, i + 1)
    rho[m.cont] = tok
    return Abs(tok, _mu_cmd(m.body, rho, fresh), nbind=len(m.vars))


def _mu_cmd(c, rho, fresh):
    if isinstance(c, MuRet):
        b = rho.get(c.cont)
        if isinstance(b, str):
            return Code(Cbv('!', c.value), b)
        return Code(Cbv('!', c.value, c.cont), None)
    branches = [(Cbv('?', k + 1), _mu_term(a, rho, fresh)) for k, a in enumerate(c.args)]
    branches += [(Cbv('!', n), Abs(None, _mu_cmd(cc, rho, fresh))) for n, cc in c.branches]
    h = rho.get(c.head)
    if isinstance(h, tuple):
        return Code(Cbv('?', h[1]), h[0], branches)
    if isinstance(h, str):
        raise UnboundName(f'{c.head} is a continuation variable')
    return Code(Sym(c.head), None, branches)


def pcf_mu_program(text):
    m, bs = parse_classical_pcf(text)
    fresh = _Fresh()
    counter = LazyMap([(Sym(x), compile_classical_pcf(t, None, fresh)) for x, t in bs])
    return Program(compile_classical_pcf(m, None, fresh), counter, m, bs)


@dataclass(frozen=True)
class Observable:
    """Halting observable of a source machine.

    kind: 'answer' (value sent to the root continuation), 'deliver' (value
    sent to a free continuation), 'call' (a free function is called),
    'blocked', 'converge' or 'diverge'."""
    kind: str
    name: Optional[str] = None
    value: object = None

    def move(self):
        """The GAM observable this corresponds to."""
        if self.kind == 'answer':
            return Cbv('!', self.value)
        if self.kind == 'deliver':
            return Cbv('!', self.value, self.name)
        if self.kind == 'call':
            return Cbv('?', self.value, self.name)
        if self.kind == 'head':
            return Sym(self.name)
        if self.kind == 'converge':
            return DAIMON
        if self.kind == 'diverge':
            return OMEGA
        return None


_ROOT = object()


def run_classical_pcf(m, bindings=(), fuel=100000):
    """Source machine for classical Pcf trees, from ``⟨c, ρ⟩`` with the root
    continuation of m observable."""
    rho = {x: (t, {}) for x, t in bindings}
    rho[m.cont] = _ROOT
    c = m.body
    for _ in range(fuel):
        if isinstance(c, MuCase):
            clo = rho.get(c.head)
            if clo is None or clo is _ROOT:
                return Observable('head', c.head)
            t, rho2 = clo
            if len(t.vars) != len(c.args):
                return Observable('blocked', c.head)
            new = dict(rho2)
            for z, a in zip(t.vars, c.args):
                new[z] = (a, rho)
            new[t.cont] = (dict(c.branches), rho)
            c, rho = t.body, new
        else:
            k = rho.get(c.cont)
            if k is _ROOT:
                return Observable('answer', c.cont, c.value)
            if k is None:
                return Observable('deliver', c.cont, c.value)
            brs, rho2 = k
            if c.value not in brs:
                return Observable('blocked', c.cont, c.value)
            c, rho = brs[c.value], rho2
    raise FuelExhausted('classical Pcf machine out of fuel')


# ----------------------------------------------------------------------------
# Classical call-by-value trees

IOTA = 'ι'
BOT = '⊥'


@dataclass(frozen=True)
class Arrow:
    src: object
    dst: object

    def __str__(self):
        s = f'({self.src})' if isinstance(self.src, Arrow) else str(self.src)
        return f'{s}→{self.dst}'


@dataclass(frozen=True)
class VLam:
    z: str
    ztype: object
    beta: str
    btype: object
    body: object


@dataclass(frozen=True)
class VNum:
    n: int


@dataclass(frozen=True)
class VVar:
    name: str


@dataclass(frozen=True)
class VAdd:
    left: object
    right: object


@dataclass(frozen=True)
class CLet:
    x: str
    xtype: object
    y: str
    arg: object
    body: object


@dataclass(frozen=True)
class CCase:
    x: str
    branches: tuple   # ((n, command), ...)


@dataclass(frozen=True)
class CRet:
    cont: str
    value: object


CBV_GRAMMAR = r'''
    start: cmd bindings?
    bindings: "[" bind ("," bind)* "]"
    bind: NAME ARROW value
    ?cmd: "let" NAME [":" type] "=" NAME varg "in" cmd -> clet
        | "case" NAME "[" [branch ("," branch)*] "]" -> ccase
        | "[" NAME "]" value -> cret
    branch: INT ("->" | "→") cmd
    ?value: value "+" vatom -> vadd
          | vatom
    ?vatom: INT -> vnum
          | NAME -> vvar
          | LAMBDA "(" NAME [":" type] "," NAME [":" type] ")" "." cmd -> vlam
          | "(" value ")"
    ?varg: vatom
    ?type: tatom (ARR type)?
    ?tatom: IOTA -> tiota
          | "(" type ")"
    ARR: "->" | "→"
    IOTA: "ι" | "int" | "o"
    NAME: /(?!(let|in|case|int)\b)[^\W\d_λ][\w']*/
''' + _COMMON


@v_args(inline=True)
class _CbvT(Transformer):
    def tiota(self, _):
        return IOTA

    def type(self, a, _arr=None, b=None):
        return a if b is None else Arrow(a, b)

    def vnum(self, n):
        return VNum(int(n))

    def vvar(self, n):
        return VVar(str(n))

    def vadd(self, a, b):
        return VAdd(a, b)

    def vlam(self, _l, z, zt, beta, bt, body):
        return VLam(str(z), zt, str(beta), bt, body)

    def clet(self, x, xt, y, v, c):
        return CLet(str(x), xt, str(y), v, c)

    def ccase(self, x, *brs):
        return CCase(str(x), tuple(b for b in brs if b is not None))

    def branch(self, n, c):
        return (int(n), c)

    def cret(self, a, v):
        return CRet(str(a), v)

    def bind(self, n, _a, v):
        return (str(n), v)

    def bindings(self, *bs):
        return list(bs)

    def start(self, c, bs=None):
        return c, bs or []


_cbv_parser = Lark(CBV_GRAMMAR, parser='earley')


def parse_cbv(text):
    return _transform(_CbvT(), _cbv_parser, text, 'cbv')


def _num_of(v, rho):
    if isinstance(v, VNum):
        return v.n
    if isinstance(v, VVar):
        b = rho.get(v.name)
        if not isinstance(b, int):
            raise UnboundName(f'{v.name} is not a known basic value')
        return b
    if isinstance(v, VAdd):
        return _num_of(v.left, rho) + _num_of(v.right, rho)
    raise TypeMismatch('expected a basic value')


def _cbv_value(v, rho, fresh):
    """``⟦V⟧_ρ = * {T}``: returns (head value for ``*``, branches, gen)."""
    if isinstance(v, VLam):
        if v.ztype is None:
            raise MissingTypeAnnotation(f'λ({v.z},{v.beta}) needs a type for {v.z}')
        if v.ztype == IOTA:
            def gen(b, v=v, rho=rho):
                if not (isinstance(b, Cbv) and b.pol == '?' and b.value is not None
                        and b.var is None):
                    return None
                tok = fresh()
                body = _cbv_cmd(v.body, {**rho, v.z: b.value, v.beta: tok}, fresh)
                return None if body is None else Abs(tok, body)
            return None, [], gen
        tok = fresh()
        body = _cbv_cmd(v.body, {**rho, v.z: tok, v.beta: tok}, fresh)
        return None, ([] if body is None else [(Cbv('?'), Abs(tok, body))]), None
    return _num_of(v, rho), [], None


def _cbv_cmd(c, rho, fresh):
    if isinstance(c, CCase):
        n = rho.get(c.x)
        if not isinstance(n, int):
            raise UnboundName(f'case on {c.x}, which has no basic value')
        for k, cc in c.branches:
            if k == n:
                return _cbv_cmd(cc, rho, fresh)
        return None
    if isinstance(c, CRet):
        s, ts, gen = _cbv_value(c.value, rho, fresh)
        k = rho.get(c.cont)
        if isinstance(k, str):
            return Code(Cbv('!', s), k, ts, gen=gen)
        return Code(Cbv('!', s, c.cont), None, ts, gen=gen)
    if c.xtype is None:
        raise MissingTypeAnnotation(f'let {c.x} needs a type')
    s, ts, vgen = _cbv_value(c.arg, rho, fresh)
    branches = list(ts)
    if c.xtype == IOTA:
        def gen(b, c=c, rho=rho, vgen=vgen):
            if isinstance(b, Cbv) and b.pol == '!' and b.value is not None and b.var is None:
                body = _cbv_cmd(c.body, {**rho, c.x: b.value}, fresh)
                return None if body is None else Abs(None, body)
            return None if vgen is None else vgen(b)
    else:
        tok = fresh()
        body = _cbv_cmd(c.body, {**rho, c.x: tok}, fresh)
        if body is not None:
            branches.append((Cbv('!'), Abs(tok, body)))
        gen = vgen
    y = rho.get(c.y)
    if isinstance(y, str):
        return Code(Cbv('?', s), y, branches, gen=gen)
    if y is not None:
        raise TypeMismatch(f'{c.y} is applied but has a basic value')
    return Code(Cbv('?', s, c.y), None, branches, gen=gen)


def compile_cbv(c, rho=None, fresh=None):
    """Command to concrete syntax: the main tree ``(P)``, rooted at •."""
    fresh = fresh or _Fresh()
    body = _cbv_cmd(c, dict(rho or {}), fresh)
    if body is None:
        raise StuckState('the main command selects no case branch')
    return Abs(None, body)


# argument types of function bindings the closing clause covers
_CLOSURE_ARGS = (IOTA, Arrow(IOTA, IOTA))


def compile_cbv_closure(c, bindings, fresh=None):
    """``c[x_i <- n_i, x_j <- V_j, ...]``: numerals go to the environment; a
    function binding becomes the counter-strategy roots ``(?n,x_j)`` or
    ``(?•,x_k)``.  Only these two shapes of function value are accepted."""
    fresh = fresh or _Fresh()
    rho, funs = {}, {}
    for x, v in bindings:
        if isinstance(v, (VNum, VAdd)):
            rho[x] = _num_of(v, {})
        elif isinstance(v, VLam):
            if v.ztype not in _CLOSURE_ARGS:
                raise TypeMismatch(f'binding {x}: argument type {v.ztype} is not ι or ι→ι')
            funs[x] = v
        else:
            raise TypeMismatch(f'unsupported binding shape for {x}')
    main = compile_cbv(c, rho, fresh)
    items = []
    basic = {}
    for x, v in funs.items():
        s, ts, gen = _cbv_value(v, {}, fresh)
        if gen is None:
            items.extend((Cbv('?', None, x), t) for _, t in ts)
        else:
            basic[x] = gen

    def root_gen(a):
        if isinstance(a, Cbv) and a.pol == '?' and a.value is not None and a.var in basic:
            return basic[a.var](Cbv('?', a.value))
        return None
    return Program(main, LazyMap(items, root_gen if basic else None), c, bindings)


def cbv_program(text):
    c, bs = parse_cbv(text)
    return compile_cbv_closure(c, bs)


def run_cbv(c, bindings=(), fuel=100000):
    """Source machine for call-by-value trees.  Values are numerals or
    closures; continuations are ``μ̃x.c`` closures."""
    def val(v, rho):
        if isinstance(v, VLam):
            return ('lam', v, rho)
        if isinstance(v, VNum):
            return v.n
        if isinstance(v, VVar):
            if v.name not in rho:
                raise StuckState(f'unbound value {v.name}')
            return rho[v.name]
        return val(v.left, rho) + val(v.right, rho)

    def head(x):
        return None if not isinstance(x, int) else x

    rho = {}
    for x, v in bindings:
        rho[x] = val(v, {})
    for _ in range(fuel):
        if isinstance(c, CLet):
            f = rho.get(c.y)
            arg = val(c.arg, rho)
            if f is None:
                return Observable('call', c.y, head(arg))
            if not isinstance(f, tuple):
                raise StuckState(f'{c.y} is not a function')
            _, lam, rho2 = f
            rho = {**rho2, lam.z: arg, lam.beta: ('mu', c.x, c.body, rho)}
            c = lam.body
        elif isinstance(c, CCase):
            n = rho.get(c.x)
            nxt = dict(c.branches).get(n)
            if nxt is None:
                return Observable('blocked', c.x, n)
            c = nxt
        else:
            k = rho.get(c.cont)
            v = val(c.value, rho)
            if k is None:
                return Observable('deliver', c.cont, head(v))
            _, x, body, rho2 = k
            rho = {**rho2, x: v}
            c = body
    raise FuelExhausted('call-by-value machine out of fuel')


def typecheck_cbv(t, gamma=None, delta=None):
    """Type a value or command.  ``delta`` maps continuation variables to a
    type or None (unknown yet, fixed at first use).  Returns a type or ⊥."""
    gamma = dict(gamma or {})
    delta = dict(delta or {})
    return _tc(t, gamma, delta)


def _tc(t, g, d):
    if isinstance(t, VNum):
        return IOTA
    if isinstance(t, VVar):
        if g.get(t.name) != IOTA:
            raise TypeMismatch(f'var: {t.name} must be declared of type ι')
        return IOTA
    if isinstance(t, VAdd):
        if _tc(t.left, g, d) != IOTA or _tc(t.right, g, d) != IOTA:
            raise TypeMismatch('add: operands must be of type ι')
        return IOTA
    if isinstance(t, VLam):
        if t.ztype is None:
            raise MissingTypeAnnotation(f'abs: {t.z} needs a type')
        d2 = dict(d)
        d2[t.beta] = [t.btype]
        _expect_bot(_tc(t.body, {**g, t.z: t.ztype}, d2), 'abs')
        tau = d2[t.beta][0]
        if tau is None:
            raise TypeMismatch(f'abs: cannot determine the type of {t.beta}')
        return Arrow(t.ztype, tau)
    if isinstance(t, CRet):
        if t.cont not in d:
            raise TypeMismatch(f'ret: unknown continuation {t.cont}')
        cell = d[t.cont]
        if not isinstance(cell, list):
            cell = d[t.cont] = [cell]
        s = _tc(t.value, g, d)
        if cell[0] is None:
            cell[0] = s
        elif cell[0] != s:
            raise TypeMismatch(f'ret: {t.cont} expects {cell[0]}, got {s}')
        return BOT
    if isinstance(t, CCase):
        if g.get(t.x) != IOTA:
            raise TypeMismatch(f'case: {t.x} must be of type ι')
        for _, c in t.branches:
            _expect_bot(_tc(c, g, d), 'case')
        return BOT
    if isinstance(t, CLet):
        ty = g.get(t.y)
        if not isinstance(ty, Arrow):
            raise TypeMismatch(f'let: {t.y} must have an arrow type')
        if _tc(t.arg, g, d) != ty.src:
            raise TypeMismatch(f'let: argument of {t.y} must have type {ty.src}')
        if t.xtype is not None and t.xtype != ty.dst:
            raise TypeMismatch(f'let: {t.x} declared {t.xtype}, {t.y} returns {ty.dst}')
        _expect_bot(_tc(t.body, {**g, t.x: ty.dst}, d), 'let')
        return BOT
    raise TypeMismatch(f'not a cbv term: {t!r}')


def _expect_bot(s, rule):
    if s != BOT:
        raise TypeMismatch(f'{rule}: expected a command')


def typecheck_cbv_program(c, bindings, conts=()):
    """Types the bindings, then the main command with free continuations."""
    g = {}
    for x, v in bindings:
        g[x] = typecheck_cbv(v, g)
    return typecheck_cbv(c, g, {a: None for a in conts})


# ----------------------------------------------------------------------------
# Ludics designs

@dataclass(frozen=True)
class LField:
    ram: frozenset
    names: tuple      # ((j, name), ...)
    body: object


@dataclass(frozen=True)
class Design:
    fields: tuple     # LField, at most one per ramification

    def field(self, ram):
        for f in self.fields:
            if f.ram == ram:
                return f
        return None


@dataclass(frozen=True)
class LAction:
    head: str
    ram: frozenset
    subs: tuple       # ((i, Design), ...)


LUDICS_GRAMMAR = r'''
    start: cmd bindings?
    bindings: "[" bind ("," bind)* "]"
    bind: NAME ARROW design
    ?design: "{" field ("," field)* "}" -> record
           | lamf -> single
    field: ram "=" lamf
    lamf: LAMBDA "{" [NAME ("," NAME)*] "}" "." cmd
    ?cmd: "(" NAME DOT ram ")" "{" [sub ("," sub)*] "}" -> action
        | OMEGA -> omega
        | DAIMON -> daimon
    sub: (INT ":")? design
    ram: "{" [INT ("," INT)*] "}"
    DOT: "·" | "."
    OMEGA.2: "Ω" | "omega"
    DAIMON.2: "✠" | "daimon"
    NAME: /(?!(omega|daimon)\b)[^\W\d_λ][\w']*/
''' + _COMMON


def _var_index(name):
    digits = ''
    for ch in reversed(name):
        if not ch.isdigit():
            break
        digits = ch + digits
    if not digits:
        raise ParseError(f'ludics variable {name!r} must end with its index')
    return int(digits)


@v_args(inline=True)
class _LudT(Transformer):
    def ram(self, *ns):
        return frozenset(int(n) for n in ns if n is not None)

    def lamf(self, _l, *rest):
        *names, body = rest
        names = tuple(sorted((_var_index(str(n)), str(n)) for n in names if n is not None))
        return (frozenset(j for j, _ in names), names, body)

    def field(self, ram, lf):
        if ram != lf[0]:
            raise ParseError(f'field {sorted(ram)} binds variables {sorted(lf[0])}')
        return LField(ram, lf[1], lf[2])

    def record(self, *fs):
        if len({f.ram for f in fs}) != len(fs):
            raise ParseError('record keys must be distinct')
        return Design(tuple(fs))

    def single(self, lf):
        return Design((LField(lf[0], lf[1], lf[2]),))

    def sub(self, *xs):
        return (int(xs[0]), xs[1]) if len(xs) == 2 else (None, xs[0])

    def action(self, x, _dot, ram, *subs):
        subs = [s for s in subs if s is not None]
        idx = sorted(ram)
        if all(i is None for i, _ in subs):
            if len(subs) > len(idx):
                raise ParseError('more subdesigns than indices')
            subs = list(zip(idx, [d for _, d in subs]))
        if any(i not in ram for i, _ in subs):
            raise ParseError('subdesign index outside the ramification')
        return LAction(str(x), ram, tuple(subs))

    def omega(self, _):
        return OMEGA

    def daimon(self, _):
        return DAIMON

    def bind(self, n, _a, d):
        return (str(n), d)

    def bindings(self, *bs):
        return list(bs)

    def start(self, c, bs=None):
        return c, bs or []


_lud_parser = Lark(LUDICS_GRAMMAR, parser='earley')


def parse_ludics(text):
    return _transform(_LudT(), _lud_parser, text, 'ludics')


_EMPTY_DESIGN = Design(())


def _lud_cmd(p, env, fresh):
    if isinstance(p, Special):
        return Code(p, None)
    subs = dict(p.subs)
    branches = []
    for i in sorted(p.ram):
        d = subs.get(i, _EMPTY_DESIGN)
        for f in d.fields:
            branches.append((LudicsPair(i, f.ram), _lud_field(f, env, fresh)))

    def gen(b, p=p, subs=subs):
        if isinstance(b, LudicsPair) and b.var is None and b.index in p.ram:
            return Abs(None, Code(OMEGA, None))
        return None
    if p.head in env:
        tok, j = env[p.head]
        return Code(LudicsPair(j, p.ram), tok, branches, gen=gen)
    return Code(LudicsPair(None, p.ram, p.head), None, branches, gen=gen)


def _lud_field(f, env, fresh):
    tok = fresh()
    env = dict(env)
    for j, name in f.names:
        env[name] = (tok, j)
    return Abs(tok, _lud_cmd(f.body, env, fresh))


def compile_ludics(p, env=None, fresh=None):
    """Command to concrete syntax.  ``(x·I){M_i}`` groups into branches
    ``(i,J)``; bound heads ``x_j·K`` become the move ``(j,K)`` pointing to
    the binder; Ω and ✠ are terminal free moves; missing fields are Ω."""
    fresh = fresh or _Fresh()
    return Abs(None, _lud_cmd(p, dict(env or {}), fresh))


def compile_design(x, d, fresh=None):
    """Counter-design bound to x: one root ``x·I`` per field I."""
    fresh = fresh or _Fresh()
    items = [(LudicsPair(None, f.ram, x), _lud_field(f, {}, fresh)) for f in d.fields]

    def gen(a):
        if isinstance(a, LudicsPair) and a.index is None and a.var == x:
            return Abs(None, Code(OMEGA, None))
        return None
    return items, gen


def ludics_program(text):
    p, bs = parse_ludics(text)
    fresh = _Fresh()
    items, gens = [], {}
    for x, d in bs:
        its, g = compile_design(x, d, fresh)
        items += its
        gens[x] = g

    def gen(a):
        g = gens.get(getattr(a, 'var', None))
        return None if g is None or a in dict(items) else g(a)
    return Program(compile_ludics(p, None, fresh), LazyMap(items, gen), p, bs)


def run_ludics(p, bindings=(), fuel=100000):
    """Source machine for designs: Converges at ✠, Diverges at Ω."""
    rho = {x: (d, {}) for x, d in bindings}
    for _ in range(fuel):
        if p == DAIMON:
            return Observable('converge')
        if p == OMEGA:
            return Observable('diverge')
        clo = rho.get(p.head)
        if clo is None:
            return Observable('call', p.head, p.ram)
        d, rho2 = clo
        f = d.field(p.ram)
        if f is None:
            return Observable('diverge')
        subs = dict(p.subs)
        new = dict(rho2)
        for i, name in f.names:
            new[name] = (subs.get(i, _EMPTY_DESIGN), rho)
        p, rho = f.body, new
    raise FuelExhausted('ludics machine out of fuel')


# ----------------------------------------------------------------------------
# Raw strategy text:  "• <- (...)" plus counter-strategy entries "x <- (...)"

def abt_program(text):
    from .syntax import decompile, parse_forest, to_concrete_forest
    main, forest = parse_forest(text)
    if main is None:
        raise ParseError('abt: missing "• <- ..." entry')
    return Program(decompile(main), to_concrete_forest(forest), source=text)


# ----------------------------------------------------------------------------

FRONTENDS = {
    'abt': abt_program,
    'lambda': lambda_program,
    'lambda-star': lambda text: lambda_program(text, star=True),
    'pcf': pcf_program,
    'pcf-mu': pcf_mu_program,
    'cbv': cbv_program,
    'ludics': ludics_program,
}


def load_program(text, frontend):
    try:
        return FRONTENDS[frontend](text)
    except KeyError:
        raise AbtError(f'unknown frontend {frontend!r}') from None
