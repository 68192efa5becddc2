"""Moves, positions, strategies and the two term syntaxes of abstract Bohm trees.

A strategy is stored as a tree of response nodes.  Each node holds the
player move ``[a|k]`` answering the query that leads to it, plus the
opponent branches pending below it.  The opponent move at the root is left
implicit (it is the bullet for a strategy, the hook name for a tree of a
counter-strategy).

Pointers are plain ints (offsets counted in opponent moves) or ``None`` for
free player moves.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import NamedTuple, Optional


class AbtError(Exception):
    pass


class PointerOutOfRange(AbtError):
    pass


class UnboundBinder(AbtError):
    pass


class ParseError(AbtError):
    pass


# ----------------------------------------------------------------------------
# Moves

@dataclass(frozen=True)
class Sym:
    name: str


@dataclass(frozen=True)
class Num:
    n: int


@dataclass(frozen=True)
class Const:
    value: str


@dataclass(frozen=True)
class Special:
    name: str


BULLET = Special('•')
STAR = Special('⋆')
OMEGA = Special('Ω')
DAIMON = Special('✠')


@dataclass(frozen=True)
class Cbv:
    """Call-by-value move: ``?n``, ``?•``, ``!n``, ``!•``, optionally tagged
    with a variable as in ``(?•,x)``.  ``value`` is None for the bullet."""
    pol: str
    value: Optional[int] = None
    var: Optional[str] = None


@dataclass(frozen=True)
class LudicsPair:
    """Ludics action.  ``(i, J)`` for an indexed move, or ``x·I`` for a free
    head ``(x·I)`` (then ``index`` is None)."""
    index: Optional[int]
    ram: frozenset
    var: Optional[str] = None


Move = object
FREE = None

_SPECIAL_RANK = {'•': 0, '⋆': 7, 'Ω': 8, '✠': 9}


def move_key(m):
    """Total order on moves, used for deterministic child ordering."""
    if isinstance(m, Special):
        return (_SPECIAL_RANK[m.name],)
    if isinstance(m, Num):
        return (1, m.n)
    if isinstance(m, Sym):
        return (2, m.name)
    if isinstance(m, Const):
        v = m.value
        return (3, 0, int(v), '') if v.isdigit() else (3, 1, 0, v)
    if isinstance(m, Cbv):
        return (4, m.var is not None, m.pol == '!', m.value is not None,
                m.value or 0, m.var or '')
    if isinstance(m, LudicsPair):
        return (5, m.var or '', -1 if m.index is None else m.index,
                tuple(sorted(m.ram)))
    raise TypeError(f'not a move: {m!r}')


def _ram(s):
    return '{' + ','.join(str(j) for j in sorted(s)) + '}'


def show_move(m):
    if isinstance(m, Special):
        return m.name
    if isinstance(m, Num):
        return str(m.n)
    if isinstance(m, Sym):
        return m.name
    if isinstance(m, Const):
        return "'" + m.value
    if isinstance(m, Cbv):
        s = m.pol + ('•' if m.value is None else str(m.value))
        return s if m.var is None else f'{s},{m.var}'
    if isinstance(m, LudicsPair):
        head = m.var if m.index is None else str(m.index)
        s = f'{head}·{_ram(m.ram)}'
        if m.index is not None and m.var is not None:
            s += ',' + m.var
        return s
    raise TypeError(f'not a move: {m!r}')


_IDENT = r"[^\W\d][\w']*"
_SPECIAL_ALIASES = {'#bullet': BULLET, '#star': STAR, '#omega': OMEGA,
                    '#daimon': DAIMON}
_CBV_RE = re.compile(r"([?!])(•|\*|\d+)(?:,(" + _IDENT + r"))?$")
_LUD_RE = re.compile(r"(\d+|" + _IDENT + r")[·.]\{([\d,]*)\}(?:,(" + _IDENT + r"))?$")


def parse_move(tok):
    tok = tok.strip()
    if tok in ('•', '⋆', 'Ω', '✠'):
        return Special(tok)
    if tok in _SPECIAL_ALIASES:
        return _SPECIAL_ALIASES[tok]
    if tok.isdigit():
        return Num(int(tok))
    if tok.startswith("'") and len(tok) > 1:
        return Const(tok[1:])
    m = _CBV_RE.match(tok)
    if m:
        val = None if m.group(2) in ('•', '*') else int(m.group(2))
        return Cbv(m.group(1), val, m.group(3))
    m = _LUD_RE.match(tok)
    if m:
        ram = frozenset(int(j) for j in m.group(2).split(',') if j)
        head = m.group(1)
        if head.isdigit():
            return LudicsPair(int(head), ram, m.group(3))
        return LudicsPair(None, ram, head)
    if re.fullmatch(_IDENT, tok) and tok != '_':
        return Sym(tok)
    raise ParseError(f'bad move token {tok!r}')


def show_ptr(k):
    return '_' if k is None else str(k)


# ----------------------------------------------------------------------------
# Positions

class Opp(NamedTuple):
    move: object
    stamp: Optional[int] = None

    def __str__(self):
        m = show_move(self.move)
        return f'<{m}>' if self.stamp is None else f'<{m}@{self.stamp}>'


class Pl(NamedTuple):
    move: object
    ptr: Optional[int] = None

    def __str__(self):
        return f'[{show_move(self.move)}|{show_ptr(self.ptr)}]'


def show_position(p):
    return ''.join(str(e) for e in p)


def is_query(p):
    return len(p) % 2 == 1


def erase(p):
    """Drop the multiplexing stamps of a position."""
    return tuple(Opp(e.move) if k % 2 == 0 else e for k, e in enumerate(p))


def names(p):
    """Opponent move names of a position; all a strategy lookup needs."""
    return tuple(e.move for e in p[0::2])


def pop(q, i=1):
    if i == 0:
        return q
    if len(q) < 2 * i + 1:
        raise PointerOutOfRange(f'pop^{i} of a query with {len(q) // 2 + 1} opponent moves')
    return q[:len(q) - 2 * i]


def dnumber(q):
    return q[-1].stamp


def pop_dnumber(q, i):
    """Stamp of the last opponent move of pop^i(q)."""
    k = len(q) - 1 - 2 * i
    if k < 0 or len(q) % 2 == 0:
        raise PointerOutOfRange(f'pointer {i} out of range in {show_position(q)}')
    return q[k].stamp


def pointers_valid(p):
    for k in range(1, len(p), 2):
        i = p[k].ptr
        if i is not None and k - 1 - 2 * i < 0:
            return False
    return True


def stamps_increasing(p):
    stamps = [e.stamp for e in p[0::2]]
    return all(a < b for a, b in zip(stamps, stamps[1:]))


# ----------------------------------------------------------------------------
# Strategies

class Node:
    """Response node ``[move|ptr]{(b, child_b)}``.

    ``arity`` and ``nbind`` are the superscripts used by the eta machine:
    the argument count of the player move, and the binder count of the
    opponent move leading to this node.  ``gen`` realizes an infinite family
    of branches on demand (numeral-keyed branches of Pcf and cbv trees).
    """
    __slots__ = ('move', 'ptr', 'children', 'arity', 'nbind', 'gen', '_memo')

    def __init__(self, move, ptr=None, children=(), arity=None, nbind=None, gen=None):
        items = children.items() if isinstance(children, dict) else children
        items = sorted(items, key=lambda kv: move_key(kv[0]))
        self.move = move
        self.ptr = ptr
        self.children = dict(items)
        self.arity = arity
        self.nbind = nbind
        self.gen = gen
        self._memo = {}

    def child(self, b):
        c = self.children.get(b)
        if c is None and self.gen is not None:
            if b not in self._memo:
                self._memo[b] = self.gen(b)
            c = self._memo[b]
        return c

    def materialized(self):
        """Children known so far: explicit ones plus generated ones."""
        out = dict(self.children)
        for b, c in self._memo.items():
            if c is not None:
                out.setdefault(b, c)
        return sorted(out.items(), key=lambda kv: move_key(kv[0]))

    @property
    def head(self):
        return Pl(self.move, self.ptr)

    def __eq__(self, other):
        if not isinstance(other, Node):
            return NotImplemented
        return tree_equal(self, other)

    __hash__ = None

    def __repr__(self):
        return f'Node({show_strategy(self)})'


def tree_equal(a, b, superscripts=False):
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        if x.move != y.move or x.ptr != y.ptr:
            return False
        if superscripts and (x.arity != y.arity or x.nbind != y.nbind):
            return False
        xs, ys = x.materialized(), y.materialized()
        if [k for k, _ in xs] != [k for k, _ in ys]:
            return False
        stack.extend((cx, cy) for (_, cx), (_, cy) in zip(xs, ys))
    return True


def leaf(move, ptr=None):
    return Node(move, ptr)


class LazyMap(dict):
    """Dict whose missing keys may be realized on demand by ``gen``."""

    def __init__(self, items=(), gen=None):
        super().__init__(items)
        self.gen = gen
        self._memo = {}

    def get(self, key, default=None):
        if dict.__contains__(self, key):
            return dict.__getitem__(self, key)
        if self.gen is None:
            return default
        if key not in self._memo:
            self._memo[key] = self.gen(key)
        v = self._memo[key]
        return default if v is None else v

    def __contains__(self, key):
        return self.get(key) is not None

    def __getitem__(self, key):
        v = self.get(key)
        if v is None:
            raise KeyError(key)
        return v

    def materialized(self):
        out = dict(self)
        out.update((k, v) for k, v in self._memo.items() if v is not None)
        return sorted(out.items(), key=lambda kv: move_key(kv[0]))


class CounterStrategy(LazyMap):
    """Forest of strategies, keyed by the move naming each root."""

    def __init__(self, items=(), gen=None):
        if isinstance(items, LazyMap):
            gen = gen or items.gen
            items = list(dict.items(items))
        items = items.items() if isinstance(items, dict) else items
        items = sorted(items, key=lambda kv: move_key(kv[0]))
        super().__init__(items, gen)
        for k in dict.keys(self):
            if k == BULLET:
                raise AbtError('the bullet cannot name a counter-strategy root')


def walk(node, path):
    """Follow opponent move names below ``node``; None if the path leaves it."""
    for b in path:
        node = node.child(b)
        if node is None:
            return None
    return node


def lookup(phi, q):
    """phi(q): the player move answering query q, or None outside dom(phi).

    ``phi`` is a strategy (root •) or a counter-strategy (forest)."""
    ns = names(q)
    if isinstance(phi, Node):
        if ns[0] != BULLET:
            return None
        node = walk(phi, ns[1:])
    else:
        root = phi.get(ns[0])
        node = None if root is None else walk(root, ns[1:])
    return None if node is None else node.head


def iter_paths(node, prefix=()):
    """Yield (opponent-name path, node) for every materialized node."""
    stack = [(prefix, node)]
    while stack:
        path, n = stack.pop()
        yield path, n
        for b, c in reversed(n.materialized()):
            stack.append((path + (b,), c))


def strategy_pointers_valid(node, depth0=1):
    """Every bound pointer points to an opponent node on the path to the root."""
    stack = [(node, depth0)]
    while stack:
        n, d = stack.pop()
        if n.ptr is not None and n.ptr >= d:
            return False
        stack.extend((c, d + 1) for _, c in n.materialized())
    return True


def depth(node):
    best = 0
    stack = [(node, 1)]
    while stack:
        n, d = stack.pop()
        best = max(best, d)
        stack.extend((c, d + 1) for _, c in n.materialized())
    return best


def size(node):
    return sum(1 for _ in iter_paths(node))


def free_moves(node):
    return sorted({n.move for _, n in iter_paths(node) if n.ptr is None},
                  key=move_key)


def opponent_alphabet(node):
    return sorted({p[-1] for p, _ in iter_paths(node) if p}, key=move_key)


# ----------------------------------------------------------------------------
# Text format:  node ::= (move ptr (label node)...)   ptr ::= _ | nat
# A move or label may carry a superscript ``^n``.  A forest is a sequence of
# ``name <- node`` entries.

_TOKEN = re.compile(r'\s*(<-|\(|\)|[^\s()]+)')


def _tokens(text):
    text = re.sub(r';[^\n]*', '', text)
    pos, out = 0, []
    while True:
        m = _TOKEN.match(text, pos)
        if not m or not m.group(1):
            if text[pos:].strip():
                raise ParseError(f'unexpected text at {pos}')
            return out
        out.append(m.group(1))
        pos = m.end()


def _split_sup(tok):
    if '^' in tok:
        base, sup = tok.rsplit('^', 1)
        if sup.isdigit():
            return base, int(sup)
    return tok, None


class _Reader:
    def __init__(self, toks):
        self.toks, self.k = toks, 0

    def peek(self):
        return self.toks[self.k] if self.k < len(self.toks) else None

    def take(self, want=None):
        t = self.peek()
        if t is None or (want is not None and t != want):
            raise ParseError(f'expected {want or "token"}, got {t!r}')
        self.k += 1
        return t

    def node(self, nbind=None):
        self.take('(')
        mtok, arity = _split_sup(self.take())
        move = parse_move(mtok)
        ptok = self.take()
        if ptok == '_':
            ptr = None
        elif ptok.isdigit():
            ptr = int(ptok)
        else:
            raise ParseError(f'bad pointer {ptok!r}')
        kids = []
        while self.peek() == '(':
            self.take('(')
            ltok, nb = _split_sup(self.take())
            kids.append((parse_move(ltok), self.node(nb)))
            self.take(')')
        self.take(')')
        return Node(move, ptr, kids, arity=arity, nbind=nbind)


def parse_strategy(text):
    r = _Reader(_tokens(text))
    node = r.node()
    if r.peek() is not None:
        raise ParseError(f'trailing input {r.peek()!r}')
    return node


def parse_forest(text):
    """Parse ``name <- node`` entries.  A ``•`` entry is returned separately."""
    r = _Reader(_tokens(text))
    main, forest = None, []
    while r.peek() is not None:
        ltok, nb = _split_sup(r.take())
        r.take('<-')
        move = parse_move(ltok)
        node = r.node(nb)
        if move == BULLET:
            main = node
        else:
            forest.append((move, node))
    return main, CounterStrategy(forest)


def show_strategy(node, superscripts=False):
    def mv(m, sup):
        s = show_move(m)
        return f'{s}^{sup}' if superscripts and sup is not None else s

    def go(n):
        parts = [mv(n.move, n.arity), show_ptr(n.ptr)]
        for b, c in n.materialized():
            parts.append(f'({mv(b, c.nbind)} {go(c)})')
        return '(' + ' '.join(parts) + ')'
    return go(node)


def show_forest(psi, superscripts=False):
    lines = []
    items = psi.materialized() if isinstance(psi, LazyMap) else psi.items()
    for a, t in items:
        label = show_move(a)
        if superscripts and t.nbind is not None:
            label += f'^{t.nbind}'
        lines.append(f'{label} <- {show_strategy(t, superscripts)}')
    return '\n'.join(lines)


# ----------------------------------------------------------------------------
# Concrete syntax:  M ::= (λx.P)   P ::= [a|*]{(b, M_b)}

class Abs:
    """``(λx.P)``, or ``(P)`` when ``binder`` is None."""
    __slots__ = ('binder', 'body', 'nbind')

    def __init__(self, binder, body, nbind=None):
        self.binder, self.body, self.nbind = binder, body, nbind

    def __repr__(self):
        return show_concrete(self)


class Code:
    """``[a|*]{(b, M_b)}``; ``star`` is a binder token or None for free."""
    __slots__ = ('move', 'star', 'branches', 'arity', 'gen', '_memo')

    def __init__(self, move, star=None, branches=(), arity=None, gen=None):
        self.move, self.star = move, star
        self.branches = dict(sorted(dict(branches).items(), key=lambda kv: move_key(kv[0])))
        self.arity = arity
        self.gen = gen
        self._memo = {}

    def branch(self, b):
        m = self.branches.get(b)
        if m is None and self.gen is not None:
            if b not in self._memo:
                self._memo[b] = self.gen(b)
            m = self._memo[b]
        return m

    def __repr__(self):
        return show_concrete(self)


def show_concrete(t):
    if isinstance(t, Abs):
        inner = show_concrete(t.body)
        return f'(λ{t.binder}.{inner})' if t.binder else f'({inner})'
    star = '_' if t.star is None else t.star
    bs = ','.join(f'({show_move(b)},{show_concrete(m)})' for b, m in t.branches.items())
    return f'[{show_move(t.move)}|{star}]{{{bs}}}'


_NO_BINDER = object()


def compile_ca(m, binders=()):
    """Concrete to abstract syntax: binder tokens become offsets."""
    if isinstance(m, Code):
        return _compile_code(m, tuple(binders))
    return _compile_abs(m, tuple(binders))


def _compile_abs(m, binders):
    node = _compile_code(m.body, (m.binder if m.binder else _NO_BINDER,) + binders)
    node.nbind = m.nbind
    return node


def _compile_code(p, binders):
    if p.star is None:
        ptr = None
    else:
        try:
            ptr = binders.index(p.star)
        except ValueError:
            raise UnboundBinder(f'binder {p.star!r} not in scope') from None
    kids = [(b, _compile_abs(mb, binders)) for b, mb in p.branches.items()]
    gen = None
    if p.gen is not None:
        def gen(b, p=p, binders=binders):
            mb = p.branch(b)
            return None if mb is None else _compile_abs(mb, binders)
    return Node(p.move, ptr, kids, arity=p.arity, gen=gen)


def decompile(node, _fresh=None):
    """Abstract to concrete syntax, with deterministic fresh binder names.

    A binder is emitted only if some materialized player move points to it
    (lazy subtrees always get one)."""
    fresh = _fresh or itertools.count(1)
    return _decompile(node, (), fresh)


def _uses_binder(node):
    stack = [(node, 0)]
    while stack:
        n, d = stack.pop()
        if n.ptr == d or n.gen is not None:
            return True
        stack.extend((c, d + 1) for _, c in n.materialized())
    return False


def _decompile(node, binders, fresh):
    x = f'x{next(fresh)}' if _uses_binder(node) else None
    scope = (x,) + binders
    star = None if node.ptr is None else scope[node.ptr]
    if star is None and node.ptr is not None:
        raise PointerOutOfRange('pointer to a binder-less node')
    kids = [(b, _decompile(c, scope, fresh)) for b, c in node.materialized()]
    gen = None
    if node.gen is not None:
        def gen(b, node=node, scope=scope):
            c = node.child(b)
            return None if c is None else _decompile(c, scope, fresh)
    code = Code(node.move, star, kids, arity=node.arity, gen=gen)
    return Abs(x, code, nbind=node.nbind)


def to_concrete_forest(psi):
    """Abstract to concrete, keeping lazily generated roots lazy."""
    fresh = itertools.count(1)
    items = [(a, decompile(t, fresh)) for a, t in dict.items(psi)]
    gen = None
    if getattr(psi, 'gen', None) is not None:
        def gen(a):
            t = psi.get(a)
            return None if t is None else decompile(t, fresh)
    return LazyMap(items, gen)


def compile_forest(forest):
    """Concrete forest ``{a: M}`` to a counter-strategy, keeping laziness."""
    items = [(a, compile_ca(m)) for a, m in dict.items(forest)]
    gen = None
    if getattr(forest, 'gen', None) is not None:
        def gen(a):
            m = forest.get(a)
            return None if m is None else compile_ca(m)
    return CounterStrategy(items, gen)


def binder_tokens(m):
    out, stack = [], [m]
    while stack:
        t = stack.pop()
        if t.binder:
            out.append(t.binder)
        stack.extend(t.body.branches.values())
    return out
