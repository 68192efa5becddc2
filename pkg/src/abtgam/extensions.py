"""Strong reduction, the star and eta machines, fax and the separation suite.

The strong machine reuses the GAM ledger.  Each item keeps its owner level
(0 for the strategy, 1 for the counter-strategy).  On top of it sits the
composite position built so far.  Opponent moves of the composite carry
their stage as address; player moves point to an address (or are free).
``readback_composition`` turns a set of such positions into an ordinary
strategy with offset pointers.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

from .machines import (GamState, Item, RunResult, Stage, Termination, TraceStep,
                       _eta_expand, gam_initial, gam_run, make_levels)
from .syntax import (BULLET, AbtError, CounterStrategy, Node, Num, Opp, Pl,
                     Sym, erase, free_moves, move_key, names, pop_dnumber,
                     show_move, show_ptr, show_strategy)


class IllegalQuery(AbtError):
    pass


class DanglingAddress(AbtError):
    pass


# ----------------------------------------------------------------------------
# Strong GAM

class CompOpp(NamedTuple):
    """Composite opponent move ⟨a, n⟩: n is its address (a GAM stage)."""
    move: object
    addr: int

    def __str__(self):
        return f'⟨{show_move(self.move)},{self.addr}⟩'


class CompPl(NamedTuple):
    """Composite player move [a|m] with m an address, or None when free."""
    move: object
    addr: Optional[int]

    def __str__(self):
        return f'[{show_move(self.move)}|{show_ptr(self.addr)}]'


def show_composite(r):
    return ''.join(str(e) for e in r)


@dataclass
class StrongState:
    gam: GamState
    mode: str = '?'
    comp: tuple = (CompOpp(BULLET, 1),)

    def copy(self):
        return StrongState(self.gam.copy(), self.mode, self.comp)

    def answer_node(self):
        """Strategy node of the player move that answered the last query."""
        head = self.gam.head
        return self.gam.node_at(head.level, names(head.pos))


def strong_initial(phi, psi=None, eta=False, levels=None):
    if levels is None:
        levels = make_levels(phi, psi)
    return StrongState(gam_initial(levels, False, eta))


def _emit(state, a, addr, rule, step):
    state.mode = '!'
    state.comp = state.comp + (CompPl(a, addr),)
    return state, TraceStep(step, rule, a, addr, None, state.comp,
                            machine='strong', phase='strong')


def strong_step(state):
    """One transition in mode '?'.  Returns (state, TraceStep) or a Termination
    (only 'blocked'); modifies ``state`` in place."""
    if state.mode != '?':
        raise AbtError('strong_step needs a pending query')
    s = state.gam
    head = s.head
    st = head.stage
    side = 'φ' if head.level % 2 == 0 else 'ψ'
    if not st.star:
        n = st.n + 1
        q = head.pos
        node = s.node_at(head.level, names(q))
        eta = False
        if node is None:
            node = _eta_expand(s, head) if s.eta else None
            if node is None:
                return Termination('blocked', q[-1].move, Stage(st.n, True) if st.n > 1 else st,
                                   query=erase(q), level=head.level)
            eta = True
        pos = q + (Pl(node.move, node.ptr),)
        item = Item(Stage(n, True), pos, head.level, eta)
        s.items.append(item)
        return state, TraceStep(item.stage, f'n*_{side}', node.move, node.ptr, None, pos,
                                machine='strong', phase='strong', eta=eta)
    n = st.n
    q, last = head.pos[:-1], head.pos[-1]
    a, i = last.move, last.ptr
    if i is not None:
        m = pop_dnumber(q, i)
        if m == 1:
            return _emit(state, a, 1, f'!_{side}', st)
        target = s.item(Stage(m, True))
        if target.level == head.level:
            rule = '!_φ' if side == 'φ' else '!_b,ψ'
            return _emit(state, a, m, rule, st)
        pos = target.pos + (Opp(a, n),)
        item = Item(Stage(n, False), pos, target.level)
        rule = 'n_b,φ' if side == 'φ' else 'n_ψ'
    else:
        nxt = head.level + 1
        if nxt >= len(s.levels) or a not in s.levels[nxt]:
            return _emit(state, a, None, f'!_f,{side}', st)
        pos = (Opp(a, n),)
        item = Item(Stage(n, False), pos, nxt)
        rule = 'n_f,φ'
    s.items.append(item)
    return state, TraceStep(item.stage, rule, a, i, n, pos, machine='strong', phase='strong')


def legal_queries(state):
    """Opponent moves available at the last answer: the materialized
    children of the answering node, plus eta expansions already recorded."""
    node = state.answer_node()
    if node is None:
        return []
    out = [b for b, _ in node.materialized()] if isinstance(node, Node) else []
    head = state.gam.head
    path = names(head.pos)
    for (lvl, p) in state.gam.expansions:
        if lvl == head.level and len(p) == len(path) + 1 and p[:-1] == path:
            if p[-1] not in out:
                out.append(p[-1])
    return sorted(out, key=move_key)


def _query_legal(state, a):
    node = state.answer_node()
    if node is None:
        return False
    if isinstance(node, Node) and node.child(a) is not None:
        return True
    if state.gam.eta:
        probe = state.copy()
        _apply_query(probe, a)
        return _eta_expand(probe.gam, probe.gam.head) is not None
    return False


def _apply_query(state, a):
    s = state.gam
    head = s.head
    n = head.stage.n
    pos = head.pos + (Opp(a, n),)
    item = Item(Stage(n, False), pos, head.level)
    s.items.append(item)
    state.mode = '?'
    state.comp = state.comp + (CompOpp(a, n),)
    return item


def strong_query(state, a):
    """Rule (?): raise opponent move a after the last composite answer."""
    if state.mode != '!':
        raise IllegalQuery('no answer to query yet')
    if not _query_legal(state, a):
        raise IllegalQuery(f'{show_move(a)} is not available after {show_composite(state.comp)}')
    item = _apply_query(state, a)
    side = 'φ' if item.level % 2 == 0 else 'ψ'
    return state, TraceStep(item.stage, f'?_{side}', a, None, item.stage.n, item.pos,
                            machine='strong', phase='strong')


def _answer(state, fuel, trace):
    """Run weak steps until the pending query is answered or blocked."""
    for _ in range(fuel):
        out = strong_step(state)
        if isinstance(out, Termination):
            return out
        trace.append(out[1])
        if state.mode == '!':
            return None
    return Termination('fuel', None, state.gam.head.stage)


@dataclass
class StrongResult:
    responses: list          # composite positions ending in a player move
    trace: list
    termination: Optional[Termination] = None
    state: Optional[StrongState] = None

    @property
    def first(self):
        return self.responses[0] if self.responses else None

    @property
    def outcome(self):
        """The machine termination, or else the class of the last response
        streamed out: a free player move reads as a free answer."""
        if self.termination is not None or not self.responses:
            return self.termination
        pl = self.responses[-1][-1]
        kind = 'free' if pl.addr is None else 'answer'
        return Termination(kind, pl.move, self.trace[-1].step)


# Drivers: a driver is called with the state after each answer and returns
# the next opponent move, or None to stop.

class ScriptDriver:
    def __init__(self, moves):
        self.moves = list(moves)
        self.k = 0

    def __call__(self, state):
        if self.k >= len(self.moves):
            return None
        a = self.moves[self.k]
        self.k += 1
        return a


class InteractiveDriver:
    """Asks for the next query on a prompt; an empty line stops."""
    def __init__(self, ask: Optional[Callable[[str], str]] = None, parse=None):
        from .syntax import parse_move
        self.ask = ask or (lambda prompt: input(prompt))
        self.parse = parse or parse_move

    def __call__(self, state):
        opts = ' '.join(show_move(b) for b in legal_queries(state))
        try:
            line = self.ask(f'{show_composite(state.comp)}  [{opts}] ? ').strip()
        except EOFError:
            return None
        return self.parse(line) if line else None


def strong_run(phi=None, psi=None, driver=None, fuel=100000, *, eta=False, levels=None):
    """Stream-like run: answer •, then one query per driver choice."""
    state = strong_initial(phi, psi, eta, levels)
    trace = [TraceStep(Stage(1, False), '1', BULLET, None, 1, state.gam.items[0].pos,
                       machine='strong', phase='strong')]
    responses = []
    while True:
        term = _answer(state, fuel, trace)
        if term is not None:
            return StrongResult(responses, trace, term, state)
        responses.append(state.comp)
        a = driver(state) if driver is not None else None
        if a is None:
            return StrongResult(responses, trace, None, state)
        trace.append(strong_query(state, a)[1])


def strong_exhaustive(phi=None, psi=None, depth=3, fuel=100000, *, eta=False, levels=None,
                      alphabet=None):
    """Breadth-first exploration of all queries up to ``depth`` queries deep.
    Returns every composite response reached; blocked branches are dropped.
    ``alphabet`` adds candidate queries beyond the materialized children
    (useful when eta expansion makes more moves legal)."""
    root = strong_initial(phi, psi, eta, levels)
    out = []
    queue = deque([(root, 0)])
    while queue:
        st, d = queue.popleft()
        if _answer(st, fuel, []) is not None:
            continue
        out.append(st.comp)
        if d >= depth:
            continue
        cands = list(legal_queries(st))
        for b in alphabet or ():
            if b not in cands and _query_legal(st, b):
                cands.append(b)
        for b in sorted(cands, key=move_key):
            nxt = st.copy()
            if _query_legal(nxt, b):
                _apply_query(nxt, b)
                queue.append((nxt, d + 1))
    return out


def readback_composition(positions):
    """Composite positions to a strategy (the response to •)."""
    root = None
    for r in sorted(positions, key=len):
        if len(r) < 2 or r[0] != CompOpp(BULLET, 1):
            raise DanglingAddress(f'not a composite position: {show_composite(r)}')
        node = None
        for k in range(1, len(r), 2):
            pl = r[k]
            opps = [e.addr for e in r[0:k:2]]
            if pl.addr is None:
                ptr = None
            elif pl.addr in opps:
                ptr = len(opps) - 1 - opps.index(pl.addr)
            else:
                raise DanglingAddress(f'{pl} in {show_composite(r)}')
            if k == 1:
                if root is None:
                    root = Node(pl.move, ptr)
                elif (root.move, root.ptr) != (pl.move, ptr):
                    raise AbtError('composite positions disagree at the root')
                node = root
            else:
                b = r[k - 1].move
                child = node.children.get(b)
                if child is None:
                    child = Node(pl.move, ptr)
                    node.children[b] = child
                    node.children = dict(sorted(node.children.items(),
                                                key=lambda kv: move_key(kv[0])))
                elif (child.move, child.ptr) != (pl.move, ptr):
                    raise AbtError('composite positions disagree')
                node = child
    return root


def _binder_arity(node):
    """Largest variable index bound by the opponent move leading to ``node``."""
    top, stack = 0, [(node, 0)]
    while stack:
        n, d = stack.pop()
        if n.ptr == d and isinstance(n.move, Num):
            top = max(top, n.move.n)
        stack.extend((c, d + 1) for _, c in n.materialized())
    return top


def show_lambda_readback(node):
    """Print a Böhm-tree shaped strategy as a lambda term, ``(λu.u(z))`` style.

    Numeric player moves are de Bruijn-like variable indices, numeric
    opponent moves are argument positions.  Other strategies fall back to
    the strategy text format."""
    pool = (f'v{k}' for k in itertools.count(1))
    taken = {show_move(m) for m in free_moves(node)}

    def fresh():
        for v in pool:
            if v not in taken:
                return v

    def body(n, scope):
        vs = [fresh() for _ in range(_binder_arity(n))]
        scope = (vs,) + scope
        if n.ptr is None:
            head = show_move(n.move)
        elif isinstance(n.move, Num) and n.ptr < len(scope) and n.move.n <= len(scope[n.ptr]):
            head = scope[n.ptr][n.move.n - 1]
        else:
            raise AbtError('not a lambda-shaped strategy')
        kids = n.materialized()
        if [b for b, _ in kids] != [Num(i) for i in range(1, len(kids) + 1)]:
            raise AbtError('not a lambda-shaped strategy')
        args = ''.join(f'({body(c, scope)})' for _, c in kids)
        lam = f'λ{" ".join(vs)}.' if vs else ''
        return f'{lam}{head}{args}'
    try:
        return f'({body(node, ())})'
    except AbtError:
        return show_strategy(node)


# ----------------------------------------------------------------------------
# Star and eta machines

def gam_star_run(chi, fuel=100000, keep_states=False):
    """Self-interaction of a strategy with ⋆ moves (non-normal terms)."""
    return gam_run(levels=make_levels(chi), fuel=fuel, star=True, keep_states=keep_states)


def gam_eta_run(phi=None, psi=None, fuel=100000, *, levels=None, mode=True, keep_states=False):
    """GAM with dynamic eta expansion.  ``result.state.expansions`` holds the
    nodes added to each level; ``expanded_levels`` merges them in."""
    return gam_run(phi, psi, fuel, levels=levels, eta=mode, keep_states=keep_states)


def _graft(node, path, leaf):
    """Copy of ``node`` with ``leaf`` added at ``path`` (copying the spine)."""
    new = Node(node.move, node.ptr, node.children, node.arity, node.nbind, node.gen)
    new._memo = dict(node._memo)
    if len(path) == 1:
        new.children[path[0]] = Node(leaf.move, leaf.ptr, (), leaf.arity, leaf.nbind)
    else:
        child = node.child(path[0])
        new.children[path[0]] = _graft(child, path[1:], leaf)
    return new


def expanded_levels(state):
    """Levels with the recorded eta expansions grafted in, deepest last."""
    out = [dict(lv) if not isinstance(lv, CounterStrategy) else CounterStrategy(lv)
           for lv in state.levels]
    for (lvl, path), leaf in sorted(state.expansions.items(), key=lambda kv: len(kv[0][1])):
        forest = out[lvl]
        forest[path[0]] = _graft(forest[path[0]], path[1:], leaf)
    return out


# ----------------------------------------------------------------------------
# Fax

def fax(alphabet, depth, head=Sym('x')):
    """Copy-cat strategy rooted at ``head``: answer ``[head|_]`` and then copy
    every move back with pointer 1, ``depth`` moves deep.  Copies of the same
    move at the same remaining depth are one shared node."""
    alphabet = sorted(set(alphabet), key=move_key)
    memo = {}

    def copy(a, d):
        key = (a, d)
        if key not in memo:
            kids = {} if d <= 0 else {b: copy(b, d - 1) for b in alphabet}
            memo[key] = Node(a, 1, kids, arity=0, nbind=0)
        return memo[key]
    kids = {} if depth <= 0 else {a: copy(a, depth - 1) for a in alphabet}
    return Node(head, None, kids, arity=0, nbind=0)


def fax_forest(free, alphabet, depth):
    return CounterStrategy([(x, fax(alphabet, depth, x)) for x in free])


def strategy_moves(node):
    """Every move occurring in a strategy, player and opponent alike."""
    out, stack = set(), [node]
    while stack:
        n = stack.pop()
        out.add(n.move)
        for b, c in n.materialized():
            out.add(b)
            stack.append(c)
    return out


def fax_compose(phi, depth=None, fuel=100000):
    """Compose ``phi`` with a fax for each of its free moves and read back.
    The result equals ``phi`` up to the exploration depth."""
    from .syntax import depth as tree_depth, free_moves
    d = tree_depth(phi) if depth is None else depth
    moves = strategy_moves(phi) - {BULLET}
    psi = fax_forest(sorted(free_moves(phi), key=move_key), moves, d + 1)
    comps = strong_exhaustive(phi, psi, depth=d, fuel=fuel)
    return readback_composition(comps)


def fax_run(phi, psi, script, fuel=1000):
    """Strong run with eta enabled, the degenerate copy rule included."""
    return strong_run(phi, psi, ScriptDriver(script), fuel, eta='fax')


# ----------------------------------------------------------------------------
# Separation

SEPARATION_CONTEXT = ('z (λz x y.x) (λx y.y) (λx y.y) (λx y.x) Ω ✠ [z <- {hole}] '
                      '[x <- λx1 x2 x3 z. z (a x1 x2 x3) (b x1 x2 x3), y <- λx y.x] '
                      '[a <- λx u v. v, b <- λx.x]')

SEPARATION_CASES = {'y': 'x y', 'xy': 'x (x y)'}


@dataclass
class SeparationCase:
    name: str
    termination: Termination
    result: RunResult
    expected: object

    @property
    def ok(self):
        return self.termination.kind == 'free' and self.termination.move == self.expected


def separation_program(case):
    from .frontends import lambda_program
    return lambda_program(SEPARATION_CONTEXT.format(hole=SEPARATION_CASES[case]))


def separation_suite(fuel=2000):
    """Run the separating context against xP for P = y and P = xy."""
    from .syntax import DAIMON, OMEGA
    out = []
    for name, want in (('y', OMEGA), ('xy', DAIMON)):
        r = gam_eta_run(levels=separation_program(name).levels(), fuel=fuel)
        out.append(SeparationCase(name, r.termination, r, want))
    return out
