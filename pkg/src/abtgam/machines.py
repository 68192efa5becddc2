"""The four weak machines: GAM, VAM, SAM and EAM.

All four are driven by the same inputs: a list of forests ("levels").
Level 0 holds the strategy under the bullet; level 1 is the counter-strategy.
Further levels are only used by the GAM, where a free move of level k hooks
onto a root of level k+1 (the separation example needs three hops).  With
``star`` set there is a single self-interacting strategy and the redex
indirection rule is enabled.

Stage labels are ``Stage(n, star)``; stamps are plain stage numbers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .syntax import (BULLET, STAR, AbtError, CounterStrategy, Num, Opp,
                     Pl, erase, move_key, names, pop_dnumber, show_move,
                     show_position, show_ptr, walk)


class MalformedState(AbtError):
    pass


class Stage(NamedTuple):
    n: int
    star: bool

    def __str__(self):
        return f'{self.n}*' if self.star else str(self.n)

    @property
    def index(self):
        """Position of this stage in the sequence 1, 2*, 2, 3*, 3, ..."""
        return 2 * self.n - (3 if self.star else 2)


def stage_of_index(k):
    return Stage(k // 2 + 1, False) if k % 2 == 0 else Stage(k // 2 + 2, True)


def parse_stage(s):
    s = str(s)
    return Stage(int(s.rstrip('*')), s.endswith('*'))


@dataclass(frozen=True)
class Termination:
    """kind is 'answer' (case 1), 'free' (case 2), 'blocked' (case 3) or 'fuel'.

    ``stage`` is the stage of the last player move played.  For a blocked
    run this is the move whose answer left the domain of the strategy."""
    kind: str
    move: object = None
    stage: Optional[Stage] = None
    query: Optional[tuple] = None
    level: Optional[int] = None

    @property
    def case(self):
        return {'answer': 1, 'free': 2, 'blocked': 3}.get(self.kind)

    @property
    def at_root(self):
        return self.kind == 'answer'

    @property
    def exit_code(self):
        return {'answer': 0, 'free': 1, 'blocked': 2, 'fuel': 3}[self.kind]

    def same_outcome(self, other):
        return (self.kind, self.move, self.stage) == (other.kind, other.move, other.stage)

    def __str__(self):
        if self.kind == 'answer':
            return f'Answer({show_move(self.move)}) at {self.stage}'
        if self.kind == 'free':
            return f'FreeAnswer({show_move(self.move)}) at {self.stage}'
        if self.kind == 'blocked':
            what = show_move(self.move) if self.query is None else show_position(self.query)
            return f'Blocked({what}) at {self.stage}'
        return f'FuelExhausted at {self.stage}'

    def to_json(self):
        return {'kind': self.kind, 'case': self.case,
                'move': None if self.move is None else show_move(self.move),
                'stage': None if self.stage is None else str(self.stage),
                'query': None if self.query is None else show_position(self.query)}


@dataclass
class TraceStep:
    step: Stage
    rule: str
    move: object
    pointer: Optional[int] = None
    stamp: Optional[int] = None
    position: tuple = ()
    machine: str = 'gam'
    phase: str = 'plain'
    eta: bool = False

    def to_json(self):
        return {'step': str(self.step), 'phase': self.phase, 'machine': self.machine,
                'rule': self.rule, 'move': show_move(self.move),
                'pointer': self.pointer, 'stamp': self.stamp,
                'position': show_position(self.position)}

    def __str__(self):
        extra = ' eta' if self.eta else ''
        return f'{str(self.step):>5}  {self.rule:<8} {show_position(self.position)}{extra}'


def make_levels(phi, psi=None, more=()):
    levels = [{BULLET: phi}]
    if psi is not None:
        levels.append(CounterStrategy(psi))
    levels.extend(CounterStrategy(f) for f in more)
    return levels


# ----------------------------------------------------------------------------
# GAM

class Item(NamedTuple):
    stage: Stage
    pos: tuple
    level: int
    eta: bool = False


class _Leaf(NamedTuple):
    move: object
    ptr: Optional[int]
    arity: int = 0
    nbind: int = 0


def _arity(node):
    if node.arity is not None:
        return node.arity
    return sum(1 for b in node.children if isinstance(b, Num))


@dataclass
class GamState:
    """Ledger of items numbered 1, 2*, 2, 3*, ... plus eta expansions."""
    items: list
    levels: list
    star: bool = False
    eta: object = False
    expansions: dict = field(default_factory=dict)

    def item(self, stage):
        k = Stage(*stage).index
        if k < 0 or k >= len(self.items):
            raise MalformedState(f'no item {stage}')
        return self.items[k]

    @property
    def head(self):
        return self.items[-1]

    def copy(self):
        return GamState(list(self.items), self.levels, self.star, self.eta,
                        dict(self.expansions))

    def node_at(self, level, path):
        """Strategy node reached by an opponent-name path, eta expansions included."""
        tree = self.levels[level].get(path[0]) if path else None
        node = None if tree is None else walk(tree, path[1:])
        if node is None:
            node = self.expansions.get((level, path))
        return node

    def positions(self, side=None):
        """Phi (side 0) or Psi (side 1): positions of items 2n-1, 2n* and 2n, 2n+1*."""
        return [it for it in self.items if side is None or it.level % 2 == side]


@dataclass
class RunResult:
    trace: list
    termination: Termination
    state: object
    states: list = None


def gam_initial(levels, star=False, eta=False):
    first = Item(Stage(1, False), (Opp(BULLET, 1),), 0)
    return GamState([first], levels, star, eta)


def _opp_rule(n, level, star, kind):
    if star:
        return 'n' if kind == 'b' else f'n_{kind}'
    base = '2n' if n % 2 == 0 else '2n+1'
    return base if kind == 'b' and n % 2 == 1 else f'{base}_{kind}'


def _pl_rule(n, star, eta=False):
    if star:
        return 'n*'
    base = '2n' if n % 2 == 0 else '2n+1'
    return f'{base}_eta' if eta else f'{base}*'


def gam_step(state, inplace=False):
    """One GAM transition.  Returns (new state, TraceStep) or a Termination."""
    s = state if inplace else state.copy()
    head = s.head
    st = head.stage
    phase = 'star' if s.star else 'plain'
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
        return s, TraceStep(item.stage, _pl_rule(n, s.star, eta), node.move, node.ptr,
                            None, pos, phase=phase, eta=eta)
    n = st.n
    q, last = head.pos[:-1], head.pos[-1]
    a, i = last.move, last.ptr
    if i is not None:
        j = pop_dnumber(q, i)
        if j == 1:
            return Termination('answer', a, st, level=head.level)
        target = s.item(Stage(j, True))
        pos = target.pos + (Opp(a, n),)
        item = Item(Stage(n, False), pos, target.level)
        rule = _opp_rule(n, head.level, s.star, 'b')
    elif s.star and a == STAR:
        pos = head.pos + (Opp(STAR, n),)
        item = Item(Stage(n, False), pos, head.level)
        rule = _opp_rule(n, head.level, s.star, 'star')
    else:
        nxt = head.level + 1
        if s.star or nxt >= len(s.levels) or a not in s.levels[nxt]:
            return Termination('free', a, st, level=head.level)
        pos = (Opp(a, n),)
        item = Item(Stage(n, False), pos, nxt)
        rule = _opp_rule(n, head.level, s.star, 'f')
    s.items.append(item)
    return s, TraceStep(item.stage, rule, a, i, n, pos, phase=phase)


def _eta_expand(s, head):
    """Dynamic eta-expansion at an opponent item outside the strategy."""
    q = head.pos
    if len(q) < 3:
        return None
    m = q[-1].move
    r_path = names(q[:-1])
    base = s.node_at(head.level, r_path)
    if base is None:
        return None
    n1 = base.nbind or 0
    n2 = _arity(base)
    if isinstance(m, Num):
        if m.n <= n2:
            return None
        move = Num(m.n - n2 + n1)
    elif n1 == 0 and n2 == 0:
        move = m
    else:
        return None
    leaf = _Leaf(move, 1)
    s.expansions[(head.level, names(q))] = leaf
    return leaf


def gam_run(phi=None, psi=None, fuel=100000, *, levels=None, star=False, eta=False,
            keep_states=False):
    """Run the GAM until it stops or ``fuel`` transitions have fired."""
    if levels is None:
        levels = make_levels(phi, psi)
    s = gam_initial(levels, star, eta)
    phase = 'star' if star else 'plain'
    trace = [TraceStep(Stage(1, False), '1', BULLET, None, 1, s.items[0].pos, phase=phase)]
    states = [s.copy()] if keep_states else None
    for _ in range(fuel):
        out = gam_step(s, inplace=True)
        if isinstance(out, Termination):
            return RunResult(trace, out, s, states)
        trace.append(out[1])
        if keep_states:
            states.append(s.copy())
    return RunResult(trace, Termination('fuel', None, s.head.stage), s, states)


def check_gam_state(state):
    """Structural invariants of a reachable ledger (used by property tests)."""
    seen = set()
    for k, it in enumerate(state.items):
        if it.stage != stage_of_index(k):
            raise MalformedState(f'item {k} labelled {it.stage}')
        stamps = [e.stamp for e in it.pos[0::2]]
        if any(a >= b for a, b in zip(stamps, stamps[1:])):
            raise MalformedState(f'stamps not increasing at {it.stage}')
        if not it.stage.star:
            if stamps[-1] != it.stage.n or stamps[-1] in seen:
                raise MalformedState(f'bad stamp at {it.stage}')
            seen.add(stamps[-1])
        for kk in range(1, len(it.pos), 2):
            ptr = it.pos[kk].ptr
            if ptr is not None and kk - 1 - 2 * ptr < 0:
                raise MalformedState(f'dangling pointer at {it.stage}')
    return True


# ----------------------------------------------------------------------------
# Multiplexed trees (Phi and Psi) and their text rendering

class MTree:
    """Multiplexed tree node: opponent move with stamp, optional player move."""
    __slots__ = ('opp', 'pl', 'kids', 'level')

    def __init__(self, opp, level):
        self.opp, self.pl, self.kids, self.level = opp, None, {}, level

    def key(self):
        return (move_key(self.opp.move), self.opp.stamp)

    def render(self):
        parts = [str(self.opp)]
        if self.pl is not None:
            parts.append(str(self.pl))
        for k in sorted(self.kids.values(), key=MTree.key):
            parts.append(k.render())
        return '(' + ' '.join(parts) + ')'

    def stamps(self):
        out, stack = [], [self]
        while stack:
            t = stack.pop()
            out.append(t.opp.stamp)
            stack.extend(t.kids.values())
        return sorted(out)


def multiplexed_trees(items):
    """Build the multiplexed trees from ledger items; roots sorted by stamp."""
    roots = {}
    for it in items:
        p = it.pos
        root = roots.get(p[0].stamp)
        if root is None:
            root = roots[p[0].stamp] = MTree(p[0], it.level)
        t = root
        for k in range(1, len(p)):
            e = p[k]
            if k % 2 == 1:
                t.pl = e
            else:
                c = t.kids.get(e.stamp)
                if c is None:
                    c = t.kids[e.stamp] = MTree(e, it.level)
                t = c
    return [roots[k] for k in sorted(roots)]


def phi_psi(items):
    trees = multiplexed_trees(items)
    return ([t for t in trees if t.level % 2 == 0], [t for t in trees if t.level % 2 == 1])


def render_trees(trees):
    return '\n'.join(t.render() for t in trees)


def side_stamps(items, side):
    trees = [t for t in multiplexed_trees(items) if t.level % 2 == side]
    return sorted(s for t in trees for s in t.stamps())


def _mtoken(tok):
    tok = tok.strip()
    return tok


def parse_mtrees(text):
    """Parse the rendering produced by ``render_trees`` back into nested tuples."""
    import re
    toks = re.findall(r'\(|\)|<[^>]*>|\[[^\]]*\]', text)
    k = 0

    def tree():
        nonlocal k
        assert toks[k] == '('
        k += 1
        opp = toks[k]
        k += 1
        pl = None
        if toks[k].startswith('['):
            pl = toks[k]
            k += 1
        kids = []
        while toks[k] == '(':
            kids.append(tree())
        k += 1
        return (opp, pl, tuple(sorted(kids)))
    out = []
    while k < len(toks):
        out.append(tree())
    return out


# ----------------------------------------------------------------------------
# VAM

class VamItem(NamedTuple):
    """kind: 'bullet', 'player' (move, ptr), 'free' (move) or 'jump' (move, m)."""
    stage: Stage
    kind: str
    move: object
    ptr: Optional[int] = None
    m: Optional[int] = None

    def __str__(self):
        if self.kind == 'player':
            return f'[{show_move(self.move)}|{show_ptr(self.ptr)}]'
        if self.kind == 'jump':
            return f'<{show_move(self.move)},{self.m}*>'
        return show_move(self.move)


class VamState:
    def __init__(self, items):
        self.items = list(items)

    def item(self, stage):
        k = Stage(*stage).index
        if k < 0 or k >= len(self.items):
            raise MalformedState(f'no VAM item {stage}')
        return self.items[k]

    def __eq__(self, other):
        return isinstance(other, VamState) and self.items == other.items

    def __len__(self):
        return len(self.items)


def vam_jump(state, i, n):
    """jump^i(n): follow i jump annotations back from opponent stage n."""
    for _ in range(i):
        it = state.item(Stage(n, False))
        if it.kind != 'jump':
            raise MalformedState(f'cannot jump from stage {n}')
        n = it.m - 1
    return n


def vam_view(state, n):
    """The view at opponent stage n, as an unstamped position."""
    segs = []
    while True:
        it = state.item(Stage(n, False))
        if it.kind in ('bullet', 'free'):
            segs.append((Opp(it.move),))
            break
        if it.kind != 'jump':
            raise MalformedState(f'stage {n} is not an opponent item')
        pl = state.item(Stage(it.m, True))
        segs.append((Pl(pl.move, pl.ptr), Opp(it.move)))
        n = it.m - 1
    out = ()
    for seg in reversed(segs):
        out += seg
    return out


def _side_lookup(levels, side, star, path):
    tree = levels[0 if star else side]
    root = tree.get(path[0])
    return None if root is None else walk(root, path[1:])


def vam_run(phi=None, psi=None, fuel=100000, *, levels=None, star=False, keep_states=False):
    if levels is None:
        levels = make_levels(phi, psi)
    if len(levels) > 2:
        raise AbtError('the VAM handles a strategy and one counter-strategy')
    s = VamState([VamItem(Stage(1, False), 'bullet', BULLET)])
    trace = [TraceStep(Stage(1, False), '1', BULLET, machine='vam')]
    states = [VamState(s.items)] if keep_states else None
    phase = 'star' if star else 'plain'
    for _ in range(fuel):
        head = s.items[-1]
        st = head.stage
        if not st.star:
            n = st.n + 1
            side = 0 if star else (st.n + 1) % 2
            view = vam_view(s, st.n)
            node = _side_lookup(levels, side, star, names(view))
            if node is None:
                return RunResult(trace, Termination('blocked', view[-1].move,
                                                    Stage(st.n, True) if st.n > 1 else st,
                                                    query=view, level=side), s, states)
            new = VamItem(Stage(n, True), 'player', node.move, node.ptr)
            rule = _pl_rule(n, star)
        else:
            n = st.n
            a, i = head.move, head.ptr
            side = 0 if star else n % 2
            if i is not None:
                j = vam_jump(s, i, n - 1)
                if j == 1:
                    return RunResult(trace, Termination('answer', a, st, level=side), s, states)
                new = VamItem(Stage(n, False), 'jump', a, m=j)
                rule = _opp_rule(n, side, star, 'b')
            elif star and a == STAR:
                new = VamItem(Stage(n, False), 'jump', a, m=n)
                rule = _opp_rule(n, side, star, 'star')
            elif not star and side == 0 and len(levels) > 1 and a in levels[1]:
                new = VamItem(Stage(n, False), 'free', a)
                rule = _opp_rule(n, side, star, 'f')
            else:
                return RunResult(trace, Termination('free', a, st, level=side), s, states)
        s.items.append(new)
        trace.append(TraceStep(new.stage, rule, new.move, new.ptr, None, (), machine='vam',
                               phase=phase))
        if keep_states:
            states.append(VamState(s.items))
    return RunResult(trace, Termination('fuel', None, s.items[-1].stage), s, states)


# ----------------------------------------------------------------------------
# SAM

class SRoot:
    """The initial query •."""
    __slots__ = ()
    move = BULLET
    side = 0
    num = Stage(1, False)
    path = (BULLET,)

    def __repr__(self):
        return '•'


SAM_ROOT = SRoot()


class SQuery:
    """``r'<a, r>`` (prev = r') or ``<a, r>`` (prev None, a counter-strategy root)."""
    __slots__ = ('prev', 'move', 'origin', 'side', 'num', 'path')

    def __init__(self, prev, move, origin, side):
        self.prev, self.move, self.origin, self.side = prev, move, origin, side
        self.num = Stage(origin.num.n, False)
        self.path = (move,) if prev is None else prev.q.path + (move,)

    def __repr__(self):
        pre = '' if self.prev is None else repr(self.prev)
        return f'{pre}<{show_move(self.move)},{self.origin.num}>'


class SResp:
    """``q[a|k]``."""
    __slots__ = ('q', 'move', 'ptr', 'side', 'num')

    def __init__(self, q, move, ptr):
        self.q, self.move, self.ptr = q, move, ptr
        self.side = q.side
        self.num = Stage(q.num.n + 1, True)

    def __repr__(self):
        return f'{self.q!r}[{show_move(self.move)}|{show_ptr(self.ptr)}]'


def sam_pop(q, i):
    for _ in range(i):
        if not isinstance(q, SQuery) or q.prev is None:
            raise MalformedState('pop beyond the root of a SAM state')
        q = q.prev.q
    return q


def sam_erase(p):
    """Flat unstamped position of a SAM state."""
    out = []
    while True:
        if isinstance(p, SResp):
            out.append(Pl(p.move, p.ptr))
            p = p.q
        elif isinstance(p, SQuery):
            out.append(Opp(p.move))
            if p.prev is None:
                break
            p = p.prev
        else:
            out.append(Opp(BULLET))
            break
    return tuple(reversed(out))


def sam_equal(a, b):
    seen = set()
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        if x is y or (id(x), id(y)) in seen:
            continue
        seen.add((id(x), id(y)))
        if type(x) is not type(y):
            return False
        if isinstance(x, SResp):
            if (x.move, x.ptr) != (y.move, y.ptr):
                return False
            stack.append((x.q, y.q))
        elif isinstance(x, SQuery):
            if x.move != y.move or (x.prev is None) != (y.prev is None):
                return False
            stack.append((x.origin, y.origin))
            if x.prev is not None:
                stack.append((x.prev, y.prev))
    return True


def sam_run(phi=None, psi=None, fuel=100000, *, levels=None, star=False, keep_states=False):
    if levels is None:
        levels = make_levels(phi, psi)
    if len(levels) > 2:
        raise AbtError('the SAM handles a strategy and one counter-strategy')
    p = SAM_ROOT
    trace = [TraceStep(Stage(1, False), '1', BULLET, machine='sam')]
    states = [p] if keep_states else None
    phase = 'star' if star else 'plain'
    for _ in range(fuel):
        if not isinstance(p, SResp):
            n = p.num.n + 1
            node = _side_lookup(levels, p.side, star, p.path)
            if node is None:
                return RunResult(trace, Termination('blocked', p.move,
                                                    Stage(p.num.n, True) if p.num.n > 1 else p.num,
                                                    query=sam_erase(p), level=p.side), p, states)
            p = SResp(p, node.move, node.ptr)
            rule = _pl_rule(n, star)
        else:
            n = p.num.n
            a, i = p.move, p.ptr
            if i is not None:
                target = sam_pop(p.q, i)
                if isinstance(target, SRoot):
                    return RunResult(trace, Termination('answer', a, p.num, level=p.side), p, states)
                r2 = target.origin
                p = SQuery(r2, a, p, r2.side)
                rule = _opp_rule(n, p.side, star, 'b')
            elif star and a == STAR:
                p = SQuery(p, a, p, p.side)
                rule = _opp_rule(n, p.side, star, 'star')
            elif not star and p.side == 0 and len(levels) > 1 and a in levels[1]:
                p = SQuery(None, a, p, 1)
                rule = _opp_rule(n, 0, star, 'f')
            else:
                return RunResult(trace, Termination('free', a, p.num, level=p.side), p, states)
        trace.append(TraceStep(p.num, rule, p.move, getattr(p, 'ptr', None), machine='sam',
                               phase=phase))
        if keep_states:
            states.append(p)
    return RunResult(trace, Termination('fuel', None, p.num), p, states)


# ----------------------------------------------------------------------------
# EAM

class Frame:
    """One environment layer.  ``code`` supplies the closures ``M_b[env]`` bound
    to ``[b|binder]``; the top frame (binder None) maps counter-strategy roots;
    ``root`` marks the binder of the strategy's own root."""
    __slots__ = ('binder', 'code', 'env', 'parent', 'top', 'root', 'skip')

    def __init__(self, binder, code=None, env=None, parent=None, top=None, root=False,
                 skip=None):
        self.binder, self.code, self.env, self.parent = binder, code, env, parent
        self.top, self.root, self.skip = top, root, skip

    def get(self, b):
        if self.top is not None:
            m = self.top.get(b)
            return None if m is None else (m, EMPTY_ENV)
        if self.code is None or b == self.skip:
            return None
        m = self.code.branch(b)
        return None if m is None else (m, self.env)


EMPTY_ENV = None


class EamState(NamedTuple):
    code: object
    env: object

    def __str__(self):
        return f'<{self.code!r}, ...>'


def _env_find(env, binder):
    while env is not None:
        if env.binder == binder and env.top is None:
            return env
        env = env.parent
    return None


def _env_top(env):
    while env is not None:
        if env.top is not None:
            return env
        env = env.parent
    return None


def eam_initial(main, counter=None):
    """``<P, [a_i|_] <- M_i[]>`` for main = (λx.P) and a concrete counter-strategy."""
    top = Frame(None, top=counter if counter is not None else {})
    env = Frame(main.binder, parent=top, root=True) if main.binder else top
    return EamState(main.body, env)


def eam_step(state, star=False):
    """One EAM transition: returns a new state, or a Termination kind tuple."""
    code, env = state
    a, x = code.move, code.star
    skip = None
    if x is None:
        if star and a == STAR:
            clo = (code.branch(STAR), env)
            skip = STAR
            if clo[0] is None:
                return ('blocked', a)
        else:
            top = _env_top(env)
            found = None if top is None else top.get(a)
            if found is None:
                return ('free', a)
            clo = found
    else:
        fr = _env_find(env, x)
        if fr is None:
            raise MalformedState(f'binder {x} not in the environment')
        if fr.root:
            return ('answer', a)
        clo = fr.get(a)
        if clo is None:
            return ('blocked', a)
    m, env2 = clo
    if m.binder is not None:
        env2 = Frame(m.binder, code, env, parent=env2, skip=skip)
    return EamState(m.body, env2)


def eam_run(main, counter=None, fuel=100000, *, star=False, keep_states=False):
    """Run the EAM; halting stages are reported in GAM numbering."""
    s = eam_initial(main, counter)
    trace = [TraceStep(Stage(1, False), '1', BULLET, machine='eam')]
    states = [s] if keep_states else None
    k = 0
    for _ in range(fuel):
        out = eam_step(s, star)
        stage = Stage(k + 2, True)
        if isinstance(out, tuple) and not isinstance(out, EamState):
            kind, a = out
            return RunResult(trace, Termination(kind, a, stage), s, states)
        trace.append(TraceStep(stage, 'eam', s.code.move, None, machine='eam',
                               phase='star' if star else 'plain'))
        s = out
        k += 1
        if keep_states:
            states.append(s)
    return RunResult(trace, Termination('fuel', None, Stage(k + 1, False)), s, states)
