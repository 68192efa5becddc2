"""Translations between the states of the four machines, and lock-step checks.

Each translation works on reachable states only: a state whose shape does
not fit the translation clauses raises ``Unreachable``.  ``check_lockstep``
runs the selected machines on the same input, translates every recorded
state and reports the first stage where anything disagrees.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field

from .machines import (EMPTY_ENV, SAM_ROOT, STAR, EamState, Frame, GamState, Item,
                       SQuery, SResp, SRoot, Stage, VamItem, VamState, _env_find,
                       eam_run, gam_run, make_levels, sam_equal,
                       sam_erase, sam_pop, sam_run, stage_of_index, vam_jump, vam_run)
from .syntax import (BULLET, AbtError, Abs, Code, CounterStrategy, LazyMap, Node,
                     Num, Opp, Pl, Sym, decompile, erase, pop_dnumber, show_move)


class Unreachable(AbtError):
    pass


def _or_empty(counter):
    # a LazyMap with only generated entries is falsy, so no ``or`` here
    return {} if counter is None else counter


# ----------------------------------------------------------------------------
# VAM <-> GAM

def dview(vs, n):
    """Multiplexed view of a VAM state at opponent stage n."""
    segs = []
    while True:
        it = vs.item(Stage(n, False))
        if it.kind == 'bullet':
            segs.append((Opp(BULLET, 1),))
            break
        if it.kind == 'free':
            segs.append((Opp(it.move, n),))
            break
        if it.kind != 'jump':
            raise Unreachable(f'stage {n} holds {it.kind}')
        pl = vs.item(Stage(it.m, True))
        segs.append((Pl(pl.move, pl.ptr), Opp(it.move, n)))
        n = it.m - 1
    out = ()
    for seg in reversed(segs):
        out += seg
    return out


def _level(stage, star):
    if star:
        return 0
    return (stage.n - 1) % 2 if not stage.star else stage.n % 2


def vam_to_gam(vs, levels=None, star=False):
    items = []
    for k, it in enumerate(vs.items):
        st = stage_of_index(k)
        if it.stage != st:
            raise Unreachable(f'VAM item {k} labelled {it.stage}')
        if it.kind == 'bullet':
            if k != 0:
                raise Unreachable('bullet after stage 1')
            pos = (Opp(BULLET, 1),)
        elif st.star:
            if it.kind != 'player':
                raise Unreachable(f'stage {st} is not a player item')
            pos = items[k - 1].pos + (Pl(it.move, it.ptr),)
        else:
            pos = dview(vs, st.n)
        items.append(Item(st, pos, _level(st, star)))
    return GamState(items, levels or [], star)


def gam_to_vam(g):
    out = []
    for k, it in enumerate(g.items):
        st = it.stage
        if k == 0:
            if it.pos != (Opp(BULLET, 1),):
                raise Unreachable('the first item must be <•@1>')
            out.append(VamItem(st, 'bullet', BULLET))
            continue
        last = it.pos[-1]
        if st.star:
            out.append(VamItem(st, 'player', last.move, last.ptr))
            continue
        prev = g.items[k - 1].pos
        pl = prev[-1]
        if len(it.pos) == 1:
            if pl.ptr is not None and not (g.star and pl.move == STAR):
                raise Unreachable(f'root item {st} after a bound move')
            out.append(VamItem(st, 'free', last.move))
            continue
        if g.star and pl.ptr is None and pl.move == STAR:
            m = st.n
        else:
            m = pop_dnumber(prev[:-1], pl.ptr)
        if it.pos[:-1] != g.items[Stage(m, True).index].pos:
            raise Unreachable(f'item {st} does not extend item {m}*')
        out.append(VamItem(st, 'jump', last.move, m=m))
    return VamState(out)


def gam_items_equal(a, b):
    return [(i.stage, i.pos, i.level) for i in a.items] == \
           [(i.stage, i.pos, i.level) for i in b.items]


def check_dview_jump(vs):
    """The stamp of pop^i of the view at n is jump^i(n), for every i."""
    for k, it in enumerate(vs.items):
        st = stage_of_index(k)
        if st.star or st.n == 1:
            continue
        view = dview(vs, st.n)
        depth = len(view) // 2
        for i in range(depth + 1):
            try:
                j = vam_jump(vs, i, st.n)
            except AbtError:
                break
            if pop_dnumber(view, i) != j:
                return False
    return True


def check_gv_positions(g):
    """The views of the translated state are the ledger positions."""
    vs = gam_to_vam(g)
    for it in g.items:
        if not it.stage.star and dview(vs, it.stage.n) != it.pos:
            return False
    return True


# ----------------------------------------------------------------------------
# GAM <-> SAM

def gam_to_sam_states(g):
    """SAM state for every prefix of the ledger (one per item)."""
    out = []
    for k, it in enumerate(g.items):
        st = it.stage
        if k == 0:
            out.append(SAM_ROOT)
            continue
        prev = out[-1]
        last = it.pos[-1]
        if st.star:
            out.append(SResp(prev, last.move, last.ptr))
            continue
        head = g.items[k - 1].pos
        a, i = head[-1].move, head[-1].ptr
        if i is not None:
            m = pop_dnumber(head[:-1], i)
            r2 = out[Stage(m, True).index]
            out.append(SQuery(r2, a, prev, r2.side))
        elif g.star and a == STAR:
            out.append(SQuery(prev, a, prev, prev.side))
        else:
            out.append(SQuery(None, a, prev, 1))
    return out


def gam_to_sam(g):
    return gam_to_sam_states(g)[-1]


def sam_step_number(p):
    """The step number #: the stage at which the SAM reaches p."""
    if isinstance(p, SRoot):
        return Stage(1, False)
    if isinstance(p, SResp):
        n = sam_step_number(p.q)
        if n.star:
            raise Unreachable('response to a response')
        return Stage(n.n + 1, True)
    r = sam_step_number(p.origin)
    if not r.star:
        raise Unreachable('query answering a query')
    return Stage(r.n, False)


def sam_to_gam(p, levels=None, star=False, _memo=None):
    """Ledger of a SAM state; its head item is numbered p#."""
    memo = {} if _memo is None else _memo
    return GamState(list(_sg(p, memo)), levels or [], star)


def _sg(p, memo):
    key = id(p)
    if key in memo:
        return memo[key][1]
    if isinstance(p, SRoot):
        items = (Item(Stage(1, False), (Opp(BULLET, 1),), 0),)
    elif isinstance(p, SResp):
        base = _sg(p.q, memo)
        n = sam_step_number(p.q)
        head = base[n.index]
        items = base + (Item(Stage(n.n + 1, True), head.pos + (Pl(p.move, p.ptr),),
                             head.level),)
    else:
        base = _sg(p.origin, memo)
        n = sam_step_number(p.origin)
        if len(base) != n.index + 1:
            raise Unreachable('origin ledger does not end at its step number')
        if p.prev is None:
            items = base + (Item(Stage(n.n, False), (Opp(p.move, n.n),), 1),)
        else:
            other = _sg(p.prev, memo)
            m = sam_step_number(p.prev)
            target = other[m.index]
            if other != base[:len(other)]:
                raise Unreachable('the target ledger is not a prefix')
            items = base + (Item(Stage(n.n, False), target.pos + (Opp(p.move, n.n),),
                                 target.level),)
    memo[key] = (p, items)
    return items


def substates(p):
    """All substates of p for the relation ≺ (p included)."""
    seen, out, stack = set(), [], [p]
    while stack:
        x = stack.pop()
        if id(x) in seen:
            continue
        seen.add(id(x))
        out.append(x)
        if isinstance(x, SResp):
            stack.append(x.q)
        elif isinstance(x, SQuery):
            stack.append(x.origin)
            if x.prev is not None:
                stack.append(x.prev)
    return out


def _direct_subs(x):
    if isinstance(x, SResp):
        return [x.q]
    if isinstance(x, SQuery):
        return [x.origin] + ([] if x.prev is None else [x.prev])
    return []


def check_sam_invariants(sigma, g=None):
    """SAM invariants over the recorded states σ(ν).

    Returns a dict invariant -> bool."""
    res = {}
    res['sigma_number'] = all(sam_step_number(p) == stage_of_index(k)
                              for k, p in enumerate(sigma))
    final = sigma[-1]
    subs = substates(final)
    res['sigma_of_number'] = all(sigma[sam_step_number(p).index] is p for p in subs)
    res['precedes_monotone'] = all(sam_step_number(d).index < sam_step_number(p).index
                                   for p in subs for d in _direct_subs(p))
    memo = {}
    whole = _sg(final, memo)
    res['head_numbered'] = all(_sg(p, memo)[-1].stage == sam_step_number(p) for p in subs)
    res['prefix_extraction'] = all(
        _sg(p, memo) == whole[:sam_step_number(p).index + 1] for p in subs)
    if g is not None:
        gs = gam_to_sam_states(g)
        res['gs_number'] = all(sam_step_number(p) == stage_of_index(k)
                               for k, p in enumerate(gs))
        res['erase_agreement'] = all(sam_erase(p) == erase(it.pos)
                                     for p, it in zip(sigma, g.items))
        ok = True
        for k, it in enumerate(g.items):
            if not it.stage.star or it.pos[-1].ptr is None:
                continue
            q = it.pos[:-1]
            i = it.pos[-1].ptr
            p = sigma[k - 1]
            tgt = sam_pop(p, i)
            if sam_step_number(tgt).n != pop_dnumber(q, i):
                ok = False
        res['pointer_agreement'] = ok
    return res


# ----------------------------------------------------------------------------
# SAM -> EAM

def trad_ac(position, main, counter):
    """Concrete subterm reached by an erased position, with its binder list."""
    first = position[0].move
    if first == BULLET:
        cur, binders = main, ()
    else:
        cur = counter.get(first)
        binders = ()
        if cur is None:
            raise Unreachable(f'no counter-strategy root {show_move(first)}')
    for e in position[1:]:
        if isinstance(e, Pl):
            if not isinstance(cur, Abs):
                raise Unreachable('player move on a code')
            binders = (cur.binder,) + binders
            cur = cur.body
            if cur.move != e.move:
                raise Unreachable(f'expected {show_move(cur.move)}, got {show_move(e.move)}')
        else:
            if not isinstance(cur, Code):
                raise Unreachable('opponent move on an abstraction')
            nxt = cur.branch(e.move)
            if nxt is None:
                raise Unreachable(f'no branch {show_move(e.move)}')
            cur = nxt
    return cur, binders


def sam_to_eam(p, initial, counter=None, star=False, _memo=None):
    """EAM state matching a SAM state (a response maps like its query)."""
    memo = {} if _memo is None else _memo
    return _se(p, initial, _or_empty(counter), memo)


def _se(p, init, counter, memo):
    key = id(p)
    if key in memo:
        return memo[key][1]
    if isinstance(p, SRoot):
        out = init
    elif isinstance(p, SResp):
        out = _se(p.q, init, counter, memo)
    else:
        r = _se(p.origin, init, counter, memo)
        if p.prev is None:
            m = counter.get(p.move)
            if m is None:
                raise Unreachable(f'no counter-strategy root {show_move(p.move)}')
            env_parent = EMPTY_ENV
            skip = None
        else:
            r2 = _se(p.prev, init, counter, memo)
            m = r2.code.branch(p.move)
            if m is None:
                raise Unreachable(f'no branch {show_move(p.move)}')
            env_parent = r2.env
            skip = STAR if (p.move == STAR and p.prev is p.origin) else None
        env = env_parent
        if m.binder is not None:
            env = Frame(m.binder, r.code, r.env, parent=env_parent, skip=skip)
        out = EamState(m.body, env)
    memo[key] = (p, out)
    return out


def eam_equal(a, b):
    if a.code is not b.code:
        return False
    return _env_equal(a.env, b.env)


def _env_equal(x, y):
    while True:
        if x is y:
            return True
        if x is None or y is None:
            return False
        if (x.binder, x.root, x.skip) != (y.binder, y.root, y.skip):
            return False
        if x.top is not None or y.top is not None:
            if x.top is None or y.top is None or x.top is not y.top:
                return False
        elif x.code is not y.code or not _env_equal(x.env, y.env):
            return False
        x, y = x.parent, y.parent


def check_eam_invariants(sigma, main, counter, init):
    """EAM invariants on every recorded SAM response: the erased position
    names the running subterm, and environment lookups agree with pointers."""
    memo = {}
    inv1 = inv2 = True
    for p in sigma:
        if not isinstance(p, SResp):
            continue
        st = _se(p, init, counter, memo)
        code, binders = trad_ac(sam_erase(p), main, counter)
        if code is not st.code:
            inv1 = False
        if p.ptr is not None:
            tgt = sam_pop(p.q, p.ptr)
            if isinstance(tgt, SRoot):
                continue
            x = binders[p.ptr]
            fr = _env_find(st.env, x)
            owner = _se(tgt.origin, init, counter, memo)
            want = owner.code.branch(p.move)
            got = None if fr is None else fr.get(p.move)
            if want is None:
                inv2 = inv2 and got is None
            elif got is None or got[0] is not want:
                inv2 = False
    return {'ac_subterm': inv1, 'env_lookup': inv2}


# ----------------------------------------------------------------------------
# Lock-step checking

@dataclass
class TranslationReport:
    machines: tuple
    stages: int = 0
    records: list = field(default_factory=list)
    divergences: list = field(default_factory=list)
    roundtrips: dict = field(default_factory=dict)
    invariants: dict = field(default_factory=dict)
    terminations: dict = field(default_factory=dict)
    seed: object = None

    @property
    def ok(self):
        return not self.divergences

    def diverge(self, stage, what):
        self.divergences.append((str(stage), what))

    @property
    def first_divergence(self):
        return self.divergences[0] if self.divergences else None

    def to_json(self):
        return {'machines': list(self.machines), 'stages': self.stages, 'ok': self.ok,
                'seed': self.seed,
                'divergences': [{'stage': s, 'what': w} for s, w in self.divergences],
                'roundtrips': self.roundtrips, 'invariants': self.invariants,
                'terminations': {k: v.to_json() for k, v in self.terminations.items()}}


def concrete_pair(phi, psi):
    """Concrete syntax for a strategy and counter-strategy, binder tokens unique."""
    fresh = itertools.count(1)
    main = decompile(phi, fresh)
    items = [(a, decompile(t, fresh)) for a, t in dict.items(psi or {})]
    gen = None
    if getattr(psi, 'gen', None) is not None:
        def gen(a):
            t = psi.get(a)
            return None if t is None else decompile(t, fresh)
    return main, LazyMap(items, gen)


ALL_MACHINES = ('gam', 'vam', 'sam', 'eam')


def check_lockstep(phi=None, psi=None, machines=ALL_MACHINES, fuel=10000, *, star=False,
                   concrete=None):
    """Run the machines, translate every recorded state and compare.

    ``concrete`` may give the (main, counter) concrete terms the EAM runs on;
    by default they are decompiled from phi and psi."""
    if star:
        levels = make_levels(phi)
        psi = None
    else:
        levels = make_levels(phi, psi if psi is not None else CounterStrategy())
    runs = {'gam': gam_run(levels=levels, fuel=fuel, star=star, keep_states=True)}
    if 'vam' in machines:
        runs['vam'] = vam_run(levels=levels, fuel=fuel, star=star, keep_states=True)
    if 'sam' in machines or 'eam' in machines:
        runs['sam'] = sam_run(levels=levels, fuel=fuel, star=star, keep_states=True)
    if 'eam' in machines:
        main, counter = concrete or concrete_pair(phi, psi)
        runs['eam'] = eam_run(main, counter, fuel=fuel, star=star, keep_states=True)
    else:
        main = counter = None
    return compare_runs(runs, machines, star=star, levels=levels, main=main, counter=counter)


def compare_runs(runs, machines=ALL_MACHINES, *, star=False, levels=None, main=None,
                 counter=None, gam_states=None):
    """Compare recorded runs stage by stage.  ``gam_states`` may replace the
    GAM's recorded states (used to check that corruption is detected)."""
    rep = TranslationReport(tuple(machines))
    g_states = gam_states if gam_states is not None else runs['gam'].states
    rep.stages = len(g_states)
    rep.terminations = {k: runs[k].termination for k in machines if k in runs}
    ref = runs['gam'].termination
    for k, t in rep.terminations.items():
        if (t.kind, t.move, t.stage) != (ref.kind, ref.move, ref.stage):
            rep.diverge(t.stage, f'{k} halts with {t}, gam with {ref}')

    if 'vam' in machines:
        v_states = runs['vam'].states
        if len(v_states) != len(g_states):
            rep.diverge(stage_of_index(min(len(v_states), len(g_states))),
                        'vam and gam ran for different lengths')
        rt = True
        for k, (g, v) in enumerate(zip(g_states, v_states)):
            st = stage_of_index(k)
            try:
                gv = gam_to_vam(g)
                vg = vam_to_gam(v, levels, star)
            except AbtError as e:
                rep.diverge(st, f'vam/gam translation: {e}')
                break
            same = gv == v and gam_items_equal(vg, g)
            rep.records.append((str(st), 'vam', same))
            if not same:
                rep.diverge(st, 'vam state differs from the translated gam state')
                break
            rt = rt and gam_items_equal(vam_to_gam(gv, levels, star), g) \
                and gam_to_vam(vg) == v
        rep.roundtrips['gv_vg'] = rt
        final = v_states[-1] if v_states else None
        rep.invariants['dview_jump'] = final is not None and check_dview_jump(final)
        rep.invariants['gv_positions'] = all(check_gv_positions(g) for g in g_states[-1:])
        for name in ('dview_jump', 'gv_positions'):
            if not rep.invariants[name]:
                rep.diverge(stage_of_index(len(g_states) - 1), f'invariant {name} fails')

    if 'sam' in machines or 'eam' in machines:
        sigma = runs['sam'].states
        if len(sigma) != len(g_states):
            rep.diverge(stage_of_index(min(len(sigma), len(g_states))),
                        'sam and gam ran for different lengths')
        memo = {}
        rt = True
        for k, (g, p) in enumerate(zip(g_states, sigma)):
            st = stage_of_index(k)
            try:
                gs = gam_to_sam(g)
                sg = GamState(list(_sg(p, memo)), levels or [], star)
            except AbtError as e:
                rep.diverge(st, f'sam/gam translation: {e}')
                break
            same = sam_equal(gs, p) and gam_items_equal(sg, g)
            rep.records.append((str(st), 'sam', same))
            if not same:
                rep.diverge(st, 'sam state differs from the translated gam state')
                break
            rt = rt and sam_equal(gam_to_sam(sg), p) and gam_items_equal(sam_to_gam(gs), g)
        rep.roundtrips['gs_sg'] = rt
        if sigma:
            inv = check_sam_invariants(sigma, g_states[-1] if g_states else None)
            rep.invariants.update(inv)
            for name, ok in inv.items():
                if not ok:
                    rep.diverge(stage_of_index(len(sigma) - 1), f'invariant {name} fails')

    if 'eam' in machines:
        e_states = runs['eam'].states
        init = e_states[0]
        memo = {}
        for k, e in enumerate(e_states):
            idx = Stage(k + 1, False).index
            st = Stage(k + 1, False)
            if idx >= len(sigma):
                rep.diverge(st, 'eam ran past the sam')
                break
            try:
                se = _se(sigma[idx], init, _or_empty(counter), memo)
            except AbtError as e2:
                rep.diverge(st, f'sam/eam translation: {e2}')
                break
            same = eam_equal(se, e)
            if idx + 1 < len(sigma):
                same = same and eam_equal(_se(sigma[idx + 1], init, _or_empty(counter), memo), e)
            rep.records.append((str(st), 'eam', same))
            if not same:
                rep.diverge(st, 'eam state differs from the translated sam state')
                break
        inv = check_eam_invariants(sigma, main, _or_empty(counter), init)
        rep.invariants.update(inv)
        for name, ok in inv.items():
            if not ok:
                rep.diverge(stage_of_index(len(sigma) - 1), f'invariant {name} fails')
    return rep


def corrupt_stamp(g_states, stage):
    """Copy of recorded GAM states where the opponent item at ``stage`` gets
    a wrong stamp (a negative control for ``compare_runs``)."""
    k = Stage(*stage).index
    out = []
    for s in g_states:
        s2 = s.copy()
        if k < len(s2.items):
            it = s2.items[k]
            last = it.pos[-1]
            if isinstance(last, Opp):
                bad = it.pos[:-1] + (Opp(last.move, last.stamp + 1000),)
                s2.items[k] = Item(it.stage, bad, it.level, it.eta)
        out.append(s2)
    return out


# ----------------------------------------------------------------------------
# Random finite strategies

FREE_POOL = ('x', 'y', 'z')


def random_tree(rng, root_depth, depth, branching, p_free=0.2, pool=FREE_POOL,
                opp_moves=None):
    """Random strategy node.  ``root_depth`` opponent moves are already in the
    position, so pointers range over 0 .. root_depth-1."""
    if rng.random() < p_free:
        move, ptr = Sym(rng.choice(pool)), None
    else:
        ptr = rng.randrange(root_depth)
        move = Num(rng.randint(1, branching))
    kids = {}
    if depth > 1:
        labels = opp_moves or [Num(k) for k in range(1, branching + 1)]
        for b in rng.sample(labels, rng.randint(0, min(branching, len(labels)))):
            kids[b] = random_tree(rng, root_depth + 1, depth - 1, branching, p_free, pool,
                                  opp_moves)
    return Node(move, ptr, kids)


def random_pair(seed, depth=6, branching=3, p_free=0.2):
    """Seeded random (φ, ψ): ψ binds some free names and φ's root calls one
    of them (a root answering • at once would make the run trivial)."""
    rng = random.Random(seed)
    roots = [x for x in FREE_POOL if rng.random() < 0.7] or [rng.choice(FREE_POOL)]
    psi = CounterStrategy([(Sym(x), random_tree(rng, 1, rng.randint(1, depth), branching,
                                                p_free)) for x in roots])
    phi = random_tree(rng, 1, rng.randint(1, depth), branching, p_free)
    phi.move, phi.ptr = Sym(rng.choice(roots)), None
    return phi, psi
