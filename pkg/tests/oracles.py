"""Independent oracles for the machine tests.

A plain substitution-based normal-order normalizer over tuple terms, and a
generator of simply-typed eta-long terms.  Nothing here imports abtgam, so
the machines are checked against code that shares no logic with them.

Terms: ('var', x) | ('lam', x, body) | ('app', f, a).
Types: 'o' | ('->', a, b).
"""

import itertools
import random

# ----------------------------------------------------------------------------
# Terms

O = 'o'


def arrow(*ts):
    t = ts[-1]
    for a in reversed(ts[:-1]):
        t = ('->', a, t)
    return t


def args_of(t):
    out = []
    while t != O:
        out.append(t[1])
        t = t[2]
    return out


def size(t):
    if t[0] == 'var':
        return 1
    if t[0] == 'lam':
        return 1 + size(t[2])
    return 1 + size(t[1]) + size(t[2])


def free_vars(t):
    if t[0] == 'var':
        return {t[1]}
    if t[0] == 'lam':
        return free_vars(t[2]) - {t[1]}
    return free_vars(t[1]) | free_vars(t[2])


_counter = itertools.count()


def _fresh(avoid, base='w'):
    while True:
        v = f'{base}{next(_counter)}'
        if v not in avoid:
            return v


def subst(t, x, s):
    """Capture-avoiding t[x := s]."""
    if t[0] == 'var':
        return s if t[1] == x else t
    if t[0] == 'app':
        return ('app', subst(t[1], x, s), subst(t[2], x, s))
    y, body = t[1], t[2]
    if y == x:
        return t
    fs = free_vars(s)
    if y in fs:
        z = _fresh(fs | free_vars(body) | {x})
        body = subst(body, y, ('var', z))
        y = z
    return ('lam', y, subst(body, x, s))


class OutOfFuel(Exception):
    pass


def normalize(t, fuel=100000):
    """Normal-order beta normal form (leftmost outermost redex first)."""
    box = [fuel]

    def tick():
        box[0] -= 1
        if box[0] < 0:
            raise OutOfFuel

    def whnf(t):
        while t[0] == 'app':
            f = whnf(t[1])
            if f[0] != 'lam':
                return ('app', f, t[2])
            tick()
            t = subst(f[2], f[1], t[2])
        return t

    def nf(t):
        t = whnf(t)
        if t[0] == 'lam':
            return ('lam', t[1], nf(t[2]))
        if t[0] == 'var':
            return t
        spine = []
        while t[0] == 'app':
            spine.append(t[2])
            t = t[1]
        head = t
        for a in reversed(spine):
            head = ('app', head, nf(a))
        return head
    return nf(t)


def head_var(t):
    while t[0] == 'lam':
        t = t[2]
    while t[0] == 'app':
        t = t[1]
    return t[1]


def show(t):
    """Render in the lambda frontend's concrete syntax."""
    if t[0] == 'var':
        return t[1]
    if t[0] == 'lam':
        vs, body = [], t
        while body[0] == 'lam':
            vs.append(body[1])
            body = body[2]
        return f'(λ{" ".join(vs)}.{show(body)})'
    spine = []
    while t[0] == 'app':
        spine.append(t[2])
        t = t[1]
    parts = [show(t)] + [show(a) for a in reversed(spine)]
    return '(' + ' '.join(parts) + ')'


# ----------------------------------------------------------------------------
# Simply-typed eta-long generator

# Free observables: heads of the normal forms.
POOL = (('o', O), ('f', arrow(O, O)), ('g', arrow(O, O, O)))
TYPES = (O, arrow(O, O), arrow(O, O, O), arrow(arrow(O, O), O))


class TermGen:
    def __init__(self, rng, max_size=25, redex_p=0.35, pool=POOL):
        self.rng, self.max_size, self.redex_p, self.pool = rng, max_size, redex_p, pool
        self.k = itertools.count()

    def var(self):
        return f'v{next(self.k)}'

    def eta_long(self, ty, ctx, budget):
        """A term of type ``ty``: lambdas for every argument, then a base term."""
        params = [(self.var(), a) for a in args_of(ty)]
        body = self.base(ctx + params, budget - len(params))
        for x, _ in reversed(params):
            body = ('lam', x, body)
        return body

    def base(self, ctx, budget):
        rng = self.rng
        if budget > 6 and rng.random() < self.redex_p:
            a = rng.choice(TYPES)
            fun = self.eta_long(('->', a, O), ctx, budget // 2)
            arg = self.eta_long(a, ctx, budget // 3)
            return ('app', fun, arg)
        atoms = [(x, t) for x, t in ctx if t == O]
        heads = [(x, t) for x, t in ctx if t != O]
        if budget > 2 and heads and rng.random() < 0.7:
            x, t = rng.choice(heads)
        else:
            x, t = rng.choice(atoms)
        term = ('var', x)
        args = args_of(t)
        for a in args:
            term = ('app', term, self.eta_long(a, ctx, max(1, (budget - 1) // max(1, len(args)))))
        return term

    def closed(self, ty=O):
        return self.eta_long(ty, list(self.pool), self.max_size)


def typed_terms(seed, count, max_size=25, ty=O):
    """``count`` distinct eta-long terms of type ``ty`` over
    the free pool, each of size at most ``max_size``."""
    rng = random.Random(seed)
    gen = TermGen(rng, max_size)
    out, seen = [], set()
    while len(out) < count:
        t = gen.closed(ty)
        key = show(t)
        if size(t) <= max_size and key not in seen:
            seen.add(key)
            out.append(t)
    return out


def typed_pair(rng, max_size=25):
    """A normal eta-long term with one extra free variable ``x`` of some type,
    and a closed normal eta-long argument of that type."""
    gen = TermGen(rng, max_size, redex_p=0.0)
    a = rng.choice(TYPES[1:])
    fun = gen.eta_long(O, list(POOL) + [('x', a)], max_size)
    arg = gen.eta_long(a, list(POOL), max_size // 2)
    return fun, arg, a
