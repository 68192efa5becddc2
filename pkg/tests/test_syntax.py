import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abtgam.equivalence import random_tree
from abtgam.frontends import lambda_program, pcf_program
from abtgam.syntax import (BULLET, DAIMON, OMEGA, STAR, Abs, Cbv, Code, Const,
                           LazyMap, LudicsPair, Node, Num, Opp, ParseError, Pl,
                           PointerOutOfRange, Special, Sym, UnboundBinder,
                           compile_ca, decompile, erase, lookup, parse_forest,
                           parse_move, parse_strategy, pop_dnumber, show_concrete,
                           show_forest, show_move, show_strategy,
                           stamps_increasing, strategy_pointers_valid,
                           tree_equal)

BOEHM = 'u (λx.u (λy.x)) [u <- λr.r (r z)]'

# ----------------------------------------------------------------------------
# Moves


@pytest.mark.parametrize('move', [
    BULLET, STAR, OMEGA, DAIMON, Sym('x'), Sym("f'"), Num(0), Num(12), Const('tt'),
    Cbv('?', None), Cbv('!', 3), Cbv('?', None, 'x'), Cbv('!', 8, 'α'),
    LudicsPair(0, frozenset({0})), LudicsPair(2, frozenset({1, 3}), 'x'),
])
def test_move_printing_is_injective_and_parses_back(move):
    assert parse_move(show_move(move)) == move


def test_distinct_moves_print_differently():
    moves = [Num(1), Sym('x'), Const('tt'), Cbv('?', 1), Cbv('!', 1), Cbv('!', 1, 'x')]
    assert len({show_move(m) for m in moves}) == len(moves)


def test_bad_move_token():
    with pytest.raises(ParseError):
        parse_move('(')


# ----------------------------------------------------------------------------
# Positions

def test_erase_drops_stamps():
    p = (Opp(BULLET, 1), Pl(Sym('u'), None), Opp(Num(1), 3))
    assert erase(p) == (Opp(BULLET), Pl(Sym('u'), None), Opp(Num(1)))
    assert erase(()) == ()
    assert erase((Opp(Sym('x'), 2), Pl(Num(1), 0))) == (Opp(Sym('x')), Pl(Num(1), 0))


def test_pop_dnumber():
    q = (Opp(BULLET, 1), Pl(Sym('u')), Opp(Num(1), 3), Pl(Sym('u')), Opp(Num(1), 5))
    assert pop_dnumber(q, 0) == 5
    assert pop_dnumber(q, 1) == 3
    assert pop_dnumber(q, 2) == 1
    arg = (Opp(Sym('u'), 2), Pl(Num(1), 0), Opp(Num(1), 6))
    assert pop_dnumber(arg, 1) == 2
    with pytest.raises(PointerOutOfRange):
        pop_dnumber(q, 3)


def test_stamps_increasing():
    assert stamps_increasing((Opp(BULLET, 1), Pl(Sym('u')), Opp(Num(1), 3)))
    assert not stamps_increasing((Opp(BULLET, 4), Pl(Sym('u')), Opp(Num(1), 3)))


# ----------------------------------------------------------------------------
# Strategies and lookup

def test_lookup_boehm_root():
    phi = lambda_program(BOEHM).strategy()
    assert lookup(phi, (Opp(BULLET),)) == Pl(Sym('u'), None)


def test_lookup_outside_domain():
    phi = parse_strategy('(a _)')
    assert lookup(phi, (Opp(BULLET), Pl(Sym('a')), Opp(Sym('b')))) is None


def test_lookup_pcf_branch():
    phi = pcf_program('case f(tt) [ff => tt] [f <- λx.case x [tt => ff, ff => tt]]').strategy()
    q = (Opp(BULLET), Pl(Sym('f')), Opp(Const('ff')))
    assert lookup(phi, q) == Pl(Const('tt'), 1)


def test_lookup_in_forest():
    _, psi = parse_forest('x <- (1 0 (1 (z _)))')
    assert lookup(psi, (Opp(Sym('x')),)) == Pl(Num(1), 0)
    assert lookup(psi, (Opp(Sym('y')),)) is None


def test_lazy_children_are_generated_once():
    calls = []

    def gen(b):
        calls.append(b)
        return Node(Num(b.n), 0) if isinstance(b, Num) else None
    n = Node(Sym('x'), None, gen=gen)
    assert n.child(Num(3)).move == Num(3)
    assert n.child(Num(3)) is n.child(Num(3))
    assert calls == [Num(3)]
    assert [b for b, _ in n.materialized()] == [Num(3)]


def test_lazymap_truthiness_counts_generator():
    m = LazyMap([], gen=lambda a: None)
    assert m.get(Sym('x')) is None


# ----------------------------------------------------------------------------
# Text format

def test_text_format_round_trip():
    text = '(u _ (1 (u _ (1 (1 1)))))'
    assert show_strategy(parse_strategy(text)) == text


def test_forest_round_trip():
    text = "x2 <- (a 0 (b (y _)))\ny <- (1 0)"
    main, psi = parse_forest(text)
    assert main is None
    assert show_forest(psi) == text


def test_forest_bullet_entry():
    main, psi = parse_forest('• <- (x _)\nx <- (z _)')
    assert show_strategy(main) == '(x _)'
    assert list(psi) == [Sym('x')]


def test_superscripts_round_trip():
    text = '(x^1 _ (1^0 (y^0 _)))'
    assert show_strategy(parse_strategy(text), superscripts=True) == text


@pytest.mark.parametrize('bad', ['(a', '(a _ (b (c _))', '(a _) junk', '(a x)'])
def test_parse_errors(bad):
    with pytest.raises(ParseError):
        parse_strategy(bad)


# ----------------------------------------------------------------------------
# Concrete <-> abstract

def test_compile_innermost_binder_is_offset_zero():
    node = compile_ca(Abs('x', Code(Sym('a'), 'x')))
    assert (node.move, node.ptr) == (Sym('a'), 0)


def test_compile_nested_binders():
    # (λx.[a1|_]{(a2,(λy.[a3|x]{})), (a4,(λw.[a5|w]{}))})
    m = Abs('x', Code(Sym('a1'), None, {
        Sym('a2'): Abs('y', Code(Sym('a3'), 'x')),
        Sym('a4'): Abs('w', Code(Sym('a5'), 'w')),
    }))
    assert show_strategy(compile_ca(m)) == '(a1 _ (a2 (a3 1)) (a4 (a5 0)))'


def test_compile_free_only():
    m = Abs(None, Code(Sym('a'), None, {Sym('b'): Abs(None, Code(Sym('c')))}))
    assert show_strategy(compile_ca(m)) == '(a _ (b (c _)))'


def test_compile_unbound_binder():
    with pytest.raises(UnboundBinder):
        compile_ca(Abs('x', Code(Sym('a'), 'y')))


def test_decompile_examples():
    assert show_concrete(decompile(parse_strategy('(a 0)'))) == '(λx1.[a|x1]{})'
    assert show_concrete(decompile(parse_strategy('(a _)'))) == '([a|_]{})'


def test_decompile_boehm_round_trip():
    phi = lambda_program(BOEHM).strategy()
    assert tree_equal(compile_ca(decompile(phi)), phi)


def test_special_moves():
    assert isinstance(OMEGA, Special) and show_move(DAIMON) == '✠'


# ----------------------------------------------------------------------------
# Properties

@st.composite
def strategies(draw):
    import random
    seed = draw(st.integers(0, 2 ** 32 - 1))
    depth = draw(st.integers(1, 6))
    return random_tree(random.Random(seed), 1, depth, 3)


@settings(max_examples=200, deadline=None)
@given(strategies())
def test_prop_concrete_round_trip(phi):
    once = compile_ca(decompile(phi))
    assert tree_equal(once, phi)
    assert tree_equal(compile_ca(decompile(once)), once)


@settings(max_examples=200, deadline=None)
@given(strategies())
def test_prop_text_round_trip_and_pointer_validity(phi):
    assert strategy_pointers_valid(phi)
    assert tree_equal(parse_strategy(show_strategy(phi)), phi)
