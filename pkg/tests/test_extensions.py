import random

import pytest

from abtgam.equivalence import random_pair
from abtgam.extensions import (CompOpp, CompPl, DanglingAddress, IllegalQuery,
                               InteractiveDriver, ScriptDriver, expanded_levels,
                               fax, fax_compose, fax_run, gam_eta_run, gam_star_run,
                               legal_queries, readback_composition,
                               separation_program, separation_suite,
                               show_composite, show_lambda_readback,
                               strong_exhaustive, strong_initial, strong_query,
                               strong_run)
from abtgam.frontends import abt_program, lambda_program
from abtgam.machines import gam_run
from abtgam.syntax import (BULLET, DAIMON, OMEGA, Num, Sym, depth, parse_strategy,
                           show_strategy, size, tree_equal)

EX1 = 'λu.x (λv.u v) [x <- λr.r z]'
EX2 = 'x (λu.u) [x <- λz.y (λt.z t)]'


def pair(text):
    p = lambda_program(text)
    return p.strategy(), p.forest()


# ----------------------------------------------------------------------------
# Strong GAM

def test_strong_redex_under_binder_scripted():
    r = strong_run(*pair(EX1), ScriptDriver([Num(1)]))
    assert [show_composite(c) for c in r.responses] == ['⟨•,1⟩[1|1]', '⟨•,1⟩[1|1]⟨1,4⟩[z|_]']
    back = readback_composition(r.responses)
    assert tree_equal(back, lambda_program('λu.u z').strategy())
    assert show_lambda_readback(back) == '(λv1.v1(z))'
    assert str(r.outcome) == 'FreeAnswer(z) at 6*'


def test_strong_free_head_scripted():
    r = strong_run(*pair(EX2), ScriptDriver([Num(1)]))
    back = readback_composition(r.responses)
    assert tree_equal(back, lambda_program('y (λt.t)').strategy())
    assert show_lambda_readback(back) == '(y(λv1.v1))'
    assert r.outcome.kind == 'answer'


@pytest.mark.parametrize('text,nf', [(EX1, 'λu.u z'), (EX2, 'y (λt.t)')])
def test_strong_exhaustive_reads_back_normal_form(text, nf):
    back = readback_composition(strong_exhaustive(*pair(text), depth=3))
    assert tree_equal(back, lambda_program(nf).strategy())


def test_strong_free_first_answer_is_final():
    r = strong_run(*pair('x [x <- z]'), ScriptDriver([]))
    assert [show_composite(c) for c in r.responses] == ['⟨•,1⟩[z|_]']
    assert legal_queries(r.state) == []
    assert r.outcome.kind == 'free'
    with pytest.raises(IllegalQuery):
        strong_run(*pair('x [x <- z]'), ScriptDriver([Num(1)]))


def test_strong_illegal_query():
    st = strong_initial(*pair(EX1))
    with pytest.raises(IllegalQuery):
        strong_query(st, Num(1))  # nothing answered yet
    r = strong_run(*pair(EX1), ScriptDriver([]))
    with pytest.raises(IllegalQuery):
        strong_query(r.state, Num(7))


def test_strong_first_answer_matches_weak_run():
    for seed in range(40):
        phi, psi = random_pair(seed, depth=4)
        weak = gam_run(phi, psi, fuel=5000).termination
        strong = strong_run(phi, psi, None, fuel=5000)
        if weak.kind == 'blocked':
            assert strong.termination is not None and strong.termination.kind == 'blocked'
            continue
        assert strong.first[-1].move == weak.move
        assert (strong.first[-1].addr is None) == (weak.kind == 'free')


def test_interactive_driver():
    lines = iter(['1', ''])
    prompts = []

    def ask(prompt):
        prompts.append(prompt)
        return next(lines)
    r = strong_run(*pair(EX1), InteractiveDriver(ask))
    assert len(r.responses) == 2
    assert prompts[0] == '⟨•,1⟩[1|1]  [1] ? '


def test_interactive_driver_eof_stops():
    def ask(prompt):
        raise EOFError
    r = strong_run(*pair(EX1), InteractiveDriver(ask))
    assert len(r.responses) == 1


def test_readback_rejects_dangling_address():
    bad = (CompOpp(BULLET, 1), CompPl(Sym('x'), 7))
    with pytest.raises(DanglingAddress):
        readback_composition([bad])


def test_lambda_readback_falls_back():
    assert show_lambda_readback(parse_strategy("('tt _)")) == "('tt)"
    t = parse_strategy('(a _ (b (c _)))')
    assert show_lambda_readback(t) == '(a _ (b (c _)))'


# ----------------------------------------------------------------------------
# Star

def test_star_identity_application():
    p = lambda_program('(λx.x) y', star=True)
    assert str(gam_star_run(p.strategy()).termination) == 'FreeAnswer(y) at 4*'


def test_star_on_normal_form_matches_head():
    p = lambda_program('λa.f (λb.a b) c', star=True)
    t = gam_star_run(p.strategy()).termination
    assert (t.kind, t.move) == ('free', Sym('f'))


# ----------------------------------------------------------------------------
# Eta

def test_eta_completes_preamble():
    p = lambda_program('x [x <- λy.y]')
    assert gam_run(p.strategy(), p.forest()).termination.kind == 'blocked'
    r = gam_eta_run(p.strategy(), p.forest())
    assert str(r.termination) == 'Answer(1) at 4*'
    assert r.state.expansions
    grown = expanded_levels(r.state)
    assert size(grown[0][BULLET]) > size(p.strategy())


def test_eta_deltadelta_keeps_going():
    p = lambda_program('x (x) [x <- λy.y (y)]')
    r = gam_eta_run(p.strategy(), p.forest(), fuel=39)
    assert r.termination.kind == 'fuel'
    assert str(r.termination) == 'FuelExhausted at 21*'


@pytest.mark.parametrize('text', [
    'u (λx.u (λy.x)) [u <- λr.r (r z)]',
    'λu.x (λv.u v) [x <- λr.r z]',
    'f (λa.a) [f <- λg.g c]',
])
def test_eta_is_conservative_on_eta_long_inputs(text):
    phi, psi = pair(text)
    plain = gam_run(phi, psi)
    eta = gam_eta_run(phi, psi)
    assert [str(s) for s in plain.trace] == [str(s) for s in eta.trace]
    assert eta.termination.same_outcome(plain.termination)
    assert not eta.state.expansions


# ----------------------------------------------------------------------------
# Fax

def test_fax_depth_zero():
    assert show_strategy(fax([Num(1)], 0, Sym('x'))) == '(x _)'


def test_fax_copies_moves():
    f = fax([Sym('a'), Sym('b')], 2, Sym('x'))
    assert show_strategy(f) == '(x _ (a (a 1 (a (a 1)) (b (b 1)))) (b (b 1 (a (a 1)) (b (b 1)))))'


def test_fax_script_run():
    p = abt_program('• <- (x2 _)\nx2 <- (a 0 (b (y _)))')
    r = fax_run(p.strategy(), p.forest(), [Sym('b')])
    assert [show_composite(c) for c in r.responses] == ['⟨•,1⟩[a|1]', '⟨•,1⟩[a|1]⟨b,4⟩[y|_]']
    assert str(r.outcome) == 'FreeAnswer(y) at 6*'


def test_fax_compose_is_identity_on_examples():
    for text in ('(u _ (1 (u _ (1 (1 1)))))', '(a _ (b (c 1)) (d (e _)))', '(x 0)'):
        phi = parse_strategy(text)
        assert tree_equal(fax_compose(phi), phi)


def test_fax_compose_random():
    from abtgam.equivalence import random_tree
    rng = random.Random(7)
    for _ in range(10):
        phi = random_tree(rng, 1, 3, 2)
        assert tree_equal(fax_compose(phi, depth(phi)), phi)


# ----------------------------------------------------------------------------
# Separation

def test_separation_suite():
    cases = {c.name: c for c in separation_suite()}
    assert cases['y'].ok and cases['y'].termination.move == OMEGA
    assert cases['xy'].ok and cases['xy'].termination.move == DAIMON
    assert str(cases['y'].termination) == 'FreeAnswer(Ω) at 34*'
    assert str(cases['xy'].termination) == 'FreeAnswer(✠) at 78*'


def test_separation_needs_eta():
    p = separation_program('y')
    assert gam_run(levels=p.levels()).termination.kind == 'blocked'
