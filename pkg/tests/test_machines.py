import json
from pathlib import Path

import pytest

from abtgam.frontends import (cbv_program, lambda_program, ludics_program,
                              pcf_mu_program, pcf_program)
from abtgam.machines import (MalformedState, Stage, Termination, check_gam_state,
                             eam_run, gam_run, parse_mtrees, parse_stage,
                             phi_psi, render_trees, sam_run, stage_of_index,
                             vam_jump, vam_run, vam_view)
from abtgam.syntax import (BULLET, Num, Opp, Pl, Sym, erase, parse_forest,
                           parse_strategy, show_position)

FIX = Path(__file__).resolve().parents[1] / 'fixtures'
BOEHM = 'u (λx.u (λy.x)) [u <- λr.r (r z)]'

LOADERS = {'boehm': lambda_program, 'pcf': pcf_program, 'pcf-mu': pcf_mu_program,
           'cbv1': cbv_program, 'cbv2': cbv_program, 'cbv3': cbv_program,
           'ludics': ludics_program, 'deltadelta': lambda_program,
           'eta-preamble': lambda_program}


def load(name):
    return LOADERS[name]((FIX / name / 'program.txt').read_text())


# ----------------------------------------------------------------------------
# Stages

def test_stage_indexing():
    seq = [stage_of_index(k) for k in range(6)]
    assert [str(s) for s in seq] == ['1', '2*', '2', '3*', '3', '4*']
    assert all(s.index == k for k, s in enumerate(seq))
    assert parse_stage('11*') == Stage(11, True)


# ----------------------------------------------------------------------------
# GAM

def test_gam_free_variable_answer():
    phi = parse_strategy('(x _)')
    _, psi = parse_forest('x <- (z _)')
    r = gam_run(phi, psi)
    assert str(r.termination) == 'FreeAnswer(z) at 3*'
    assert r.termination.case == 2


def test_gam_boehm_run():
    p = lambda_program(BOEHM)
    r = gam_run(p.strategy(), p.forest(), keep_states=True)
    assert str(r.termination) == 'FreeAnswer(z) at 11*'
    assert r.termination.exit_code == 1
    last = r.state.head
    assert show_position(last.pos) == '<u@2>[1|0]<1@6>[1|1]<1@10>[z|_]'
    for s in r.states:
        assert check_gam_state(s)


def test_gam_answer_is_case_one():
    p = pcf_program('case f(tt) [ff => tt] [f <- λx.case x [tt => ff, ff => tt]]')
    t = gam_run(p.strategy(), p.forest()).termination
    assert (t.kind, t.case, t.exit_code) == ('answer', 1, 0)


def test_gam_blocked_is_case_three():
    t = gam_run(*_pair(load('deltadelta'))).termination
    assert (t.kind, t.case, t.exit_code) == ('blocked', 3, 2)
    assert str(t) == 'Blocked(<•>[x|_]<1>[x|_]<1>) at 5*'


def test_gam_fuel():
    t = gam_run(*_pair(lambda_program('x (x) [x <- λy.y (y)]')), fuel=3).termination
    assert t.kind == 'fuel' and t.exit_code == 3 and t.case is None


def test_gam_is_deterministic():
    a = gam_run(*_pair(lambda_program(BOEHM)))
    b = gam_run(*_pair(lambda_program(BOEHM)))
    assert [str(s) for s in a.trace] == [str(s) for s in b.trace]


def test_state_checker_rejects_bad_labels():
    r = gam_run(*_pair(lambda_program(BOEHM)), keep_states=True)
    s = r.states[-1].copy()
    s.items[3], s.items[4] = s.items[4], s.items[3]
    with pytest.raises(MalformedState):
        check_gam_state(s)


def _pair(p):
    return p.strategy(), p.forest()


# ----------------------------------------------------------------------------
# Multiplexed trees

def test_phi_psi_boehm():
    r = gam_run(*_pair(lambda_program(BOEHM)))
    phi, psi = phi_psi(r.state.items)
    assert render_trees(phi) == '(<•@1> [u|_] (<1@3> [u|_] (<1@5> [1|1])) (<1@7> [u|_] (<1@9> [1|1])))'
    assert sorted(parse_mtrees(render_trees(psi))) == sorted(parse_mtrees(
        '(<u@2> [1|0] (<1@6> [1|1] (<1@10> [z|_])))\n(<u@4> [1|0])\n(<u@8> [1|0])'))


def test_erased_positions_are_paths_of_the_strategy():
    from abtgam.syntax import lookup
    p = lambda_program(BOEHM)
    r = gam_run(*_pair(p))
    phi = p.strategy()
    for it in r.state.items:
        if it.stage.star and it.level == 0:
            q = erase(it.pos[:-1])
            assert lookup(phi, q) == erase(it.pos)[-1]


# ----------------------------------------------------------------------------
# VAM

def test_vam_view_and_jump():
    r = vam_run(*_pair(lambda_program(BOEHM)))
    s = r.state
    assert vam_view(s, 1) == (Opp(BULLET),)
    assert vam_view(s, 3) == (Opp(BULLET), Pl(Sym('u'), None), Opp(Num(1)))
    assert vam_view(s, 10) == (Opp(Sym('u')), Pl(Num(1), 0), Opp(Num(1)),
                               Pl(Num(1), 1), Opp(Num(1)))
    assert vam_jump(s, 1, 10) == 6
    assert vam_jump(s, 2, 10) == 2
    with pytest.raises(MalformedState):
        vam_jump(s, 1, 2)


# ----------------------------------------------------------------------------
# All machines

@pytest.mark.parametrize('name', sorted(LOADERS))
def test_machines_agree_on_termination(name):
    p = load(name)
    ref = gam_run(*_pair(p)).termination
    for run in (vam_run(*_pair(p)), sam_run(*_pair(p)), eam_run(p.main, p.counter)):
        assert run.termination.same_outcome(ref), (run.termination, ref)


def test_machines_agree_on_star_run():
    p = lambda_program((FIX / 'star' / 'program.txt').read_text(), star=True)
    ref = gam_run(p.strategy(), star=True).termination
    assert str(ref) == 'FreeAnswer(t) at 9*'
    assert vam_run(p.strategy(), star=True).termination.same_outcome(ref)
    assert sam_run(p.strategy(), star=True).termination.same_outcome(ref)
    assert eam_run(p.main, {}, star=True).termination.same_outcome(ref)


# ----------------------------------------------------------------------------
# JSON schema

def test_trace_json_schema():
    r = gam_run(*_pair(lambda_program(BOEHM)))
    for step in r.trace:
        d = json.loads(json.dumps(step.to_json()))
        assert set(d) == {'step', 'phase', 'machine', 'rule', 'move', 'pointer', 'stamp',
                          'position'}
    t = json.loads(json.dumps(r.termination.to_json()))
    assert t == {'kind': 'free', 'case': 2, 'move': 'z', 'stage': '11*', 'query': None}


def test_termination_outcome_comparison():
    a = Termination('free', Sym('z'), Stage(3, True))
    assert a.same_outcome(Termination('free', Sym('z'), Stage(3, True), level=1))
    assert not a.same_outcome(Termination('free', Sym('y'), Stage(3, True)))
