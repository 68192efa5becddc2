"""Abstract Böhm trees and the machines that run them.

Modules: ``syntax`` (moves, positions, strategies, the two term syntaxes),
``frontends`` (compilers from lambda, PCF, classical PCF, call-by-value
PCF and ludics), ``machines`` (GAM, VAM, SAM, EAM), ``extensions`` (strong,
star and eta machines, fax, separation), ``equivalence`` (translations
between machine states and the lock-step checker) and ``cli``.
"""

from .equivalence import check_lockstep, random_pair
from .extensions import (fax, fax_compose, gam_eta_run, gam_star_run,
                         readback_composition, separation_suite,
                         show_lambda_readback, strong_exhaustive, strong_run)
from .frontends import (FRONTENDS, Program, abt_program, cbv_program, lambda_program,
                        load_program, ludics_program, pcf_mu_program, pcf_program)
from .machines import (Stage, Termination, eam_run, gam_run, make_levels,
                       phi_psi, render_trees, sam_run, vam_run)
from .syntax import (AbtError, Node, parse_forest, parse_strategy, show_forest,
                     show_strategy)

__all__ = [
    'AbtError', 'FRONTENDS', 'Node', 'Program', 'Stage', 'Termination',
    'abt_program', 'cbv_program', 'check_lockstep', 'eam_run', 'fax', 'fax_compose', 'gam_eta_run', 'gam_run',
    'gam_star_run', 'lambda_program', 'load_program', 'ludics_program', 'make_levels', 'parse_forest', 'parse_strategy',
    'pcf_mu_program', 'pcf_program', 'phi_psi', 'random_pair', 'readback_composition', 'render_trees', 'sam_run',
    'separation_suite', 'show_forest', 'show_lambda_readback', 'show_strategy',
    'strong_exhaustive', 'strong_run', 'vam_run',
]
