"""Entire radial solutions of coupled semilinear elliptic systems.

Library layout:

- :mod:`koradial.expr_dsl`: the expression language for user functions
- :mod:`koradial.problem`: validated instances and hypothesis checks
- :mod:`koradial.quadrature`: grids, cumulative integration, tail verdicts
- :mod:`koradial.functionals`: the growth functionals and their inversion
- :mod:`koradial.solver`: monotone iteration and the independent integrator
- :mod:`koradial.classify`: behavior dispatch, gates, and bounds verification
- :mod:`koradial.cli`: the ``koradial`` command
"""

from .classify import (
    BehaviorClass,
    BoundReport,
    GateReport,
    NecessityReport,
    Numerics,
    bounds_thm2,
    check_necessity_v,
    classify_thm1,
    dispatch_thm1,
    existence_gate,
)
from .expr_dsl import EvalError, ParseError, check_nonneg_sampled, evaluate, parse, pretty
from .functionals import (
    FunctionalProfile,
    HEvaluator,
    HRangeError,
    eval_G,
    eval_H,
    eval_P1_Q1,
    eval_P2_Q2,
    eval_P3_Q3,
    h_inverse,
    ko_classic,
)
from .problem import (
    HypothesisReport,
    ProblemSpec,
    ScalarFn,
    big_m,
    check_c1,
    check_c2,
    run_hypothesis_checks,
    weight_threshold,
)
from .quadrature import (
    ConvergenceVerdict,
    Grid,
    Profile,
    cumulative_integral,
    make_grid,
    nested_radial,
    running_max,
    tail_limit,
)
from .solver import BlowUpError, MonotonicityError, SolutionPair, ivp_oracle, picard_solve, residual

__version__ = "0.1.0"
