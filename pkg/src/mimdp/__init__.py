"""Toolkit for guarded-command Markov models with finitely many
pre-specified configuration options.

Parses a probabilistic guarded-command language extended with finite-valued
parameters, builds explicit-state models, rewrites parametric programs into
plain MDPs via nondeterministic value selection plus a consistency control
module, model-checks reachability and expected-cost queries, and solves the
configuration-synthesis problem both by exhaustive valuation enumeration and
on the transformed model, with a nonlinear integer-program emitter for the
direct encoding.
"""

from .expressions import (
    Expr,
    ExprError,
    eval_expr,
    expr_value_set,
    format_fraction,
    to_text,
)
from .program import (
    CommandDecl,
    Diagnostic,
    ModuleDecl,
    Program,
    RewardDecl,
    VarDecl,
    check_program,
    pretty,
)
from .parser import ParseError, parse_file, parse_program
from .models import (
    Choice,
    ExplicitModel,
    ModelError,
    Strategy,
    WellDefinednessError,
    build_model,
    compose,
    induced_mc,
    instantiate,
    to_dot,
    well_defined_valuations,
)
from .checking import (
    CostBoundQuery,
    ExpectedCostQuery,
    ReachabilityBound,
    ReachabilityQuery,
    ValueVector,
    check_spec,
    cost_bounded_reach,
    expected_cost,
    parse_property,
    reach_prob,
)
from .transform import (
    TransformError,
    TransformReport,
    add_control,
    transform_all,
    transform_probabilities,
    transform_rewards,
)
from .synthesis import (
    InfeasibleError,
    SynthesisQuery,
    SynthesisResult,
    constrained_mdp_lp,
    emit_nilp,
    check_nilp_assignment,
    recover_valuation,
    synthesize,
    synthesize_enumerate,
    synthesize_transformed,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
