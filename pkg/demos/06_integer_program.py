"""The direct nonlinear integer encoding, emitted and cross-checked.

One binary per well-defined valuation, one-hot constrained; per-state
probability and cost recursions with explicit sig * x * p products; a
well-definedness row per parametric state/action pair.  The file is emitted
rather than solved -- the point of the transformation pipeline is precisely
to avoid solving it -- but the enumeration route's optimum substitutes into
every constraint, which is checked here term by term.
"""

from fractions import Fraction
from pathlib import Path

from mimdp import parse_file
from mimdp.synthesis import (
    SynthesisQuery,
    check_nilp_assignment,
    emit_nilp,
    nilp_witness,
    synthesize_enumerate,
)

MODELS = Path(__file__).resolve().parent.parent / "models"
program = parse_file(MODELS / "two_stage.mgcl")
query = SynthesisQuery("s2", Fraction("0.2"), "absorb")

text = emit_nilp(program, query)
print(text)

optimum = synthesize_enumerate(program, query)
witness = nilp_witness(program, query, optimum.valuation)
violations = check_nilp_assignment(text, witness, tol=1e-9)
print(f"witness from the enumeration optimum: {len(violations)} violated constraints")

witness["p[s0]"] = 0.5  # sabotage: breaks the bound row and the recursion at s0
violations = check_nilp_assignment(text, witness, tol=1e-9)
print(f"after sabotaging p[s0]: {[name for name, _ in violations]}")
