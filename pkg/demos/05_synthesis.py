"""Configuration synthesis, two independent ways.

Find one value per parameter and a strategy so that the probability of
reaching the target stays below a bound while the expected cost to the goal
is minimal.  The enumeration route instantiates every well-defined valuation
and solves each instance; the transformed route solves one constrained LP on
the controlled MDP, branching wherever the LP tries to mix configurations.
Both agree, including the tie-break.
"""

from fractions import Fraction
from pathlib import Path

from mimdp import parse_file
from mimdp.synthesis import SynthesisQuery, synthesize_enumerate, synthesize_transformed

MODELS = Path(__file__).resolve().parent.parent / "models"
program = parse_file(MODELS / "two_stage.mgcl")


def show(result):
    print(f"  [{result.method}]")
    if not result.feasible:
        print("    infeasible")
        return
    valuation = ", ".join(f"{k}={v}" for k, v in result.valuation.items())
    print(f"    valuation: {valuation}")
    print(f"    expected cost {result.expected_cost:.6f}, "
          f"target probability {result.reach_probability:.6f}")
    if result.table:
        print("    per-valuation table (EC, Pr, feasible):")
        for entry in result.table:
            vals = ",".join(str(v) for v in entry.valuation.values())
            print(f"      ({vals}):  {entry.expected_cost:.4f}  "
                  f"{entry.reach_probability:.4f}  {entry.feasible}")


for lam in ("0.2", "1", "0.1"):
    print(f"\n=== bound P(F s2) <= {lam}, minimize EC(F absorb) ===")
    query = SynthesisQuery("s2", Fraction(lam), "absorb")
    show(synthesize_enumerate(program, query))
    show(synthesize_transformed(program, query))

print("""
Note on the bound 0.2: a randomized strategy on the controlled MDP could mix
the two cheapest configurations and reach expected cost 1.22 at probability
exactly 0.2 -- but no single configuration achieves that.  The transformed
route detects the mixed commitments on the optimal support and branches on
the conflicted parameter, which is why both routes report 1.42.
""")
