"""Reachability, expected cost, cost-bounded reachability, properties.

The engine precomputes the probability-0 and probability-1 sets by graph
fixpoints, iterates values from below, and reports the exactly evaluated
value of the extracted strategy.
"""

from fractions import Fraction
from pathlib import Path

from mimdp import (
    build_model,
    check_spec,
    cost_bounded_reach,
    expected_cost,
    instantiate,
    parse_file,
    parse_property,
    reach_prob,
)

MODELS = Path(__file__).resolve().parent.parent / "models"

die = build_model(parse_file(MODELS / "die.mgcl"), {"p": Fraction("0.5")})
print("fair die:")
for outcome in ("one", "two", "three", "four", "five", "six"):
    vec, _ = reach_prob(die, outcome)
    print(f"  Pr(roll {outcome:<5}) = {vec.at_initial(die):.10f}"
          f"   ({vec.iterations} sweeps, residual {vec.residual:.2e})")

flips, _ = expected_cost(die, "rolled")
print(f"  expected coin flips = {flips.at_initial(die):.10f}  (exactly 11/3)")

print("\ncost-bounded: probability of rolling within n flips")
for n in (2, 3, 4, 6, 10, 20):
    v = cost_bounded_reach(die, "rolled", n)
    print(f"  C < {n:>2}: {v:.6f}")

biased = build_model(parse_file(MODELS / "die.mgcl"), {"p": Fraction("0.3")})
for text in ('P<=0.1 [F "one"]', 'P<=0.05 [F "one"]', 'ECmin=? [F "rolled"]'):
    spec = parse_property(text)
    verdict, value = check_spec(biased, spec)
    tag = "" if verdict is None else ("  SATISFIED" if verdict else "  VIOLATED")
    print(f'  p=0.3: {text:<24} value={value:.6f}{tag}')

chain = instantiate(
    build_model(parse_file(MODELS / "two_stage.mgcl")),
    {"p": Fraction("0.6"), "q": Fraction("0.3"), "r": Fraction("0.4"), "s": Fraction("0.7")},
)
vec, _ = reach_prob(chain, "s2")
print(f"\ntwo-stage chain at (0.6, 0.3, 0.4, 0.7): Pr(F s2) = {vec.at_initial(chain)}")
