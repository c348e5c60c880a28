"""From program text to explicit states, and the well-definedness filter.

Builds the bundled two-stage chain whose four parameters are pairwise
coupled (p with r, s with q): a configuration is admissible only when each
coupled pair sums to one, which cuts the raw 16 combinations down to 4.
"""

from fractions import Fraction
from pathlib import Path

from mimdp import build_model, instantiate, parse_file, to_dot, well_defined_valuations

MODELS = Path(__file__).resolve().parent.parent / "models"

program = parse_file(MODELS / "two_stage.mgcl")
model = build_model(program)

print(f"kind={model.kind}  states={model.num_states}  transitions={model.num_transitions}")
for i in range(model.num_states):
    print(f"  s{i} = {model.state_text(i)}  cost = {model.costs[i]}")

raw = 1
for values in model.parameters.values():
    raw *= len(values)
admissible = well_defined_valuations(model)
print(f"\nraw configurations: {raw}, well-defined: {len(admissible)}")
for u in admissible:
    print("  ", {k: str(v) for k, v in u.items()})

u = admissible[2]
chain = instantiate(model, u)
print(f"\ninstantiated at {{p: {u['p']}, ...}} -> kind={chain.kind}")
for i, row in enumerate(chain.choices):
    for ch in row:
        edge = " + ".join(f"{p}->s{t}" for p, t in ch.branches)
        print(f"  s{i}: {edge}")

bad = dict(u)
bad["r"] = Fraction("0.6") if u["r"] != Fraction("0.6") else Fraction("0.4")
try:
    instantiate(model, bad)
except Exception as err:
    print(f"\nan inconsistent choice is rejected: {err}")

print("\nDOT rendering (pipe into `dot -Tpng`):\n")
print(to_dot(model))
