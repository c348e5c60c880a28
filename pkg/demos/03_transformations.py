"""The three rewrites that turn configuration choice into nondeterminism.

1. Parametric rewards become a selection among concrete cost rows behind a
   fresh selector variable.
2. Commands with parametric probabilities become one concrete command per
   joint parameter row (rows that are not distributions are dropped).
3. A control module remembers every committed (parameter, value) pair and
   blocks conflicting commitments, so each path uses one configuration.

On the coin-driven die, the parametric model has 13 states / 20 transitions,
the row-expanded MDP 13 / 48, and the controlled MDP 37 / 60.
"""

from pathlib import Path

from mimdp import build_model, parse_file, pretty
from mimdp.transform import transform_all, transform_probabilities, transform_rewards

MODELS = Path(__file__).resolve().parent.parent / "models"

die = parse_file(MODELS / "die.mgcl")

base = build_model(die)
print(f"parametric : {base.num_states:>3} states {base.num_transitions:>3} transitions")

expanded, report = transform_probabilities(die)
t = build_model(expanded)
print(f"transformed: {t.num_states:>3} states {t.num_transitions:>3} transitions "
      f"({len(report.fresh_actions)} fresh row actions)")

controlled, report = transform_all(die)
c = build_model(controlled, on_deadlock="absorb")
print(f"controlled : {c.num_states:>3} states {c.num_transitions:>3} transitions")

print("\nrow actions and what they commit:")
for action, commits in list(report.fresh_actions.items())[:6]:
    pretty_commits = ", ".join(f"{p}={v}" for p, v in commits)
    print(f"  {action:<12} -> {pretty_commits}")
print("  ...")

print("\ncontrolled program (excerpt):\n")
text = pretty(controlled)
print("\n".join(text.splitlines()[:24]))
print("  ...")

two_stage = parse_file(MODELS / "two_stage.mgcl")
with_selectors, rep = transform_rewards(two_stage)
grown = build_model(with_selectors)
print(
    f"\nreward selection on the two-stage chain: "
    f"{build_model(two_stage).num_states} -> {grown.num_states} states, "
    f"selector domains {sorted(rep.fresh_variables.values())}"
)
