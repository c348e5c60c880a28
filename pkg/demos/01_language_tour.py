"""A tour of the modelling language: parse, validate, pretty-print.

The language is a guarded-command probabilistic language over bounded
integer variables, extended with one construct: `param name in {v1, ..., vn};`
declares a configuration parameter ranging over a finite set of rationals.
Parameters may appear in branch probabilities and in reward expressions;
guards and updates stay parameter-free so that every configuration shares
one state space.
"""

from mimdp import check_program, parse_program, pretty

SOURCE = """
// A sensor that either works cheaply or reliably, never both.
param hit in {0.8, 0.95};

const retries = 2;

module sensor
  tries : [0..retries] init 0;
  ok : [0..1] init 0;
  [probe] tries < retries & ok = 0 -> hit: (ok'=1) + 1-hit: (tries'=tries+1);
  [] tries = retries & ok = 0 -> true;
  [] ok = 1 -> true;
endmodule

rewards
  ok = 0 & tries < retries : 3 + 10*hit;   // better sensors cost more per probe
endrewards

label "detected" = ok = 1;
label "gave_up" = tries = retries & ok = 0;
"""

program = parse_program(SOURCE)
print("modules:     ", [m.name for m in program.modules])
print("parameters:  ", {p: [str(v) for v in vs] for p, vs in program.parameters.items()})
print("constants:   ", {c: str(v) for c, v in program.constants.items()})
print("labels:      ", list(program.labels))
print("diagnostics: ", check_program(program) or "none")

print("\n--- pretty-printed (parses back to the same tree) ---\n")
text = pretty(program)
print(text)
assert parse_program(text) == program

print("--- a broken variant is rejected with a position ---\n")
try:
    parse_program(SOURCE.replace("tries < retries &", "trise < retries &"))
except Exception as err:
    print(f"rejected: {err}")
