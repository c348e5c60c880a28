from fractions import Fraction as F

import pytest

from mimdp.parser import ParseError, parse_program
from mimdp.program import pretty


def test_parameter_declaration():
    prog = parse_program(
        """
        param p in {0.4, 0.6};
        module m
          x : [0..1] init 0;
          [] x=0 -> p:(x'=1) + 1-p:(x'=0);
          [] x=1 -> true;
        endmodule
        """
    )
    assert prog.parameters == {"p": (F("0.4"), F("0.6"))}


def test_empty_module_is_valid():
    prog = parse_program("module empty endmodule")
    assert prog.modules[0].commands == ()


def test_unknown_identifier_in_guard_is_diagnosed():
    with pytest.raises(ParseError, match="unknown identifier 'y'"):
        parse_program(
            """
            module m
              x : [0..1] init 0;
              [] y=0 -> (x'=1);
              [] x=1 -> true;
            endmodule
            """
        )


def test_syntax_error_reports_position_and_expectation():
    with pytest.raises(ParseError) as exc:
        parse_program("module m\n  x : [0..1 init 0;\nendmodule")
    assert exc.value.line == 2
    assert exc.value.expected


def test_duplicate_declarations_rejected():
    with pytest.raises(ParseError, match="duplicate parameter"):
        parse_program("param p in {0.1}; param p in {0.2};")
    with pytest.raises(ParseError, match="duplicate constant"):
        parse_program("const c = 1; const c = 2;")
    with pytest.raises(ParseError, match="duplicate variable"):
        parse_program("module m x : [0..1] init 0; x : [0..2] init 0; endmodule")


def test_constants_fold_in_declarations():
    prog = parse_program(
        """
        const k = 3;
        const half = 1/2;
        module m
          x : [0..k] init 0;
          [] x<k -> half:(x'=x+1) + 1-half:(x'=0);
          [] x=k -> true;
        endmodule
        """
    )
    assert prog.constants["half"] == F(1, 2)
    assert prog.modules[0].variables[0].hi == 3


def test_comments_and_labels():
    prog = parse_program(
        """
        // a comment
        module m
          x : [0..1] init 0;  // trailing comment
          [] true -> (x'=1);
        endmodule
        label "done" = x = 1;
        """
    )
    assert "done" in prog.labels


def test_tau_and_single_update_sugar():
    prog = parse_program(
        """
        module m
          x : [0..2] init 0;
          [] x=0 -> (x'=1);
          [step] x>=1 -> 0.5:(x'=2) + 0.5:true;
        endmodule
        """
    )
    cmds = prog.modules[0].commands
    assert cmds[0].action is None
    assert cmds[0].branches[0][0] == __import__("mimdp").expressions.Num(F(1))
    assert cmds[1].action == "step"
    assert cmds[1].branches[1][1] == ()


def test_round_trip_two_stage(two_stage):
    assert parse_program(pretty(two_stage)) == two_stage


def test_round_trip_die(die):
    assert parse_program(pretty(die)) == die


def test_parse_determinism(two_stage):
    from mimdp.program import pretty as pp

    text = pp(two_stage)
    assert parse_program(text) == parse_program(text)
    assert pp(parse_program(text)) == text


def test_parameter_values_keep_declaration_order():
    prog = parse_program(
        "param r in {0.6, 0.4};\nmodule m\n x : [0..1] init 0;\n [] true -> r:(x'=1)+1-r:(x'=0);\nendmodule"
    )
    assert prog.parameters["r"] == (F("0.6"), F("0.4"))


def test_rewards_block_round_trips():
    src = """
    module m
      x : [0..1] init 0;
      [] x=0 -> (x'=1);
      [] x=1 -> true;
    endmodule
    rewards
      x=0 : 5/18;
    endrewards
    """
    prog = parse_program(src)
    assert parse_program(pretty(prog)) == prog
    assert prog.rewards[0].cost == __import__("mimdp").expressions.Num(F(5, 18))


def test_min_max_round_trip():
    src = """
    module m
      x : [0..5] init 0;
      [] x < 5 -> 0.5:(x'=min(x+2, 5)) + 0.5:(x'=max(x-1, 0));
      [] x=5 -> true;
    endmodule
    """
    prog = parse_program(src)
    assert parse_program(pretty(prog)) == prog


def test_internal_action_prints_as_empty_brackets(two_stage):
    lines = [l.strip() for l in pretty(two_stage).splitlines()]
    assert any(l.startswith("[] loc = 0 ->") for l in lines)


def test_round_trip_on_the_random_corpus():
    import random

    from generators import random_mimdp_program

    rng = random.Random(99)
    for _ in range(20):
        program, _ = random_mimdp_program(rng)
        assert parse_program(pretty(program)) == program
