"""Explicit-state model construction and instantiation.

Parallel composition of modules, breadth-first state exploration, parameter
instantiation, the well-definedness filter over parameter valuations, and
strategy-induced chains.  Probabilities are exact rationals or residual
parameter expressions; a model is immutable once built.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence, Union

from .expressions import (
    Expr,
    Num,
    eval_expr,
    format_fraction,
    joint_valuations,
    substitute,
    to_text,
)
from .program import CommandDecl, ModuleDecl, Program, check_program

Valuation = dict  # parameter name -> Fraction, in declaration order
Prob = Union[Fraction, Expr]

SUM_TOL = Fraction(1, 10**9)
DEFAULT_STATE_CAP = 10**7


class ModelError(ValueError):
    pass


class StateCapExceeded(ModelError):
    pass


class DeadlockError(ModelError):
    pass


class WellDefinednessError(ModelError):
    """A valuation induces a non-distribution at some state/action."""

    def __init__(self, message, state=None, action=None):
        super().__init__(message)
        self.state = state
        self.action = action


class BlockedActionWarning(UserWarning):
    """A module declares a synchronizing action but provides no command."""


@dataclass(frozen=True)
class Choice:
    action: Optional[str]
    branches: tuple  # tuple[(Prob, target index), ...]


@dataclass
class ExplicitModel:
    kind: str  # 'mc' | 'mdp' | 'mimdp'
    var_names: tuple
    states: list  # list[tuple[int, ...]]
    initial: int
    choices: list  # per state: list[Choice]
    costs: list  # per state: Fraction | Expr
    labels: dict  # label -> frozenset[int]
    parameters: dict  # residual parameter domains (mimdp only)
    deadlocks: frozenset = frozenset()

    @property
    def num_states(self) -> int:
        return len(self.states)

    @property
    def num_transitions(self) -> int:
        return sum(len(ch.branches) for row in self.choices for ch in row)

    def state_text(self, index: int) -> str:
        vals = self.states[index]
        return "(" + ",".join(f"{n}={v}" for n, v in zip(self.var_names, vals)) + ")"

    def label_states(self, label: str) -> frozenset:
        try:
            return self.labels[label]
        except KeyError:
            raise ModelError(f"model has no label \"{label}\"") from None


@dataclass
class Strategy:
    """Memoryless strategy: per state, weights over that state's choices.

    Weights are normalized to exact rationals summing to one, so induced
    chains stay row-stochastic exactly.
    """

    choice_probs: list  # per state: dict[choice index, Fraction]

    def __post_init__(self):
        normalized = []
        for s, dist in enumerate(self.choice_probs):
            items = [(a, Fraction(w)) for a, w in dist.items() if w > 0]
            if not items:
                raise ModelError(f"strategy assigns no action at state {s}")
            total = sum(w for _, w in items)
            normalized.append({a: w / total for a, w in items})
        self.choice_probs = normalized

    @classmethod
    def deterministic(cls, picks: Sequence[int]) -> "Strategy":
        return cls([{int(a): Fraction(1)} for a in picks])

    def pick(self, state: int) -> int:
        """The single chosen index (deterministic strategies only)."""
        dist = self.choice_probs[state]
        if len(dist) != 1:
            raise ModelError(f"strategy is randomized at state {state}")
        return next(iter(dist))


# ---------------------------------------------------------------------------
# parallel composition

def compose(program: Program) -> Program:
    """Collapse all modules into one by standard parallel composition.

    Internal commands and commands whose action belongs to a single module
    pass through; commands sharing a synchronizing action are combined with
    conjoined guards, multiplied branch probabilities and concatenated
    updates.  A module that lists an action in its alphabet but has no
    command for it blocks the action: the partner commands are dropped with
    a BlockedActionWarning.
    """
    if len(program.modules) <= 1:
        return program

    modules = program.modules
    commands: list = []
    # pass-through: internal actions and actions private to one module
    action_owners: dict = {}
    for m in modules:
        for a in m.actions:
            action_owners.setdefault(a, []).append(m.name)
    for m in modules:
        for cmd in m.commands:
            if cmd.action is None or len(action_owners[cmd.action]) == 1:
                commands.append(cmd)

    shared = [a for a in _stable_action_order(modules) if len(action_owners[a]) > 1]
    for action in shared:
        participants = [m for m in modules if action in m.actions]
        rows = [[c for c in m.commands if c.action == action] for m in participants]
        blockers = [m.name for m, r in zip(participants, rows) if not r]
        if blockers:
            warnings.warn(
                f"action '{action}' is blocked by module(s) {', '.join(blockers)}; "
                "synchronized commands dropped",
                BlockedActionWarning,
                stacklevel=2,
            )
            continue
        for combo in itertools.product(*rows):
            commands.append(_combine(action, combo))

    variables = tuple(v for m in modules for v in m.variables)
    actions = frozenset(c.action for c in commands if c.action is not None)
    name = "_".join(m.name for m in modules)
    composed = ModuleDecl(name, variables, actions, tuple(commands))
    return replace(program, modules=(composed,))


def _stable_action_order(modules) -> list:
    seen = []
    for m in modules:
        for c in m.commands:
            if c.action is not None and c.action not in seen:
                seen.append(c.action)
        for a in sorted(m.actions):
            if a not in seen:
                seen.append(a)
    return seen


def _combine(action: str, commands: Sequence[CommandDecl]) -> CommandDecl:
    guard = commands[0].guard
    from .expressions import Binary

    for c in commands[1:]:
        guard = Binary("&", guard, c.guard)
    branches = [(Num(Fraction(1)), ())]
    for c in commands:
        nxt = []
        for prob0, upd0 in branches:
            for prob1, upd1 in c.branches:
                assigned = {v for v, _ in upd0}
                for v, _ in upd1:
                    # impossible with disjoint ownership, guard anyway
                    assert v not in assigned, f"update conflict on '{v}' in action '{action}'"
                p = _mul_probs(prob0, prob1)
                nxt.append((p, upd0 + tuple(upd1)))
        branches = nxt
    return CommandDecl(action, guard, tuple(branches))


def _mul_probs(a: Expr, b: Expr) -> Expr:
    from .expressions import Binary, fold

    if isinstance(a, Num) and a.value == 1:
        return b
    if isinstance(b, Num) and b.value == 1:
        return a
    return fold(Binary("*", a, b))


# ---------------------------------------------------------------------------
# explicit-state exploration

def build_model(
    program: Program,
    valuation: Optional[Mapping[str, Fraction]] = None,
    *,
    state_cap: int = DEFAULT_STATE_CAP,
    on_deadlock: str = "error",
) -> ExplicitModel:
    """Breadth-first exploration of the reachable variable valuations.

    With a total ``valuation`` the result is a fully concrete MC/MDP and
    every distribution is validated; without one the result is a
    multi-instance MDP whose transition entries are residual parameter
    expressions.  State indices follow BFS discovery order, so builds are
    deterministic.  ``on_deadlock`` is 'error' or 'absorb' (add a marked
    internal self-loop; used for transformed models whose dead ends encode
    inconsistent parameter commitments).
    """
    diags = [d for d in check_program(program) if d.severity == "error"]
    if diags:
        raise ModelError("program is not well-formed: " + "; ".join(map(str, diags)))
    if on_deadlock not in ("error", "absorb"):
        raise ValueError("on_deadlock must be 'error' or 'absorb'")

    program = compose(program)
    module = program.single_module()
    var_decls = list(program.variables().values())
    var_names = tuple(v.name for v in var_decls)
    domains = {v.name: (v.lo, v.hi) for v in var_decls}

    if valuation is not None:
        missing = sorted(set(program.parameters) - set(valuation))
        if missing:
            raise ModelError(f"valuation missing parameter(s): {', '.join(missing)}")
        params = {p: Fraction(valuation[p]) for p in program.parameters}
        for p, v in params.items():
            if v not in program.parameters[p]:
                raise ModelError(
                    f"value {format_fraction(v)} not in the declared set of '{p}'"
                )
    else:
        params = None

    consts = dict(program.constants)
    base_env = dict(consts)
    if params:
        pass  # parameters enter probability/cost evaluation only

    initial = tuple(v.init for v in var_decls)
    index = {initial: 0}
    states = [initial]
    rows: list = []
    costs: list = []
    deadlocks = set()
    queue = [0]
    qhead = 0

    def var_env(state) -> dict:
        env = dict(base_env)
        env.update(zip(var_names, (Fraction(x) for x in state)))
        return env

    def prob_value(expr: Expr, env_consts) -> Prob:
        # guards/updates are parameter-free; probabilities/costs may not be
        reduced = substitute(expr, env_consts)
        if isinstance(reduced, Num):
            return reduced.value
        if params is not None:
            v = eval_expr(reduced, params)
            if isinstance(v, bool):
                raise ModelError(f"boolean where a number was expected: {to_text(expr)}")
            return v
        return reduced

    while qhead < len(queue):
        si = queue[qhead]
        qhead += 1
        state = states[si]
        env = var_env(state)
        out: list = []
        for ci, cmd in enumerate(module.commands):
            g = eval_expr(cmd.guard, env)
            if not g:
                continue
            merged: dict = {}
            order: list = []
            concrete_sum = Fraction(0)
            all_concrete = True
            for prob, update in cmd.branches:
                p = prob_value(prob, env)
                target = list(state)
                for var, rhs in update:
                    val = eval_expr(rhs, env)
                    if isinstance(val, bool) or val.denominator != 1:
                        raise ModelError(
                            f"non-integer update of '{var}' at state {_fmt(var_names, state)}"
                        )
                    lo, hi = domains[var]
                    iv = int(val)
                    if not (lo <= iv <= hi):
                        raise ModelError(
                            f"update leaves domain: {var}'={iv} not in [{lo}..{hi}] "
                            f"at state {_fmt(var_names, state)}"
                        )
                    target[var_names.index(var)] = iv
                tkey = tuple(target)
                if tkey not in merged:
                    merged[tkey] = p
                    order.append(tkey)
                else:
                    merged[tkey] = _add_probs(merged[tkey], p)
                if isinstance(p, Fraction):
                    concrete_sum += p
                else:
                    all_concrete = False
            if all_concrete:
                _check_distribution(merged.values(), concrete_sum, si, cmd, var_names, state)
            branches = []
            for tkey in order:
                if tkey not in index:
                    if len(states) >= state_cap:
                        raise StateCapExceeded(
                            f"state cap of {state_cap} states exceeded"
                        )
                    index[tkey] = len(states)
                    states.append(tkey)
                    queue.append(index[tkey])
                branches.append((merged[tkey], index[tkey]))
            out.append(Choice(cmd.action, tuple(branches)))
        if not out:
            if on_deadlock == "error":
                raise DeadlockError(
                    f"deadlock state {_fmt(var_names, state)}: no command enabled"
                )
            deadlocks.add(si)
            out.append(Choice(None, ((Fraction(1), si),)))
        rows.append(out)
        # state cost: sum of reward declarations whose guard holds
        cost: Prob = Fraction(0)
        for r in program.rewards:
            if eval_expr(r.guard, env):
                c = prob_value(r.cost, env)
                cost = _add_probs(cost, c)
        if isinstance(cost, Fraction) and cost < 0:
            raise ModelError(f"negative cost at state {_fmt(var_names, state)}")
        costs.append(cost)

    labels = {}
    for label, lexpr in program.labels.items():
        members = frozenset(
            i for i, st in enumerate(states) if eval_expr(lexpr, var_env(st))
        )
        labels[label] = members

    parametric = params is None and len(program.parameters) > 0
    if parametric:
        kind = "mimdp"
    else:
        kind = "mc" if all(len(row) == 1 for row in rows) else "mdp"
    return ExplicitModel(
        kind=kind,
        var_names=var_names,
        states=states,
        initial=0,
        choices=rows,
        costs=costs,
        labels=labels,
        parameters=dict(program.parameters) if parametric else {},
        deadlocks=frozenset(deadlocks),
    )


def _fmt(var_names, state) -> str:
    return "(" + ",".join(f"{n}={v}" for n, v in zip(var_names, state)) + ")"


def _add_probs(a: Prob, b: Prob) -> Prob:
    from .expressions import Binary, fold

    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a + b
    ea = Num(a) if isinstance(a, Fraction) else a
    eb = Num(b) if isinstance(b, Fraction) else b
    if isinstance(ea, Num) and ea.value == 0:
        return b
    if isinstance(eb, Num) and eb.value == 0:
        return a
    return fold(Binary("+", ea, eb))


def _check_distribution(values, total, state_idx, cmd, var_names=None, state=None):
    for p in values:
        if isinstance(p, Fraction) and not (0 <= p <= 1):
            raise WellDefinednessError(
                f"probability {format_fraction(p)} outside [0,1] "
                f"(state {state_idx}, action {cmd.action or 'tau'})",
                state=state_idx,
                action=cmd.action,
            )
    if total != 1 and abs(total - 1) > SUM_TOL:
        raise WellDefinednessError(
            f"branch probabilities sum to {format_fraction(total)}, not 1 "
            f"(state {state_idx}, action {cmd.action or 'tau'})",
            state=state_idx,
            action=cmd.action,
        )


# ---------------------------------------------------------------------------
# instantiation and the well-definedness filter

def instantiate(model: ExplicitModel, valuation: Mapping[str, Fraction]) -> ExplicitModel:
    """Replace every residual expression by its value under ``valuation``.

    Every distribution is checked to sum to one with entries in [0,1];
    a violation raises WellDefinednessError naming the state and action.
    """
    if model.kind != "mimdp":
        return model
    missing = sorted(set(model.parameters) - set(valuation))
    if missing:
        raise ModelError(f"valuation missing parameter(s): {', '.join(missing)}")
    env = {p: Fraction(valuation[p]) for p in model.parameters}

    def concrete(p: Prob) -> Fraction:
        if isinstance(p, Fraction):
            return p
        v = eval_expr(p, env)
        if isinstance(v, bool):
            raise ModelError(f"boolean where a number was expected: {to_text(p)}")
        return v

    new_rows = []
    for si, row in enumerate(model.choices):
        new_row = []
        for ch in row:
            branches = tuple((concrete(p), t) for p, t in ch.branches)
            total = Fraction(0)
            for p, _ in branches:
                if not (0 <= p <= 1):
                    raise WellDefinednessError(
                        f"well-definedness violation at state {model.state_text(si)}, "
                        f"action {ch.action or 'tau'}: probability {format_fraction(p)}",
                        state=si,
                        action=ch.action,
                    )
                total += p
            if total != 1 and abs(total - 1) > SUM_TOL:
                raise WellDefinednessError(
                    f"well-definedness violation at state {model.state_text(si)}, "
                    f"action {ch.action or 'tau'}: probabilities sum to {format_fraction(total)}",
                    state=si,
                    action=ch.action,
                )
            new_row.append(Choice(ch.action, branches))
        new_rows.append(new_row)
    new_costs = []
    for si, c in enumerate(model.costs):
        v = concrete(c)
        if v < 0:
            raise WellDefinednessError(
                f"negative cost {format_fraction(v)} at state {model.state_text(si)}",
                state=si,
            )
        new_costs.append(v)
    kind = "mc" if all(len(row) == 1 for row in new_rows) else "mdp"
    return ExplicitModel(
        kind=kind,
        var_names=model.var_names,
        states=list(model.states),
        initial=model.initial,
        choices=new_rows,
        costs=new_costs,
        labels=dict(model.labels),
        parameters={},
        deadlocks=model.deadlocks,
    )


def all_valuations(model: ExplicitModel) -> Iterable[Valuation]:
    """Cartesian product of the declared value sets, lexicographic by
    parameter declaration order, then value index."""
    names = list(model.parameters)
    return joint_valuations(names, model.parameters)


def well_defined_valuations(model: ExplicitModel) -> list:
    """All valuations under which every induced distribution sums to one.

    A parameter-free model has the single empty valuation (the empty
    product).  Equivalent to filtering by ``instantiate`` but with
    per-expression value tables (an expression only depends on its own
    parameters, so its values repeat heavily across the product).
    """
    if model.kind != "mimdp":
        return [{}]

    from .expressions import MemoEvaluator

    rows = []
    for row in model.choices:
        for ch in row:
            exprs = [p for p, _ in ch.branches if not isinstance(p, Fraction)]
            if exprs:
                concrete = sum(
                    (p for p, _ in ch.branches if isinstance(p, Fraction)),
                    Fraction(0),
                )
                rows.append((concrete, exprs))
    cost_exprs = [c for c in model.costs if not isinstance(c, Fraction)]

    memo = MemoEvaluator(list(model.parameters))

    def value(e: Expr, u) -> Fraction:
        v = memo.eval(e, u)
        if isinstance(v, bool):
            raise ModelError(f"boolean where a number was expected: {to_text(e)}")
        return v

    result = []
    for u in all_valuations(model):
        ok = True
        for concrete, exprs in rows:
            total = concrete
            for e in exprs:
                v = value(e, u)
                if not (0 <= v <= 1):
                    ok = False
                    break
                total += v
            if not ok or (total != 1 and abs(total - 1) > SUM_TOL):
                ok = False
                break
        if ok:
            for c in cost_exprs:
                if value(c, u) < 0:
                    ok = False
                    break
        if ok:
            result.append(u)
    return result


# ---------------------------------------------------------------------------
# induced chains

def induced_mc(model: ExplicitModel, strategy: Strategy) -> ExplicitModel:
    """The Markov chain obtained by mixing each state's choices under the
    strategy; preserves the state set and initial state."""
    if model.kind == "mimdp":
        raise ModelError("instantiate the model before inducing a chain")
    if len(strategy.choice_probs) != model.num_states:
        raise ModelError("strategy does not cover every state")
    rows = []
    for si, row in enumerate(model.choices):
        dist = strategy.choice_probs[si]
        for a in dist:
            if a < 0 or a >= len(row):
                raise ModelError(
                    f"strategy puts mass on disabled action {a} at state {si}"
                )
        merged: dict = {}
        order: list = []
        action = row[strategy_support_first(dist)].action if row else None
        for a, w in dist.items():
            for p, t in row[a].branches:
                q = w * p
                if t not in merged:
                    merged[t] = q
                    order.append(t)
                else:
                    merged[t] += q
        rows.append([Choice(action, tuple((merged[t], t) for t in order))])
    return ExplicitModel(
        kind="mc",
        var_names=model.var_names,
        states=list(model.states),
        initial=model.initial,
        choices=rows,
        costs=list(model.costs),
        labels=dict(model.labels),
        parameters={},
        deadlocks=model.deadlocks,
    )


def strategy_support_first(dist: Mapping[int, Fraction]) -> int:
    return min(dist)


# ---------------------------------------------------------------------------
# DOT export

def to_dot(model: ExplicitModel, name: str = "model") -> str:
    """Graphviz rendering; states show variable valuations, edges show the
    action and the probability or residual expression."""
    lines = [f"digraph {name} {{", "  rankdir=LR;", "  node [shape=box];"]
    label_index: dict = {}
    for lbl, members in model.labels.items():
        for s in members:
            label_index.setdefault(s, []).append(lbl)
    for i in range(model.num_states):
        extra = ""
        if i in label_index:
            extra = "\\n{" + ",".join(sorted(label_index[i])) + "}"
        shape = ' peripheries=2' if i == model.initial else ""
        lines.append(f'  s{i} [label="{model.state_text(i)}{extra}"{shape}];')
    for i, row in enumerate(model.choices):
        for ci, ch in enumerate(row):
            tag = ch.action or "tau"
            for p, t in ch.branches:
                ptext = format_fraction(p) if isinstance(p, Fraction) else to_text(p)
                lines.append(f'  s{i} -> s{t} [label="{tag}:{ptext}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
