"""Dense two-phase primal simplex with Bland's anti-cycling rule.

Desk-scale only (a soft cap of 1e4 variables): the point is zero external
solver dependencies and bit-reproducible pivoting, not speed.  Variables are
nonnegative; constraints may be <=, = or >=.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

PIVOT_TOL = 1e-9
DEFAULT_VAR_CAP = 10_000


class LpError(ValueError):
    pass


class LpSizeError(LpError):
    pass


@dataclass
class LinearConstraint:
    coeffs: Dict[int, float]
    sense: str  # '<=' | '=' | '>='
    rhs: float

    def __post_init__(self):
        if self.sense not in ("<=", "=", ">="):
            raise LpError(f"bad constraint sense {self.sense!r}")


@dataclass
class LinearProgram:
    """min objective . x  subject to the constraints, x >= 0."""

    num_vars: int
    objective: Dict[int, float] = field(default_factory=dict)
    constraints: List[LinearConstraint] = field(default_factory=list)

    def add(self, coeffs: Dict[int, float], sense: str, rhs: float) -> None:
        self.constraints.append(LinearConstraint(dict(coeffs), sense, float(rhs)))


@dataclass
class LpSolution:
    status: str  # 'optimal' | 'infeasible' | 'unbounded'
    x: Optional[np.ndarray]
    objective: Optional[float]


def solve_lp(
    lp: LinearProgram,
    *,
    var_cap: int = DEFAULT_VAR_CAP,
    secondary: Optional[Dict[int, float]] = None,
) -> LpSolution:
    """Solve the program; with ``secondary``, lexicographically minimize the
    secondary objective over the primary-optimal face (entering columns are
    restricted to zero reduced cost in the primary, so the primary optimum
    is preserved exactly)."""
    if lp.num_vars > var_cap:
        raise LpSizeError(
            f"{lp.num_vars} variables exceed the desk-scale cap of {var_cap}"
        )
    n = lp.num_vars
    m = len(lp.constraints)

    # count auxiliary columns: slack for <=, surplus for >=, artificial for =/>=
    # rows are first normalized to nonnegative right-hand sides
    senses = []
    rows = np.zeros((m, n))
    rhs = np.zeros(m)
    for i, c in enumerate(lp.constraints):
        sense = c.sense
        scale = 1.0
        if c.rhs < 0:
            scale = -1.0
            sense = {"<=": ">=", ">=": "<=", "=": "="}[sense]
        senses.append(sense)
        rhs[i] = scale * c.rhs
        for j, v in c.coeffs.items():
            if not 0 <= j < n:
                raise LpError(f"variable index {j} out of range")
            rows[i, j] += scale * v

    n_slack = sum(1 for s in senses if s == "<=")
    n_surplus = sum(1 for s in senses if s == ">=")
    n_art = sum(1 for s in senses if s in ("=", ">="))
    total = n + n_slack + n_surplus + n_art
    tab = np.zeros((m, total + 1))
    tab[:, :n] = rows
    tab[:, -1] = rhs

    basis = [-1] * m
    art_cols = []
    col = n
    for i, s in enumerate(senses):
        if s == "<=":
            tab[i, col] = 1.0
            basis[i] = col
            col += 1
    for i, s in enumerate(senses):
        if s == ">=":
            tab[i, col] = -1.0
            col += 1
    for i, s in enumerate(senses):
        if s in ("=", ">="):
            tab[i, col] = 1.0
            basis[i] = col
            art_cols.append(col)
            col += 1
    assert col == total

    allowed = np.ones(total, dtype=bool)

    # phase 1: minimize the sum of artificials
    if art_cols:
        cost1 = np.zeros(total)
        cost1[art_cols] = 1.0
        z = _price_out(tab, basis, cost1)
        status = _pivot_loop(tab, basis, z, allowed)
        if status != "optimal":  # phase-1 objective is bounded below by 0
            return LpSolution("infeasible", None, None)
        if z[-1] < -PIVOT_TOL * max(1.0, float(np.max(np.abs(rhs))) ):
            # z holds the negated objective value in its last entry
            return LpSolution("infeasible", None, None)
        _drive_out_artificials(tab, basis, set(art_cols))
        allowed[art_cols] = False

    cost2 = np.zeros(total)
    for j, v in lp.objective.items():
        if not 0 <= j < n:
            raise LpError(f"objective index {j} out of range")
        cost2[j] += v
    z = _price_out(tab, basis, cost2)
    status = _pivot_loop(tab, basis, z, allowed)
    if status == "unbounded":
        return LpSolution("unbounded", None, None)

    if secondary is not None:
        # restrict to the optimal face of the primary objective
        face = allowed & (np.abs(z[:-1]) <= PIVOT_TOL * max(1.0, float(np.max(np.abs(cost2)))))
        for b in basis:
            if 0 <= b < total:
                face[b] = allowed[b]
        cost3 = np.zeros(total)
        for j, v in secondary.items():
            cost3[j] += v
        z3 = _price_out(tab, basis, cost3)
        _pivot_loop(tab, basis, z3, face)  # unbounded face: keep current point

    x = np.zeros(n)
    for i, b in enumerate(basis):
        if 0 <= b < n:
            x[b] = tab[i, -1]
    objective = float(sum(v * x[j] for j, v in lp.objective.items()))
    return LpSolution("optimal", x, objective)


def _price_out(tab: np.ndarray, basis: List[int], cost: np.ndarray) -> np.ndarray:
    """Objective row [reduced costs | -objective] for the current basis."""
    z = np.zeros(tab.shape[1])
    z[:-1] = cost
    for i, b in enumerate(basis):
        cb = cost[b]
        if cb != 0.0:
            z -= cb * tab[i]
    return z


def _pivot_loop(tab: np.ndarray, basis: List[int], z: np.ndarray, allowed: np.ndarray) -> str:
    m = tab.shape[0]
    while True:
        enter = -1
        for j in range(tab.shape[1] - 1):
            if allowed[j] and z[j] < -PIVOT_TOL:
                enter = j  # Bland: lowest eligible index
                break
        if enter < 0:
            return "optimal"
        best_ratio = None
        leave = -1
        for i in range(m):
            a = tab[i, enter]
            if a > PIVOT_TOL:
                ratio = tab[i, -1] / a
                if (
                    best_ratio is None
                    or ratio < best_ratio - PIVOT_TOL
                    or (abs(ratio - best_ratio) <= PIVOT_TOL and basis[i] < basis[leave])
                ):
                    best_ratio = ratio
                    leave = i
        if leave < 0:
            return "unbounded"
        _pivot(tab, z, leave, enter)
        basis[leave] = enter


def _pivot(tab: np.ndarray, z: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    piv = tab[row]
    factors = tab[:, col].copy()
    factors[row] = 0.0
    tab -= np.outer(factors, piv)
    if z[col] != 0.0:
        z -= z[col] * piv


def _drive_out_artificials(tab: np.ndarray, basis: List[int], art: set) -> None:
    m, ncols = tab.shape
    for i in range(m):
        if basis[i] in art:
            pivot_col = -1
            for j in range(ncols - 1):
                if j not in art and abs(tab[i, j]) > PIVOT_TOL:
                    pivot_col = j
                    break
            if pivot_col >= 0:
                dummy = np.zeros(ncols)
                _pivot(tab, dummy, i, pivot_col)
                basis[i] = pivot_col
            else:
                # redundant row: basic artificial at level ~0, leave in place
                tab[i, :] = 0.0
