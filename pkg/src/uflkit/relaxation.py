"""LP relaxation of UFL: build, solve, and extract per-client structure."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .instance import UflInstance
from .linprog import EQUAL, LESS, LpProblem, solve_lp

SUPPORT_TOL = 1e-9  # x entries above this are structural support, below is round-off


@dataclass(frozen=True)
class FractionalSolution:
    """Optimal fractional solution of the relaxation.

    x[j, i] is the fraction of client j served by facility i; y[i] the
    fractional opening.  support[j] lists facilities with x[j, i] above
    SUPPORT_TOL.  facility_cost + connection_cost equals the LP objective.
    """

    inst: UflInstance
    x: np.ndarray
    y: np.ndarray
    support: tuple
    facility_cost: float
    connection_cost: float
    objective: float

    @property
    def costs(self):
        return self.facility_cost, self.connection_cost


def build_relaxation(inst: UflInstance) -> LpProblem:
    """Assignment LP: minimize sum d(i,j) x_ij + sum f_i y_i subject to
    sum_i x_ij = 1 per client and x_ij <= y_i.

    Variable order: all x row-major (client-major), then all y.  Constraint
    order: the client assignment equalities, then the coupling rows x <= y
    in the same row-major order.
    """
    n_c, n_f = inst.dist.shape
    n_x = n_c * n_f
    n_vars = n_x + n_f
    c = np.concatenate([inst.dist.ravel(), inst.opening_cost])

    n_rows = n_c + n_x
    a = np.zeros((n_rows, n_vars))
    for j in range(n_c):
        a[j, j * n_f:(j + 1) * n_f] = 1.0
    rows = np.arange(n_x)
    a[n_c + rows, rows] = 1.0
    a[n_c + rows, n_x + (rows % n_f)] = -1.0

    relations = (EQUAL,) * n_c + (LESS,) * n_x
    b = np.concatenate([np.ones(n_c), np.zeros(n_x)])
    return LpProblem(sense="min", c=c, a=a, relations=relations, b=b)


def solve_relaxation(inst: UflInstance) -> FractionalSolution:
    """Solve the relaxation and check the structural invariants."""
    n_c, n_f = inst.dist.shape
    sol = solve_lp(build_relaxation(inst))
    if sol.status != "optimal":
        raise RuntimeError(f"relaxation solve ended with status {sol.status!r}")
    x = sol.x[:n_c * n_f].reshape(n_c, n_f).copy()
    y = sol.x[n_c * n_f:].copy()
    np.clip(x, 0.0, None, out=x)
    np.clip(y, 0.0, None, out=y)

    row_sums = x.sum(axis=1)
    if np.any(np.abs(row_sums - 1.0) > 1e-7):
        raise RuntimeError("assignment rows do not sum to 1 within tolerance")
    if np.any(x > y[None, :] + 1e-9):
        raise RuntimeError("x exceeds y beyond tolerance")

    support = tuple(tuple(np.nonzero(x[j] > SUPPORT_TOL)[0].tolist())
                    for j in range(n_c))
    facility_cost = float(inst.opening_cost @ y)
    connection_cost = float(np.sum(inst.dist * x))
    if abs(facility_cost + connection_cost - sol.objective) > 1e-7 * (1 + abs(sol.objective)):
        raise RuntimeError("cost split does not reproduce the LP objective")
    x.setflags(write=False)
    y.setflags(write=False)
    return FractionalSolution(inst=inst, x=x, y=y, support=support,
                              facility_cost=facility_cost,
                              connection_cost=connection_cost,
                              objective=sol.objective)


def solution_to_dict(frac: FractionalSolution) -> dict:
    triplets = [[int(j), int(i), float(frac.x[j, i])]
                for j in range(frac.inst.client_count)
                for i in frac.support[j]]
    return {
        "y": [float(v) for v in frac.y],
        "x": triplets,
        "facility_cost": frac.facility_cost,
        "connection_cost": frac.connection_cost,
        "objective": frac.objective,
    }


def write_solution(frac: FractionalSolution, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(solution_to_dict(frac), fh, indent=1)
        fh.write("\n")
