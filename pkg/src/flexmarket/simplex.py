"""Dense revised simplex for small LPs in the form

    maximize c @ x   subject to   A @ x <= b,  x >= 0,  b >= 0.

The all-slack basis is feasible (b >= 0), so no phase-1 is needed.  Bland's
rule (smallest-index entering and leaving) is used throughout, which rules
out cycling at the cost of speed; the LPs solved here are tiny.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverFailure

__all__ = ["SimplexResult", "maximize"]

_PIVOT_TOL = 1e-9


@dataclass
class SimplexResult:
    x: np.ndarray          # primal solution, one entry per structural variable
    value: float           # objective at x
    duals: np.ndarray      # one multiplier per row (nonnegative at optimum)
    slack: np.ndarray      # b - A @ x
    iterations: int


def maximize(c, A, b) -> SimplexResult:
    """Solve the LP; raises ``SolverFailure`` on unboundedness or when the
    iteration cap 10 * (rows + cols)^2 is exceeded."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError("A must be a matrix")
    num_rows, num_cols = A.shape
    c = np.asarray(c, dtype=float).reshape(num_cols)
    b = np.asarray(b, dtype=float).reshape(num_rows)
    if np.any(b < 0):
        raise ValueError("b must be nonnegative (slack basis must be feasible)")

    if num_rows == 0:
        # No constraints: only x = 0 is sensible for bounded problems.
        if np.any(c > _PIVOT_TOL):
            raise SolverFailure("unbounded: positive objective with no constraints")
        return SimplexResult(
            x=np.zeros(num_cols), value=0.0, duals=np.zeros(0),
            slack=np.zeros(0), iterations=0,
        )

    # Column j of the full system: structural columns then identity slacks.
    def column(j: int) -> np.ndarray:
        if j < num_cols:
            return A[:, j]
        out = np.zeros(num_rows)
        out[j - num_cols] = 1.0
        return out

    cost = np.concatenate([c, np.zeros(num_rows)])
    basis = list(range(num_cols, num_cols + num_rows))
    in_basis = np.zeros(num_cols + num_rows, dtype=bool)
    in_basis[num_cols:] = True
    binv = np.eye(num_rows)
    xb = b.astype(float).copy()

    cap = 10 * (num_rows + num_cols) ** 2
    iterations = 0
    while True:
        if iterations > cap:
            raise SolverFailure("iteration cap %d exceeded" % cap)
        iterations += 1

        duals = cost[basis] @ binv
        reduced_struct = c - duals @ A
        # Bland: entering = smallest index with positive reduced cost
        # (slack j has reduced cost -duals[j]).
        entering = -1
        for j in range(num_cols + num_rows):
            if in_basis[j]:
                continue
            reduced = reduced_struct[j] if j < num_cols else -duals[j - num_cols]
            if reduced > _PIVOT_TOL:
                entering = j
                break
        if entering < 0:
            break

        direction = binv @ column(entering)
        best_ratio = None
        leaving_row = -1
        for i in range(num_rows):
            if direction[i] > _PIVOT_TOL:
                ratio = xb[i] / direction[i]
                if (best_ratio is None or ratio < best_ratio - _PIVOT_TOL
                        or (abs(ratio - best_ratio) <= _PIVOT_TOL
                            and basis[i] < basis[leaving_row])):
                    best_ratio = ratio
                    leaving_row = i
        if leaving_row < 0:
            raise SolverFailure("unbounded model")

        pivot = direction[leaving_row]
        binv[leaving_row] /= pivot
        xb[leaving_row] = best_ratio
        for i in range(num_rows):
            if i != leaving_row and direction[i] != 0.0:
                binv[i] -= direction[i] * binv[leaving_row]
                xb[i] -= direction[i] * best_ratio
                if -1e-12 < xb[i] < 0.0:
                    xb[i] = 0.0
        in_basis[basis[leaving_row]] = False
        in_basis[entering] = True
        basis[leaving_row] = entering

    x_full = np.zeros(num_cols + num_rows)
    for i, var in enumerate(basis):
        x_full[var] = xb[i]
    x = x_full[:num_cols]
    return SimplexResult(
        x=x,
        value=float(cost[basis] @ xb),
        duals=duals,
        slack=b - A @ x,
        iterations=iterations,
    )
