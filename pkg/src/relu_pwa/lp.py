"""Dense simplex kernel for small linear programs.

Every geometric operation in the package reduces to problems of the form::

    maximize  c @ x   subject to   A @ x <= b,   x free

with few variables (the input dimension) and a moderate number of rows.
The kernel works on the dual ``min b @ y  s.t.  A.T @ y = c, y >= 0``, whose
tableau has only ``n + 1`` rows, and recovers the primal point from the
optimal basis.  Pivoting uses Dantzig's rule and switches to Bland's rule
after a run of degenerate pivots, so the method terminates and is
deterministic.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import resolve

__all__ = [
    "LpStatus",
    "LpProblem",
    "LpOutcome",
    "LpNumericalError",
    "solve",
    "maximize",
    "feasible",
]

_PIVOT_TOL = 1e-11
_COST_TOL = 1e-10
_DEGENERATE_RUN = 30
_MAX_ITER_FACTOR = 50


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class LpNumericalError(ArithmeticError):
    """The simplex could not certify any status (cycling or ill-conditioning)."""


@dataclass(frozen=True)
class LpProblem:
    """``maximize objective @ x  s.t.  constraint_matrix @ x <= constraint_rhs``."""

    objective: np.ndarray
    constraint_matrix: np.ndarray
    constraint_rhs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).reshape(-1)
        b = np.asarray(self.constraint_rhs, dtype=float).reshape(-1)
        A = np.asarray(self.constraint_matrix, dtype=float)
        if A.size == 0:
            A = A.reshape(b.shape[0], c.shape[0])
        if A.ndim != 2:
            raise ValueError("constraint_matrix must be two-dimensional")
        if A.shape[0] != b.shape[0]:
            raise ValueError(
                f"constraint_matrix has {A.shape[0]} rows but constraint_rhs has {b.shape[0]} entries"
            )
        if A.shape[1] != c.shape[0]:
            raise ValueError(
                f"objective has length {c.shape[0]} but constraint_matrix has {A.shape[1]} columns"
            )
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "constraint_matrix", A)
        object.__setattr__(self, "constraint_rhs", b)


@dataclass(frozen=True)
class LpOutcome:
    status: LpStatus
    value: Optional[float] = None
    point: Optional[np.ndarray] = None

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


def _pivot(T, i, j):
    T[i] /= T[i, j]
    col = T[:, j].copy()
    col[i] = 0.0
    T -= np.outer(col, T[i])


def _run(T, basis, n_enter, max_iter):
    """Minimise over the tableau in place; returns ``"optimal"`` or ``"unbounded"``."""
    m = T.shape[0] - 1
    cost_tol = _COST_TOL * max(1.0, float(np.abs(T[-1, :n_enter]).max(initial=0.0)))
    degenerate = 0
    bland = False
    for _ in range(max_iter):
        r = T[-1, :n_enter]
        if bland:
            cand = np.flatnonzero(r < -cost_tol)
            if cand.size == 0:
                return "optimal"
            j = int(cand[0])
        else:
            j = int(np.argmin(r))
            if r[j] >= -cost_tol:
                return "optimal"
        col = T[:m, j]
        rows = np.flatnonzero(col > _PIVOT_TOL)
        if rows.size == 0:
            return "unbounded"
        rhs = np.maximum(T[rows, -1], 0.0)
        ratios = rhs / col[rows]
        rmin = ratios.min()
        ties = rows[ratios <= rmin + 1e-12 * (1.0 + rmin)]
        i = int(ties[np.argmin(basis[ties])])
        degenerate = degenerate + 1 if rmin <= 1e-12 else 0
        if degenerate > _DEGENERATE_RUN:
            bland = True
        _pivot(T, i, j)
        basis[i] = j
    raise LpNumericalError("simplex iteration limit reached")


def _dual_solve(c, A, b):
    """Solve ``min b@y s.t. A.T@y = c, y >= 0``.

    Returns ``(status, x)`` where status is one of ``"optimal"``,
    ``"dual_infeasible"``, ``"dual_unbounded"`` and ``x`` is the primal point
    for the optimal case.
    """
    M, n = A.shape
    if M == 0:
        if np.all(np.abs(c) <= _COST_TOL):
            return "optimal", np.zeros(n)
        return "dual_infeasible", None

    sign = np.where(c < 0, -1.0, 1.0)
    T = np.zeros((n + 1, M + n + 1))
    T[:n, :M] = A.T * sign[:, None]
    T[:n, M:M + n] = np.eye(n)
    T[:n, -1] = c * sign
    T[-1, :M] = -T[:n, :M].sum(axis=0)
    T[-1, -1] = -T[:n, -1].sum()
    basis = np.arange(M, M + n)
    max_iter = _MAX_ITER_FACTOR * (M + n) + 100

    _run(T, basis, M + n, max_iter)
    infeas = -T[-1, -1]
    if infeas > 1e-9 * max(1.0, float(np.abs(c).max())):
        return "dual_infeasible", None

    # Drive artificial variables out of the basis; rows with no real pivot
    # candidate are linearly dependent and get dropped.
    drop = []
    for i in range(n):
        if basis[i] >= M:
            row = np.abs(T[i, :M])
            j = int(np.argmax(row))
            if row[j] > 1e-9:
                _pivot(T, i, j)
                basis[i] = j
            else:
                drop.append(i)
    if drop:
        keep = np.setdiff1d(np.arange(n + 1), drop)
        T = T[keep]
        basis = np.delete(basis, drop)
    m = T.shape[0] - 1

    cost_b = b[basis]
    T[-1, :] = 0.0
    T[-1, :M] = b - cost_b @ T[:m, :M]
    T[-1, -1] = -cost_b @ T[:m, -1]
    status = _run(T, basis, M, max_iter)
    if status == "unbounded":
        return "dual_unbounded", None

    Ab, bb = A[basis], b[basis]
    if Ab.shape[0] == n:
        try:
            x = np.linalg.solve(Ab, bb)
        except np.linalg.LinAlgError:
            x = np.linalg.lstsq(Ab, bb, rcond=None)[0]
    else:
        x = np.linalg.lstsq(Ab, bb, rcond=None)[0]
    return "optimal", x


def _feasibility_gap(A, b):
    """Smallest uniform relaxation ``t >= 0`` making ``A x <= b + t`` feasible."""
    M, n = A.shape
    A_aux = np.zeros((M + 1, n + 1))
    A_aux[:M, :n] = A
    A_aux[:M, n] = -1.0
    A_aux[M, n] = -1.0
    b_aux = np.append(b, 0.0)
    c_aux = np.zeros(n + 1)
    c_aux[n] = -1.0
    status, z = _dual_solve(c_aux, A_aux, b_aux)
    if status != "optimal":
        raise LpNumericalError("feasibility subproblem failed to reach optimality")
    return max(0.0, float(z[n])), z[:n]


def _check_point(A, b, x, tol):
    if A.shape[0] == 0:
        return
    scale = 1.0 + float(np.abs(b).max())
    viol = float(np.max(A @ x - b))
    if viol > 1e3 * tol.feas * scale:
        raise LpNumericalError(f"returned point violates constraints by {viol:.3e}")


def solve(problem: LpProblem, tol=None) -> LpOutcome:
    """Solve ``problem`` and return its status, optimal value and maximiser."""
    tol = resolve(tol)
    c, A, b = problem.objective, problem.constraint_matrix, problem.constraint_rhs
    if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise LpNumericalError("non-finite problem data")
    status, x = _dual_solve(c, A, b)
    if status == "optimal":
        _check_point(A, b, x, tol)
        return LpOutcome(LpStatus.OPTIMAL, float(c @ x), x)
    if status == "dual_unbounded":
        return LpOutcome(LpStatus.INFEASIBLE)
    gap, _ = _feasibility_gap(A, b)
    if gap <= tol.feas * (1.0 + float(np.abs(b).max(initial=0.0))):
        return LpOutcome(LpStatus.UNBOUNDED)
    return LpOutcome(LpStatus.INFEASIBLE)


def maximize(objective, A, b, tol=None) -> LpOutcome:
    return solve(LpProblem(objective, A, b), tol)


def feasible(A, b, tol=None) -> Optional[np.ndarray]:
    """Return a point of ``{x | A x <= b}`` or ``None`` when it is empty."""
    A = np.asarray(A, dtype=float)
    out = solve(LpProblem(np.zeros(A.shape[1]), A, b), tol)
    return out.point if out.optimal else None
