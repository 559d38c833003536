"""
Simplex - dense two-phase simplex with Bland's rule for the small LPs of
linkage, certification and solver polishing

All programs read: maximize c.x subject to A x <= b (and optionally A_eq x = b_eq),
with x free. Free variables are split as x = x_plus - x_minus.
"""

import enum
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from modules.errors import InputError, SolverError

logger = logging.getLogger(__name__)

PIVOT_TOL = 1e-9
FEASIBILITY_TOL = 1e-9
RANGE_TOL = 1e-9


class LPStatus(enum.Enum):
    OPTIMAL = "optimal"
    UNBOUNDED = "unbounded"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True, eq=False)
class LinearProgram:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        n = c.size
        A = np.asarray(self.A, dtype=float).reshape(-1, n) if n else np.zeros((0, 0))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.shape[0] != b.size:
            raise InputError(f"LP has {A.shape[0]} inequality rows but {b.size} right-hand sides")
        if (self.A_eq is None) != (self.b_eq is None):
            raise InputError("A_eq and b_eq must be given together")
        A_eq = np.zeros((0, n)) if self.A_eq is None else np.asarray(self.A_eq, dtype=float).reshape(-1, n)
        b_eq = np.zeros(0) if self.b_eq is None else np.asarray(self.b_eq, dtype=float).reshape(-1)
        if A_eq.shape[0] != b_eq.size:
            raise InputError(f"LP has {A_eq.shape[0]} equality rows but {b_eq.size} right-hand sides")
        for name, arr in (("c", c), ("A", A), ("b", b), ("A_eq", A_eq), ("b_eq", b_eq)):
            if not np.all(np.isfinite(arr)):
                raise InputError(f"LP data '{name}' contains non-finite values")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "A_eq", A_eq)
        object.__setattr__(self, "b_eq", b_eq)

    @property
    def n_vars(self) -> int:
        return self.c.size

    def with_rows(self, A_extra, b_extra) -> "LinearProgram":
        return LinearProgram(self.c, np.vstack([self.A, A_extra]), np.concatenate([self.b, b_extra]),
                             self.A_eq, self.b_eq)

    def with_objective(self, c) -> "LinearProgram":
        return LinearProgram(c, self.A, self.b, self.A_eq, self.b_eq)


@dataclass(frozen=True, eq=False)
class LPResult:
    status: LPStatus
    value: Optional[float] = None
    point: Optional[np.ndarray] = None
    active_rows: tuple[int, ...] = ()
    pivots: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is LPStatus.OPTIMAL


@dataclass(frozen=True, eq=False)
class UniquenessProbe:
    unique: bool
    ranges: np.ndarray = field(default_factory=lambda: np.zeros(0))


# ── Tableau ───────────────────────────────────────────────────────────────────

def _pivot(T: np.ndarray, basis: list[int], row: int, col: int):
    T[row] /= T[row, col]
    factors = T[:, col].copy()
    factors[row] = 0.0
    T -= np.outer(factors, T[row])
    basis[row] = col


def _run(T: np.ndarray, basis: list[int], allowed: np.ndarray, max_pivots: int) -> tuple[str, int]:
    """Primal simplex on T (last row holds reduced costs, last column the rhs)."""
    pivots = 0
    while True:
        reduced = T[-1, :-1]
        candidates = np.flatnonzero(allowed & (reduced > PIVOT_TOL))
        if candidates.size == 0:
            return "optimal", pivots
        col = int(candidates[0])
        column = T[:-1, col]
        rows = np.flatnonzero(column > PIVOT_TOL)
        if rows.size == 0:
            return "unbounded", pivots
        ratios = T[rows, -1] / column[rows]
        best = ratios.min()
        tied = rows[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
        row = int(min(tied, key=lambda r: basis[r]))
        _pivot(T, basis, row, col)
        pivots += 1
        if pivots > max_pivots:
            raise SolverError(f"simplex exceeded {max_pivots} pivots")


def lp_solve(lp: LinearProgram, max_pivots: int = 50000) -> LPResult:
    """Optimal vertex, its value and the tight inequality rows, or unbounded/infeasible."""
    n = lp.n_vars
    m_ub, m_eq = lp.A.shape[0], lp.A_eq.shape[0]
    m = m_ub + m_eq

    # columns: x_plus (n) | x_minus (n) | slacks (m_ub) | artificials (m)
    n_struct = 2 * n + m_ub
    n_cols = n_struct + m
    T = np.zeros((m + 1, n_cols + 1))
    rows_A = np.vstack([lp.A, lp.A_eq]) if m else np.zeros((0, n))
    rhs = np.concatenate([lp.b, lp.b_eq])
    T[:m, :n] = rows_A
    T[:m, n:2 * n] = -rows_A
    T[np.arange(m_ub), 2 * n + np.arange(m_ub)] = 1.0
    T[:m, -1] = rhs

    basis: list[int] = []
    needs_artificial = []
    for i in range(m):
        if T[i, -1] < 0:
            T[i] *= -1.0
        if i < m_ub and T[i, 2 * n + i] > 0:
            basis.append(2 * n + i)
        else:
            basis.append(n_struct + i)
            T[i, n_struct + i] = 1.0
            needs_artificial.append(i)

    pivots = 0
    if needs_artificial:
        # phase 1: maximize -(sum of artificials)
        T[-1, :] = 0.0
        for i in needs_artificial:
            T[-1] += T[i]
        T[-1, n_struct:n_cols] = 0.0
        structural = np.zeros(n_cols, dtype=bool)
        structural[:n_struct] = True
        _, used = _run(T, basis, structural, max_pivots)
        pivots += used
        if T[-1, -1] > FEASIBILITY_TOL * max(1.0, np.abs(rhs).max(initial=0.0)):
            logger.debug("LP infeasible: phase-1 residual %g", T[-1, -1])
            return LPResult(LPStatus.INFEASIBLE, pivots=pivots)
        # drive remaining artificials out of the basis
        for r in range(m):
            if basis[r] >= n_struct:
                nonzero = np.flatnonzero(np.abs(T[r, :n_struct]) > PIVOT_TOL)
                if nonzero.size:
                    _pivot(T, basis, r, int(nonzero[0]))
                    pivots += 1

    allowed = np.zeros(n_cols, dtype=bool)
    allowed[:n_struct] = True
    keep = [r for r in range(m) if basis[r] < n_struct]
    T = np.vstack([T[keep], np.zeros((1, n_cols + 1))])
    basis = [basis[r] for r in keep]

    cost = np.zeros(n_cols)
    cost[:n] = lp.c
    cost[n:2 * n] = -lp.c
    T[-1, :-1] = cost
    for r, col in enumerate(basis):
        if T[-1, col] != 0.0:
            T[-1] -= T[-1, col] * T[r]

    status, used = _run(T, basis, allowed, max_pivots)
    pivots += used
    if status == "unbounded":
        return LPResult(LPStatus.UNBOUNDED, pivots=pivots)

    values = np.zeros(n_cols)
    for r, col in enumerate(basis):
        values[col] = T[r, -1]
    point = values[:n] - values[n:2 * n]
    value = float(lp.c @ point)
    residual = lp.A @ point - lp.b if m_ub else np.zeros(0)
    scale = 1.0 + np.abs(lp.b)
    active = tuple(int(i) for i in np.flatnonzero(np.abs(residual) <= 1e-9 * scale))
    return LPResult(LPStatus.OPTIMAL, value=value, point=point, active_rows=active, pivots=pivots)


# ── Uniqueness ────────────────────────────────────────────────────────────────

def probe_uniqueness(lp: LinearProgram, result: LPResult, tol: float = RANGE_TOL) -> UniquenessProbe:
    """Per-coordinate range of the optimal face; unique iff every range < tol."""
    if not result.optimal:
        raise InputError("uniqueness probe needs an optimal LP result")
    n = lp.n_vars
    if n == 0:
        return UniquenessProbe(True, np.zeros(0))
    slack = 1e-12 * (1.0 + abs(result.value))
    face = lp.with_rows(-lp.c.reshape(1, -1), np.array([-result.value + slack]))
    ranges = np.zeros(n)
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        hi = lp_solve(face.with_objective(e))
        lo = lp_solve(face.with_objective(-e))
        if not (hi.optimal and lo.optimal):
            ranges[k] = np.inf
            continue
        ranges[k] = hi.value + lo.value
    ranges = np.maximum(ranges, 0.0)
    return UniquenessProbe(bool(np.all(ranges < tol)), ranges)
