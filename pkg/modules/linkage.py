"""
Linkage - maps a composition (include, exclude) to its coefficient vector

The included shapes get coefficient 1; the excluded ones come from the LP
    maximize sum(alpha_minus)  s.t.  B22 alpha_minus <= -B21 1
over the shapelets that meet an excluded shape.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from modules.dsd import CompositionSpec, Decomposition, decompose, is_nonredundant
from modules.errors import CompositionError, SolverError
from modules.grid import Region, membership_matrix
from modules.simplex import LinearProgram, LPResult, lp_solve, probe_uniqueness

logger = logging.getLogger(__name__)

__all__ = [
    "LinearProgram", "LPResult", "lp_solve",
    "LinkageResult", "DiscriminantMatrix", "BasicReport",
    "linkage_alpha", "discriminant_matrix", "is_basic",
    "indicator_coefficients", "active_sets", "row_rank",
]

POSITIVITY_EPS = 1e-9
SUPPORT_EPS = 1e-6
VALUE_TOL = 1e-9
RANK_TOL = 1e-10


# ── Helpers ───────────────────────────────────────────────────────────────────

def row_rank(matrix: np.ndarray, tol: float = RANK_TOL) -> int:
    """Rank by Gaussian elimination with partial pivoting."""
    M = np.array(matrix, dtype=float, copy=True)
    if M.size == 0:
        return 0
    rows, cols = M.shape
    rank = 0
    for col in range(cols):
        if rank == rows:
            break
        pivot = rank + int(np.argmax(np.abs(M[rank:, col])))
        if abs(M[pivot, col]) <= tol:
            continue
        M[[rank, pivot]] = M[[pivot, rank]]
        M[rank] /= M[rank, col]
        below = M[rank + 1:, col].copy()
        M[rank + 1:] -= np.outer(below, M[rank])
        rank += 1
    return rank


def _snap(values: np.ndarray) -> np.ndarray:
    """Rounds entries lying within float noise of an integer."""
    rounded = np.rint(values)
    return np.where(np.abs(values - rounded) <= VALUE_TOL, rounded, values)


# ── Types ─────────────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class LinkageResult:
    spec: CompositionSpec
    members: tuple[int, ...]
    alpha: np.ndarray
    beta: np.ndarray
    decomposition: Decomposition
    unit_shapelets: tuple[int, ...]
    null_shapelets: tuple[int, ...]
    exclude_rows: tuple[int, ...]
    unique: bool

    @property
    def bearing(self) -> np.ndarray:
        """Restricted bearing matrix B^R as floats (shapelets x members)."""
        return self.decomposition.bearing.as_float()

    def local(self, shape_index: int) -> int:
        return self.members.index(shape_index)

    def full_alpha(self, n_shapes: int) -> np.ndarray:
        alpha = np.zeros(n_shapes)
        alpha[list(self.members)] = self.alpha
        return alpha

    def as_dict(self) -> dict:
        return {
            "composition": self.spec.as_dict(),
            "alpha": {int(j) + 1: float(a) for j, a in zip(self.members, self.alpha)},
            "beta": [float(b) for b in self.beta],
            "unit_shapelets": [i + 1 for i in self.unit_shapelets],
            "null_shapelets": [i + 1 for i in self.null_shapelets],
            "unique": self.unique,
            "bearing": self.decomposition.bearing.to_text().splitlines(),
        }


@dataclass(frozen=True, eq=False)
class DiscriminantMatrix:
    rows: np.ndarray
    null_shapelets: tuple[int, ...]
    exclude: tuple[int, ...]

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows.shape


@dataclass(frozen=True, eq=False)
class BasicReport:
    basic: bool
    rank: int
    n_exclude: int
    n_null: int
    min_w: Optional[float]
    w: np.ndarray
    linkage: LinkageResult

    def as_dict(self) -> dict:
        return {
            "basic": self.basic,
            "rank": self.rank,
            "excluded_shapes": self.n_exclude,
            "null_shapelets": self.n_null,
            "min_w": self.min_w,
            "w": [float(v) for v in self.w],
        }


# ── Linkage process ───────────────────────────────────────────────────────────

def linkage_lp(result_bearing: np.ndarray, plus_cols: Sequence[int], minus_cols: Sequence[int]):
    """Returns (lp, rows of the shapelets meeting an excluded shape)."""
    B = np.asarray(result_bearing, dtype=float)
    rows = np.flatnonzero(B[:, list(minus_cols)].any(axis=1))
    A = B[np.ix_(rows, list(minus_cols))]
    b = -B[np.ix_(rows, list(plus_cols))].sum(axis=1)
    return LinearProgram(np.ones(len(minus_cols)), A, b), rows


def linkage_alpha(shapes: Sequence[Region], spec: CompositionSpec) -> LinkageResult:
    spec.check_bounds(len(shapes))
    if not is_nonredundant(shapes, spec):
        raise CompositionError(f"composition {spec.as_dict()} is redundant")
    members = spec.members
    decomposition = decompose([shapes[j] for j in members])
    B = decomposition.bearing.as_float()
    plus_cols = [members.index(j) for j in spec.include]
    minus_cols = [members.index(j) for j in spec.exclude]

    alpha = np.zeros(len(members))
    alpha[plus_cols] = 1.0
    exclude_rows: np.ndarray = np.zeros(0, dtype=np.int64)
    unique = True
    if minus_cols:
        lp, exclude_rows = linkage_lp(B, plus_cols, minus_cols)
        result = lp_solve(lp)
        if not result.optimal:
            raise SolverError(f"linkage LP is {result.status.value} for {spec.as_dict()}")
        alpha[minus_cols] = _snap(result.point)
        unique = probe_uniqueness(lp, result).unique

    beta = _snap(B @ alpha)
    in_exclude = np.zeros(B.shape[0], dtype=bool)
    in_exclude[exclude_rows] = True
    unit = tuple(int(i) for i in np.flatnonzero(np.abs(beta - 1.0) <= VALUE_TOL))
    null = tuple(int(i) for i in np.flatnonzero(in_exclude & (np.abs(beta) <= VALUE_TOL)))
    logger.debug("Linkage of %s: alpha=%s unique=%s", spec.as_dict(), alpha, unique)
    return LinkageResult(
        spec=spec,
        members=members,
        alpha=alpha,
        beta=beta,
        decomposition=decomposition,
        unit_shapelets=unit,
        null_shapelets=null,
        exclude_rows=tuple(int(i) for i in exclude_rows),
        unique=unique,
    )


def bearing_has_full_column_rank(result: LinkageResult) -> bool:
    return row_rank(result.bearing.T) == len(result.members)


def discriminant_matrix(shapes: Sequence[Region], spec: CompositionSpec,
                        result: Optional[LinkageResult] = None) -> DiscriminantMatrix:
    """Rows of the exclude block of B^R at the null-valued shapelets."""
    if result is None:
        result = linkage_alpha(shapes, spec)
    minus_cols = [result.local(j) for j in spec.exclude]
    rows = result.bearing[np.ix_(list(result.null_shapelets), minus_cols)].astype(np.int8)
    return DiscriminantMatrix(rows, result.null_shapelets, spec.exclude)


def is_basic(shapes: Sequence[Region], spec: CompositionSpec) -> BasicReport:
    result = linkage_alpha(shapes, spec)
    delta = discriminant_matrix(shapes, spec, result)
    n_exclude = len(spec.exclude)
    n_null = len(result.null_shapelets)
    if n_exclude == 0:
        return BasicReport(True, 0, 0, n_null, None, np.zeros(0), result)
    rank = row_rank(delta.rows)
    if not (rank == n_exclude == n_null):
        return BasicReport(False, rank, n_exclude, n_null, None, np.zeros(0), result)
    w = np.linalg.solve(delta.rows.T.astype(float), np.ones(n_exclude))
    min_w = float(w.min())
    return BasicReport(min_w > POSITIVITY_EPS, rank, n_exclude, n_null, min_w, w, result)


# ── Constructive coefficients and supports ────────────────────────────────────

def indicator_coefficients(shapes: Sequence[Region], spec: CompositionSpec) -> np.ndarray:
    """1 on included shapes, -eta on excluded ones, eta = max overlap count of included shapes."""
    spec.check_bounds(len(shapes))
    members = membership_matrix(shapes)
    eta = int(members[:, list(spec.include)].sum(axis=1).max())
    alpha = np.zeros(len(shapes))
    alpha[list(spec.include)] = 1.0
    alpha[list(spec.exclude)] = -float(eta)
    return alpha


def active_sets(alpha, eps: float = SUPPORT_EPS) -> tuple[tuple[int, ...], tuple[int, ...]]:
    alpha = np.asarray(alpha, dtype=float)
    plus = tuple(int(i) for i in np.flatnonzero(alpha > eps))
    minus = tuple(int(i) for i in np.flatnonzero(alpha < -eps))
    return plus, minus
