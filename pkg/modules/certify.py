"""
Certify - optimality certificates and recovery-condition checks for candidate
coefficient vectors of the sparse shape-composition program
"""

import enum
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from modules.dsd import BearingMatrix, CompositionSpec, Decomposition, compose_region, decompose
from modules.errors import CertificationError, CompositionError, InputError
from modules.grid import Region, loc_holds
from modules.linkage import LinkageResult, is_basic, row_rank
from modules.simplex import LinearProgram, lp_solve
from modules.solver import SparseCscProblem, objective

logger = logging.getLogger(__name__)

BAND_TOL = 1e-9
MARGIN_EPS = 1e-9
RESIDUAL_TOL = 1e-8
COHERENCE_EPS = 1e-9
BOUND_TOL = 1e-9
MARGIN_CAP = 1.0

WITNESS_EPSILON = 1e-3
WITNESS_K = 2.0
WITNESS_ROUNDS = 40


# ── Partition, bounds and LOC violation ───────────────────────────────────────

@dataclass(frozen=True)
class SupportPartition:
    gamma_0minus: tuple[int, ...]
    gamma_1plus: tuple[int, ...]
    gamma_0: tuple[int, ...]
    gamma_1: tuple[int, ...]

    @property
    def off_support(self) -> tuple[int, ...]:
        """Gamma_0 and Gamma_1 merged in ascending cell order."""
        return tuple(sorted(self.gamma_0 + self.gamma_1))

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(sorted(self.gamma_0minus + self.gamma_1plus))

    def as_dict(self) -> dict:
        def one_based(s):
            return [i + 1 for i in s]
        return {
            "gamma_0minus": one_based(self.gamma_0minus),
            "gamma_1plus": one_based(self.gamma_1plus),
            "gamma_0": one_based(self.gamma_0),
            "gamma_1": one_based(self.gamma_1),
        }


def partition_beta(beta, tol: float = BAND_TOL) -> SupportPartition:
    beta = np.asarray(beta, dtype=float).reshape(-1)
    zero = np.abs(beta) <= tol
    one = np.abs(beta - 1.0) <= tol
    below = (beta < 0) & ~zero
    above = (beta > 1) & ~one
    inside = ~(zero | one | below | above)
    if inside.any():
        i = int(np.flatnonzero(inside)[0])
        raise CertificationError(f"cell {i + 1} has beta = {beta[i]:.6g} strictly inside (0, 1)")

    def idx(mask):
        return tuple(int(i) for i in np.flatnonzero(mask))
    return SupportPartition(idx(below), idx(above), idx(zero), idx(one))


@dataclass(frozen=True, eq=False)
class BoundingVectors:
    l: np.ndarray
    u: np.ndarray
    cells: tuple[int, ...]

    def position(self, cell: int) -> int:
        return self.cells.index(cell)


def bounding_vectors(p, q, partition: SupportPartition) -> BoundingVectors:
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    cells = partition.off_support
    unit = set(partition.gamma_1)
    l = np.array([-p[i] if i in unit else q[i] - p[i] for i in cells], dtype=float)
    u = np.array([q[i] - p[i] if i in unit else q[i] for i in cells], dtype=float)
    return BoundingVectors(l, u, cells)


def loc_violation(p, q, index_sets: Sequence[Sequence[int]], partition: SupportPartition) -> np.ndarray:
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    above, below = set(partition.gamma_1plus), set(partition.gamma_0minus)
    e = np.zeros(len(index_sets))
    for j, cells in enumerate(index_sets):
        e[j] = sum(p[i] for i in cells if i in above) - sum(q[i] for i in cells if i in below)
    return e


# ── Certificate ───────────────────────────────────────────────────────────────

class CertificateStatus(enum.Enum):
    FEASIBLE = "feasible"
    RANK_DEFICIENT = "rank_deficient"
    BOUNDS_INFEASIBLE = "bounds_infeasible"


@dataclass(frozen=True, eq=False)
class Certificate:
    status: CertificateStatus
    eta: np.ndarray
    eta_c: float
    margin: float
    c: np.ndarray
    residual: float
    rank: int

    @property
    def feasible(self) -> bool:
        return self.status is CertificateStatus.FEASIBLE

    def as_dict(self) -> dict:
        return {
            "status": self.status.value,
            "feasible": self.feasible,
            "margin": float(self.margin),
            "rank": int(self.rank),
            "residual": float(self.residual),
            "eta_c": float(self.eta_c),
            "eta": [float(v) for v in self.eta],
            "c": [float(v) for v in self.c],
        }


def _bearing_array(bearing) -> np.ndarray:
    if isinstance(bearing, BearingMatrix):
        return bearing.as_float()
    return np.asarray(bearing, dtype=float)


def _certificate_lp(Bt: np.ndarray, c: Sequence[Optional[float]], e: np.ndarray,
                    bounds: BoundingVectors, sign: float):
    """LP over (eta, h, v_free, t) for one sign of eta_c = sign * h."""
    n_s, k = Bt.shape
    free = [j for j, cj in enumerate(c) if cj is None]
    f = len(free)
    n = k + 1 + f + 1
    h_col, t_col = k, k + 1 + f

    A_eq = np.zeros((n_s, n))
    A_eq[:, :k] = Bt
    for j, cj in enumerate(c):
        if cj is not None:
            A_eq[j, h_col] = sign * cj
    for pos, j in enumerate(free):
        A_eq[j, k + 1 + pos] = 1.0

    rows, rhs = [], []
    for i in range(k):
        lower = np.zeros(n)
        lower[i], lower[t_col] = -1.0, 1.0
        rows.append(lower)
        rhs.append(-bounds.l[i])
        upper = np.zeros(n)
        upper[i], upper[t_col] = 1.0, 1.0
        rows.append(upper)
        rhs.append(bounds.u[i])
    nonneg = np.zeros(n)
    nonneg[h_col] = -1.0
    rows.append(nonneg)
    rhs.append(0.0)
    for pos in range(f):
        for s in (1.0, -1.0):
            row = np.zeros(n)
            row[k + 1 + pos], row[h_col] = s, -1.0
            rows.append(row)
            rhs.append(0.0)
    cap = np.zeros(n)
    cap[t_col] = 1.0
    rows.append(cap)
    rhs.append(MARGIN_CAP)

    objective_row = np.zeros(n)
    objective_row[t_col] = 1.0
    return LinearProgram(objective_row, np.array(rows), np.array(rhs), A_eq, e), free


def find_certificate(bearing, c: Sequence[Optional[float]], e, bounds: BoundingVectors,
                     partition: SupportPartition, support: Sequence[int] = ()) -> Certificate:
    """Margin-maximizing search for (eta, eta_c) with [B_off^T, c](eta, eta_c) = e, l < eta < u.

    Entries of ``c`` given as None are free in [-1, 1]; the bilinear term is
    linearized once per sign of eta_c. Shapes listed in ``support`` must carry
    c = +1 or -1.
    """
    B = _bearing_array(bearing)
    n_s = B.shape[1]
    c = list(c)
    e = np.asarray(e, dtype=float).reshape(-1)
    if len(c) != n_s or e.size != n_s:
        raise InputError(f"c and e need {n_s} entries (one per shape)")
    for j, cj in enumerate(c):
        if cj is not None and abs(cj) > 1.0 + 1e-12:
            raise InputError(f"c_{j + 1} = {cj} lies outside [-1, 1]")
    for j in support:
        if not 0 <= j < n_s:
            raise InputError(f"support index {j + 1} outside 1..{n_s}")
        if c[j] is None or abs(abs(c[j]) - 1.0) > 1e-12:
            raise CertificationError(f"c_{j + 1} must be +1 or -1 on the support, got {c[j]}")
    cells = list(bounds.cells)
    if tuple(cells) != partition.off_support:
        raise InputError("bounding vectors do not match the partition's off-support cells")
    Bt = B[cells].T

    base_rank = row_rank(Bt)
    if base_rank < n_s - 1:
        logger.debug("Certificate rank check failed: rank %d < %d", base_rank, n_s - 1)
        return Certificate(CertificateStatus.RANK_DEFICIENT, np.zeros(len(cells)), 0.0, 0.0,
                           np.array([0.0 if cj is None else cj for cj in c]), np.inf, base_rank)

    best = None
    for sign in (1.0, -1.0):
        lp, free = _certificate_lp(Bt, c, e, bounds, sign)
        result = lp_solve(lp)
        if not result.optimal:
            continue
        if best is None or result.value > best[0].value:
            best = (result, sign, free)

    if best is None:
        return Certificate(CertificateStatus.BOUNDS_INFEASIBLE, np.zeros(len(cells)), 0.0, -np.inf,
                           np.array([0.0 if cj is None else cj for cj in c]), np.inf, base_rank)

    result, sign, free = best
    k = len(cells)
    point = result.point
    eta = point[:k]
    h = point[k]
    eta_c = sign * h
    c_final = np.array([0.0 if cj is None else float(cj) for cj in c])
    for pos, j in enumerate(free):
        c_final[j] = np.clip(point[k + 1 + pos] / eta_c, -1.0, 1.0) if abs(eta_c) > 1e-15 else 0.0
    margin = float(point[-1])
    residual = float(np.abs(Bt @ eta + eta_c * c_final - e).max(initial=0.0))
    rank = row_rank(np.hstack([Bt, c_final[:, None]]))

    if rank < n_s:
        status = CertificateStatus.RANK_DEFICIENT
    elif margin > MARGIN_EPS and residual <= RESIDUAL_TOL:
        status = CertificateStatus.FEASIBLE
    else:
        status = CertificateStatus.BOUNDS_INFEASIBLE
    logger.debug("Certificate %s: margin %.3g residual %.3g rank %d", status.value, margin, residual, rank)
    return Certificate(status, eta, float(eta_c), margin, c_final, residual, rank)


def default_c(alpha) -> list[Optional[float]]:
    """sign(alpha) on the support, free elsewhere."""
    alpha = np.asarray(alpha, dtype=float)
    return [float(np.sign(a)) if a != 0 else None for a in alpha]


def certify_alpha(problem: SparseCscProblem, alpha_star, c: Optional[Sequence[Optional[float]]] = None) -> Certificate:
    """Runs the full certificate pipeline on the dictionary cells."""
    alpha_star = np.asarray(alpha_star, dtype=float)
    partition = partition_beta(problem.B @ alpha_star)
    bounds = bounding_vectors(problem.p, problem.q, partition)
    e = loc_violation(problem.p, problem.q, problem.cells.index_sets, partition)
    support = tuple(int(j) for j in np.flatnonzero(alpha_star))
    return find_certificate(problem.B, default_c(alpha_star) if c is None else c, e, bounds, partition, support)


# ── Tangent witness ───────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class TangentWitness:
    alpha_hat: np.ndarray
    epsilon: float
    k: float
    gain: float


def tangent_witness_loc(problem: SparseCscProblem, spec: CompositionSpec, alpha_star,
                        c: Optional[Sequence[float]] = None) -> TangentWitness:
    """Finds alpha_hat = alpha' + k alpha_star with G(alpha_hat) = G(alpha_star) and c.alpha_hat > c.alpha_star.

    alpha' equals alpha_star on the composition and -epsilon on every other shape.
    """
    alpha_star = np.asarray(alpha_star, dtype=float)
    n = problem.n_shapes
    sigma = compose_region(problem.dictionary, spec)
    report = loc_holds(problem.field, sigma)
    if not report.holds:
        raise CertificationError(f"the LOC fails on the composed region ({report.violations} violating pixels)")
    members = list(spec.members)
    exterior = np.ones(n, dtype=bool)
    exterior[members] = False
    if c is None:
        c = np.where(exterior, 1.0, np.sign(alpha_star))
    c = np.asarray(c, dtype=float)

    target = objective(problem, alpha_star)
    reference = float(c @ alpha_star)
    tol = 1e-8 * max(1.0, abs(target))
    epsilon, k = WITNESS_EPSILON, WITNESS_K
    for _ in range(WITNESS_ROUNDS):
        alpha_prime = np.where(exterior, -epsilon, alpha_star)
        alpha_hat = alpha_prime + k * alpha_star
        same_value = abs(objective(problem, alpha_hat) - target) <= tol
        gain = float(c @ alpha_hat) - reference
        if same_value and gain > 0:
            logger.debug("Tangent witness at epsilon=%g k=%g", epsilon, k)
            return TangentWitness(alpha_hat, epsilon, k, gain)
        if not same_value:
            epsilon /= 2.0
        if gain <= 0:
            k *= 2.0
    raise CertificationError(f"no tangent witness after {WITNESS_ROUNDS} rounds")


# ── Bearing constants and coherence ───────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class BearingConstants:
    shapelets: tuple[int, ...]
    w: np.ndarray
    unit: tuple[int, ...]
    null: tuple[int, ...]
    bounds_ok: bool

    def of(self, shapelet: int) -> float:
        return float(self.w[self.shapelets.index(shapelet)])


def bearing_constants(restricted_bearing, unit_set: Sequence[int], null_set: Sequence[int], c) -> BearingConstants:
    """Solves (B^R rows of the unit and null shapelets)^T w = -c and checks the expected ranges."""
    B = _bearing_array(restricted_bearing)
    rows = tuple(sorted(int(i) for i in set(unit_set) | set(null_set)))
    c = np.asarray(c, dtype=float).reshape(-1)
    M = B[list(rows)].T
    if M.shape[0] != M.shape[1] or row_rank(M) < M.shape[0]:
        raise CertificationError(
            f"bearing system is singular ({M.shape[0]} shapes, {M.shape[1]} unit/null shapelets)"
        )
    w = np.linalg.solve(M, -c)
    n_exclude = int((c < 0).sum())
    unit_pos = [rows.index(i) for i in unit_set]
    null_pos = [rows.index(i) for i in null_set]
    w_unit, w_null = w[unit_pos], w[null_pos]
    bounds_ok = bool(
        np.all(w_unit >= -(1 + n_exclude) - BOUND_TOL) and np.all(w_unit <= -1 + BOUND_TOL)
        and np.all(w_null > BOUND_TOL) and np.all(w_null <= 1 + BOUND_TOL)
    )
    if not bounds_ok:
        logger.warning("Bearing constants fall outside the expected ranges: %s", w)
    return BearingConstants(rows, w, tuple(unit_set), tuple(null_set), bounds_ok)


def composition_signs(linkage: LinkageResult) -> np.ndarray:
    """+1 on included, -1 on excluded shapes, in the restricted column order."""
    include = set(linkage.spec.include)
    return np.array([1.0 if j in include else -1.0 for j in linkage.members])


def linkage_bearing_constants(linkage: LinkageResult) -> BearingConstants:
    return bearing_constants(linkage.bearing, linkage.unit_shapelets, linkage.null_shapelets,
                             composition_signs(linkage))


def cell_shapelet_map(cells: Decomposition, linkage: LinkageResult) -> np.ndarray:
    """Restricted shapelet of each dictionary cell, -1 when the cell lies outside the composition."""
    representative = np.array([s.pixels[0] for s in cells.shapelets], dtype=np.int64)
    return linkage.decomposition.labels[representative]


def geometric_coherence(cells: Decomposition, linkage: LinkageResult, exterior: Sequence[int],
                        constants: BearingConstants) -> np.ndarray:
    """C_j = |sum_l gamma_lj w_l| over the unit and null shapelets, one value per exterior shape."""
    B = cells.bearing.as_float()
    owner = cell_shapelet_map(cells, linkage)
    C = np.zeros(len(exterior))
    for pos, j in enumerate(exterior):
        total = 0.0
        for ell, w_ell in zip(constants.shapelets, constants.w):
            J = np.flatnonzero(owner == ell)
            if J.size == 0:
                continue
            gamma = B[J, j].sum() / J.size
            total += gamma * w_ell
        C[pos] = abs(total)
    return C


# ── Recovery conditions ───────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class RecoveryReport:
    w: np.ndarray
    shapelets: tuple[int, ...]
    coherence: dict
    row_rank_ok: bool
    rank: int
    required_rank: int
    exempt: tuple[int, ...]
    verdict: bool
    linkage: LinkageResult

    def as_dict(self, labels: Optional[Sequence[str]] = None) -> dict:
        def name(j):
            return labels[j] if labels else j + 1
        return {
            "verdict": self.verdict,
            "row_rank_ok": self.row_rank_ok,
            "rank": self.rank,
            "required_rank": self.required_rank,
            "bearing_constants": {int(i) + 1: float(v) for i, v in zip(self.shapelets, self.w)},
            "coherence": {name(j): float(v) for j, v in self.coherence.items()},
            "exempt": [name(j) for j in self.exempt],
            "alpha": self.linkage.as_dict()["alpha"],
        }


def verify_recovery_conditions(dictionary: Sequence[Region], spec: CompositionSpec) -> RecoveryReport:
    report = is_basic(dictionary, spec)
    if not report.basic:
        raise CompositionError(f"composition {spec.as_dict()} is not basic")
    linkage = report.linkage
    constants = linkage_bearing_constants(linkage)

    cells = decompose(dictionary)
    B = cells.bearing.as_float()
    alpha = linkage.full_alpha(len(dictionary))
    partition = partition_beta(B @ alpha)
    off = list(partition.off_support)

    members = list(spec.members)
    composition_union = B[:, members].any(axis=1)
    exterior = [j for j in range(len(dictionary)) if j not in set(members)]
    exempt = tuple(j for j in exterior if not np.any(B[composition_union, j]))
    ranked = members + [j for j in exterior if j not in exempt]
    stacked = B[np.ix_(off, ranked)].T
    rank = row_rank(stacked)
    row_rank_ok = rank == len(ranked)

    C = geometric_coherence(cells, linkage, exterior, constants)
    coherence = {j: float(v) for j, v in zip(exterior, C)}
    worst = max(coherence.values(), default=0.0)
    verdict = bool(row_rank_ok and worst < 1.0 - COHERENCE_EPS)
    logger.info("Recovery check for %s: rank %d/%d, max coherence %.4g, verdict %s",
                spec.as_dict(), rank, len(ranked), worst, verdict)
    return RecoveryReport(constants.w, constants.shapelets, coherence, row_rank_ok, rank, len(ranked),
                          exempt, verdict, linkage)
