"""
Solver - the sparse convex shape-composition program

    minimize  G(alpha) = sum_x max(d(x) L_alpha(x), d^-(x)),   d = pi_in - pi_ex,
              L_alpha(x) = sum_j alpha_j [x in S_j]

under an L1 budget (constrained form) or with an L1 penalty (regularized form).
Internally everything runs on the cells of the dictionary's disjoint shape
decomposition, where G splits into sum_i p_i max(beta_i, 0) - q_i min(beta_i, 1)
with beta = B alpha.
"""

import itertools
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from modules.dsd import CompositionSpec, Decomposition, decompose
from modules.errors import InputError
from modules.grid import (
    InhomogeneityField,
    Region,
    ShapeIntegrals,
    check_on_grid,
    membership_matrix,
    pixel_set_integrals,
)
from modules.linkage import active_sets
from modules.simplex import LinearProgram, lp_solve

logger = logging.getLogger(__name__)

MAX_ORACLE_SHAPES = 14
POLISH_SUPPORT_RATIO = 1e-4
BUDGET_SLACK = 1e-9
KINK_TOL = 1e-7
STATIONARITY_TOL = 1e-9
MAX_STATIONARITY_SHAPES = 64
MAX_STATIONARITY_CELLS = 512


# ── Configuration and problem ────────────────────────────────────────────────

@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 3000
    step_scale: float = 1.0
    stop_tol: float = 1e-7
    polish: bool = True
    seed: int = 0

    def __post_init__(self):
        if int(self.max_iters) < 1:
            raise InputError(f"max_iters must be at least 1, got {self.max_iters}")
        if not float(self.step_scale) > 0:
            raise InputError(f"step_scale must be positive, got {self.step_scale}")
        if float(self.stop_tol) < 0:
            raise InputError(f"stop_tol must be nonnegative, got {self.stop_tol}")

    @property
    def window(self) -> int:
        return max(1, self.max_iters // 10)


@dataclass(frozen=True, eq=False)
class SparseCscProblem:
    field: InhomogeneityField
    dictionary: Sequence[Region]
    budget: Optional[float] = None
    penalty: Optional[float] = None

    def __post_init__(self):
        if not self.dictionary:
            raise InputError("the dictionary must contain at least one shape")
        check_on_grid(self.field.grid, self.dictionary)
        if self.budget is not None and self.penalty is not None:
            raise InputError("set either a budget (tau) or a penalty (lambda), not both")
        if self.budget is not None and not float(self.budget) >= 0:
            raise InputError(f"budget must be nonnegative, got {self.budget}")
        if self.penalty is not None and not float(self.penalty) >= 0:
            raise InputError(f"penalty must be nonnegative, got {self.penalty}")
        object.__setattr__(self, "dictionary", tuple(self.dictionary))

    @property
    def n_shapes(self) -> int:
        return len(self.dictionary)

    @cached_property
    def members(self) -> np.ndarray:
        """(pixels, shapes) 0/1 float matrix."""
        return membership_matrix(self.dictionary).astype(float)

    @cached_property
    def cells(self) -> Decomposition:
        return decompose(self.dictionary)

    @cached_property
    def B(self) -> np.ndarray:
        return self.cells.bearing.as_float()

    @cached_property
    def integrals(self) -> ShapeIntegrals:
        return pixel_set_integrals(self.field, [s.pixels for s in self.cells.shapelets])

    @property
    def p(self) -> np.ndarray:
        return self.integrals.P

    @property
    def q(self) -> np.ndarray:
        return self.integrals.Q

    def _sharing_cache(self, other: "SparseCscProblem") -> "SparseCscProblem":
        for name in ("members", "cells", "B", "integrals"):
            if name in self.__dict__:
                other.__dict__[name] = self.__dict__[name]
        return other

    def with_budget(self, tau: float) -> "SparseCscProblem":
        return self._sharing_cache(SparseCscProblem(self.field, self.dictionary, budget=tau))

    def with_penalty(self, lam: float) -> "SparseCscProblem":
        return self._sharing_cache(SparseCscProblem(self.field, self.dictionary, penalty=lam))


@dataclass(frozen=True, eq=False)
class Solution:
    alpha: np.ndarray
    objective: float
    support: tuple[tuple[int, ...], tuple[int, ...]]
    iterations_used: int
    converged: bool
    polished: bool = False
    penalized_objective: Optional[float] = None

    def as_dict(self, labels: Optional[Sequence[str]] = None) -> dict:
        def name(j):
            return labels[j] if labels else j + 1
        report = {
            "objective": float(self.objective),
            "iterations": int(self.iterations_used),
            "converged": bool(self.converged),
            "polished": bool(self.polished),
            "l1_norm": float(np.abs(self.alpha).sum()),
            "support": {
                "positive": [name(j) for j in self.support[0]],
                "negative": [name(j) for j in self.support[1]],
            },
        }
        if self.penalized_objective is not None:
            report["penalized_objective"] = float(self.penalized_objective)
        return report


# ── Objective and subgradient ─────────────────────────────────────────────────

def _check_alpha(problem: SparseCscProblem, alpha) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    if alpha.size != problem.n_shapes:
        raise InputError(f"alpha has {alpha.size} entries for {problem.n_shapes} shapes")
    return alpha


def superposition(problem: SparseCscProblem, alpha) -> np.ndarray:
    """L_alpha per pixel."""
    return problem.members @ _check_alpha(problem, alpha)


def objective(problem: SparseCscProblem, alpha) -> float:
    d = problem.field.d
    level = superposition(problem, alpha)
    return float(np.maximum(d * level, np.minimum(d, 0.0)).sum())


def separable_objective(p, q, beta) -> float:
    p, q, beta = (np.asarray(a, dtype=float) for a in (p, q, beta))
    if not (p.shape == q.shape == beta.shape):
        raise InputError("p, q and beta must have equal lengths")
    return float((p * np.maximum(beta, 0.0) - q * np.minimum(beta, 1.0)).sum())


def _cell_value(problem: SparseCscProblem, alpha: np.ndarray) -> float:
    return separable_objective(problem.p, problem.q, problem.B @ alpha)


def subgradient(problem: SparseCscProblem, alpha) -> np.ndarray:
    """B^T g with g_i = p_i above 1, -q_i below 0 and p_i - q_i on [0, 1]."""
    alpha = _check_alpha(problem, alpha)
    beta = problem.B @ alpha
    p, q = problem.p, problem.q
    g = np.where(beta > 1.0, p, np.where(beta < 0.0, -q, p - q))
    return problem.B.T @ g


def project_l1(v, tau: float) -> np.ndarray:
    """Euclidean projection onto {x : ||x||_1 <= tau} by sort-and-threshold."""
    if tau < 0:
        raise InputError(f"L1 radius must be nonnegative, got {tau}")
    v = np.asarray(v, dtype=float).reshape(-1)
    u = np.abs(v)
    if u.sum() <= tau:
        return v.copy()
    if tau == 0:
        return np.zeros_like(v)
    s = np.sort(u)[::-1]
    cssv = np.cumsum(s)
    rho = np.nonzero(s * np.arange(1, s.size + 1) > (cssv - tau))[0][-1]
    theta = (cssv[rho] - tau) / (rho + 1.0)
    return np.sign(v) * np.clip(u - theta, 0.0, None)


# ── Polish ────────────────────────────────────────────────────────────────────

def _polish(problem: SparseCscProblem, alpha: np.ndarray, tau: Optional[float], lam: float) -> Optional[np.ndarray]:
    """Re-solves the problem exactly as an LP on the support of alpha with its signs fixed."""
    peak = np.abs(alpha).max(initial=0.0)
    if peak == 0.0:
        return None
    support = np.flatnonzero(np.abs(alpha) > POLISH_SUPPORT_RATIO * peak)
    signs = np.sign(alpha[support])
    B_s = problem.B[:, support]
    touched = np.flatnonzero(B_s.any(axis=1))
    B_t = B_s[touched]
    p, q = problem.p[touched], problem.q[touched]
    k, m = support.size, touched.size

    # variables: alpha_support (k) | r (m); minimize sum(r) + lam * sum(sign * alpha)
    eye = np.eye(m)
    rows = [
        np.hstack([-q[:, None] * B_t, -eye]),
        np.hstack([(p - q)[:, None] * B_t, -eye]),
        np.hstack([p[:, None] * B_t, -eye]),
        np.hstack([-np.diag(signs), np.zeros((k, m))]),
    ]
    rhs = [np.zeros(m), np.zeros(m), q, np.zeros(k)]
    if tau is not None:
        rows.append(np.hstack([signs, np.zeros(m)])[None, :])
        rhs.append(np.array([tau]))
    c = -np.concatenate([lam * signs, np.ones(m)])
    result = lp_solve(LinearProgram(c, np.vstack(rows), np.concatenate(rhs)))
    if not result.optimal:
        logger.warning("Polish LP ended %s; keeping the subgradient iterate", result.status.value)
        return None
    polished = np.zeros_like(alpha)
    polished[support] = result.point[:k]
    if tau is not None:
        # the simplex may overshoot the budget row by float noise
        norm = np.abs(polished).sum()
        if norm > tau:
            polished *= tau / norm
    return polished


def _is_stationary(problem: SparseCscProblem, alpha: np.ndarray, tau: Optional[float], lam: float) -> bool:
    """True when no feasible direction lowers the objective at alpha.

    Minimizes the one-sided directional derivative over h in [-1, 1]^n as an
    LP; cells sitting on a breakpoint (beta = 0 or 1) take an epigraph
    variable, the rest contribute their constant slope.
    """
    n = problem.n_shapes
    if n > MAX_STATIONARITY_SHAPES or problem.B.shape[0] > MAX_STATIONARITY_CELLS:
        return False
    B, p, q = problem.B, problem.p, problem.q
    beta = B @ alpha
    at_zero = np.abs(beta) <= KINK_TOL
    at_one = np.abs(beta - 1.0) <= KINK_TOL
    slope = np.where(beta < 0, -q, np.where(beta > 1, p, p - q))
    smooth = ~(at_zero | at_one)

    on = np.abs(alpha) > KINK_TOL
    signs = np.sign(alpha) * on
    on_boundary = tau is not None and np.abs(alpha).sum() >= tau - BUDGET_SLACK * max(1.0, tau)
    off = np.flatnonzero(~on) if (lam or on_boundary) else np.zeros(0, dtype=int)
    kinks = np.flatnonzero(~smooth)
    K, m = kinks.size, off.size

    # variables: h (n) | t (K) | a (m), all free; derivative = fixed.h + sum(t) + lam * sum(a)
    fixed = slope[smooth] @ B[smooth] + lam * signs
    rows, rhs = [], []
    eye = np.eye(n)
    rows += [np.hstack([eye, np.zeros((n, K + m))]), np.hstack([-eye, np.zeros((n, K + m))])]
    rhs += [np.ones(n), np.ones(n)]
    for k, i in enumerate(kinks):
        pair = (p[i] - q[i], -q[i]) if at_zero[i] else (p[i], p[i] - q[i])
        for s in pair:
            row = np.zeros(n + K + m)
            row[:n] = s * B[i]
            row[n + k] = -1.0
            rows.append(row[None, :])
            rhs.append(np.zeros(1))
    for k, j in enumerate(off):
        for sign in (1.0, -1.0):
            row = np.zeros(n + K + m)
            row[j] = sign
            row[n + K + k] = -1.0
            rows.append(row[None, :])
            rhs.append(np.zeros(1))
    if on_boundary:
        row = np.zeros(n + K + m)
        row[:n] = signs
        row[n + K:] = 1.0
        rows.append(row[None, :])
        rhs.append(np.zeros(1))
    c = -np.concatenate([fixed, np.ones(K), np.full(m, lam)])
    result = lp_solve(LinearProgram(c, np.vstack(rows), np.concatenate(rhs)))
    if not result.optimal:
        logger.debug("Stationarity LP ended %s", result.status.value)
        return False
    scale = max(1.0, float(p.sum() + q.sum()) + lam * n)
    return result.value <= STATIONARITY_TOL * scale


# ── Projected subgradient descent ─────────────────────────────────────────────

def _descend(problem: SparseCscProblem, config: SolverConfig, tau: Optional[float], lam: float) -> Solution:
    n = problem.n_shapes
    radius = tau if tau is not None else 1.0

    def value(a):
        return _cell_value(problem, a) + lam * np.abs(a).sum()

    alpha = np.zeros(n)
    best, best_value = alpha.copy(), value(alpha)
    history = [best_value]
    converged = False
    iterations = 0
    for t in range(1, config.max_iters + 1):
        iterations = t
        g = subgradient(problem, alpha)
        if lam:
            g = g + lam * np.sign(alpha)
        norm = np.linalg.norm(g)
        if norm == 0.0:
            converged = True
            break
        step = config.step_scale * radius / np.sqrt(t)
        alpha = alpha - step * g / norm
        if tau is not None:
            alpha = project_l1(alpha, tau)
        current = value(alpha)
        if current < best_value:
            best, best_value = alpha.copy(), current
        history.append(best_value)
        if t >= config.window:
            gain = history[t - config.window] - best_value
            if gain <= config.stop_tol * max(1.0, abs(best_value)):
                converged = True
                break
    logger.debug("Subgradient stopped after %d iterations at %.9g", iterations, best_value)

    polished = False
    if config.polish:
        candidate = _polish(problem, best, tau, lam)
        if candidate is not None:
            candidate_value = value(candidate)
            if candidate_value <= best_value + 1e-12 * max(1.0, abs(best_value)):
                best, best_value, polished = candidate, candidate_value, True
    if not converged and _is_stationary(problem, best, tau, lam):
        logger.debug("Final iterate passes the stationarity check")
        converged = True

    g_value = objective(problem, best)
    return Solution(
        alpha=best,
        objective=g_value,
        support=active_sets(best),
        iterations_used=iterations,
        converged=converged,
        polished=polished,
        penalized_objective=g_value + lam * float(np.abs(best).sum()) if tau is None else None,
    )


def solve_constrained(problem: SparseCscProblem, config: SolverConfig = SolverConfig()) -> Solution:
    if problem.budget is None:
        raise InputError("solve_constrained needs a problem with a budget (tau)")
    tau = float(problem.budget)
    if tau == 0.0:
        zero = np.zeros(problem.n_shapes)
        return Solution(zero, objective(problem, zero), ((), ()), 0, True)
    solution = _descend(problem, config, tau, 0.0)
    logger.info("Constrained solve (tau=%g): objective %.6g, support %s, %d iterations",
                tau, solution.objective, solution.support, solution.iterations_used)
    return solution


def solve_regularized(problem: SparseCscProblem, config: SolverConfig = SolverConfig()) -> Solution:
    if problem.penalty is None:
        raise InputError("solve_regularized needs a problem with a penalty (lambda)")
    solution = _descend(problem, config, None, float(problem.penalty))
    logger.info("Regularized solve (lambda=%g): objective %.6g, support %s, %d iterations",
                problem.penalty, solution.objective, solution.support, solution.iterations_used)
    return solution


def solve(problem: SparseCscProblem, config: SolverConfig = SolverConfig()) -> Solution:
    if problem.penalty is not None:
        return solve_regularized(problem, config)
    return solve_constrained(problem, config)


# ── Disjoint dictionaries ─────────────────────────────────────────────────────

@dataclass(frozen=True)
class DisjointSelection:
    indices: tuple[int, ...]
    unique: bool


def solve_disjoint_closed_form(integrals: ShapeIntegrals, s: int) -> DisjointSelection:
    """The min(s, m) shapes with the most negative P - Q, m = number of negative values."""
    if s < 0:
        raise InputError(f"cardinality must be nonnegative, got {s}")
    net = np.asarray(integrals.net, dtype=float)
    order = np.argsort(net, kind="stable")
    m = int((net < 0).sum())
    k = min(s, m)
    chosen = tuple(sorted(int(j) for j in order[:k]))
    unique = True
    if 0 < k < m and net[order[k]] == net[order[k - 1]]:
        unique = False
    if k < s and np.any(net == 0.0):
        unique = False
    return DisjointSelection(chosen, unique)


# ── Exhaustive oracle ─────────────────────────────────────────────────────────

@dataclass(frozen=True)
class CardinalResult:
    spec: Optional[CompositionSpec]
    value: float
    ties: int
    evaluated: int

    def as_dict(self) -> dict:
        return {
            "composition": None if self.spec is None else self.spec.as_dict(),
            "value": float(self.value),
            "ties": self.ties,
            "evaluated": self.evaluated,
        }


def brute_force_cardinal_sc(problem: SparseCscProblem, s: int) -> CardinalResult:
    """Exhaustive minimum of sum_{x in R} d(x) over compositions with at most s shapes.

    The empty selection (value 0) takes part; ties go to the lexicographically
    smallest (include, exclude) pair.
    """
    n = problem.n_shapes
    if n > MAX_ORACLE_SHAPES:
        raise InputError(f"brute force is limited to {MAX_ORACLE_SHAPES} shapes, dictionary has {n}")
    if s < 0 or s > n:
        raise InputError(f"cardinality {s} outside [0, {n}]")
    cell_value = problem.p - problem.q
    cell_bits = (problem.B.astype(np.int64) << np.arange(n, dtype=np.int64)).sum(axis=1)
    tol = 1e-12 * max(1.0, float(np.abs(cell_value).sum()))

    best_key: tuple = ((), ())
    best_value, ties, evaluated = 0.0, 1, 1
    for k in range(1, s + 1):
        for chosen in itertools.combinations(range(n), k):
            for pattern in range(1, 2 ** k):
                include = tuple(chosen[i] for i in range(k) if pattern >> (k - 1 - i) & 1)
                exclude = tuple(chosen[i] for i in range(k) if not pattern >> (k - 1 - i) & 1)
                plus = sum(1 << j for j in include)
                minus = sum(1 << j for j in exclude)
                region = ((cell_bits & plus) != 0) & ((cell_bits & minus) == 0)
                current = float(cell_value[region].sum())
                evaluated += 1
                key = (include, exclude)
                if current < best_value - tol:
                    best_key, best_value, ties = key, current, 1
                elif abs(current - best_value) <= tol:
                    ties += 1
                    if key < best_key:
                        best_key = key
    spec = CompositionSpec(*best_key) if best_key[0] else None
    logger.debug("Brute force over %d compositions: best %s = %.9g (%d ties)",
                 evaluated, best_key, best_value, ties)
    return CardinalResult(spec, best_value, ties, evaluated)


# ── Support ───────────────────────────────────────────────────────────────────

def extract_support(problem: SparseCscProblem, alpha, level: float = 0.5) -> Region:
    if not (0.0 < level < 1.0):
        raise InputError(f"support level must lie in (0, 1), got {level}")
    return Region(problem.field.grid, superposition(problem, alpha) > level)
