"""
Problem definitions and one-call drivers for the shipped models.

Lasso family (GL, SGL, OSGL): H(x) = 1/2||Ax - b||^2 with mu and L the
extreme eigenvalues of A^T A. Sparse-group logistic regression (SGLR):
averaged logistic loss over (x, intercept) with the intercept left
unpenalized.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.special import expit

from cfkit.config import Config
from cfkit.engine import (
    CompositeConstants,
    CompositeOracle,
    SolveResult,
    SolverConfig,
    solve,
)
from cfkit.errors import ConditionViolated, DimensionMismatch, NotConverged, ZeroMatrix
from cfkit.penalties import (
    BoxL1Penalty,
    OverlappingSparseGroupPenalty,
    PartialPenalty,
    Penalty,
    SparseGroupPenalty,
    get_penalty,
)
from cfkit.prox import GroupStructure

logger = logging.getLogger(__name__)

FLAVORS = ("gl", "sgl", "osgl")
VIEWS = ("identity", "composite")

# lambda_min below this fraction of lambda_max is treated as a rank-deficient A
RANK_TOLERANCE = 1e-10


@dataclass(frozen=True)
class LassoProblem:
    a_matrix: np.ndarray
    b: np.ndarray
    groups: GroupStructure
    gamma1: float
    gamma2: float = 0.0
    flavor: str = "gl"

    def __post_init__(self):
        a = np.asarray(self.a_matrix, dtype=float)
        b = np.asarray(self.b, dtype=float)
        object.__setattr__(self, "a_matrix", a)
        object.__setattr__(self, "b", b)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise DimensionMismatch(f"design matrix must be a nonempty 2-D array, got shape {a.shape}")
        if b.shape != (a.shape[0],):
            raise DimensionMismatch(f"response has shape {b.shape}, expected ({a.shape[0]},)")
        if self.groups.n != a.shape[1]:
            raise DimensionMismatch(f"groups cover {self.groups.n} coordinates, A has {a.shape[1]} columns")
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise ValueError("penalty weights must be nonnegative")
        if self.flavor not in FLAVORS:
            raise ValueError(f"Unknown flavor '{self.flavor}'. Available: {list(FLAVORS)}")
        if self.flavor == "gl" and self.gamma2 != 0:
            raise ValueError("group Lasso takes no l1 weight")
        if self.flavor in ("gl", "sgl") and not self.groups.disjoint:
            raise ValueError(f"flavor {self.flavor} requires disjoint groups")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.a_matrix.shape


@dataclass(frozen=True)
class LogisticProblem:
    """Sparse-group logistic regression data; the intercept is the last variable."""
    a_rows: np.ndarray
    labels: np.ndarray
    groups: GroupStructure
    gamma1: float
    gamma2: float
    _augmented: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        a = np.asarray(self.a_rows, dtype=float)
        labels = np.asarray(self.labels, dtype=float)
        object.__setattr__(self, "a_rows", a)
        object.__setattr__(self, "labels", labels)
        if a.ndim != 2 or a.shape[1] < 1:
            raise DimensionMismatch(f"feature matrix must be 2-D with at least one column, got {a.shape}")
        if labels.shape != (a.shape[0],):
            raise DimensionMismatch(f"labels have shape {labels.shape}, expected ({a.shape[0]},)")
        if not np.all(np.abs(labels) == 1):
            raise ValueError("labels must all be -1 or +1")
        if a.shape[0] < 2 or not (np.any(labels > 0) and np.any(labels < 0)):
            raise ValueError("need at least one sample of each label")
        if self.groups.n != a.shape[1]:
            raise DimensionMismatch(f"groups cover {self.groups.n} coordinates, A has {a.shape[1]} columns")
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise ValueError("penalty weights must be nonnegative")
        object.__setattr__(self, "_augmented", np.hstack([a, np.ones((a.shape[0], 1))]))

    @property
    def m(self) -> int:
        return self.a_rows.shape[0]

    @property
    def n(self) -> int:
        return self.a_rows.shape[1]

    @property
    def augmented(self) -> np.ndarray:
        """[A | 1], the design matrix acting on (x; intercept)."""
        return self._augmented


@dataclass(frozen=True)
class SpectralBounds:
    mu: float
    lipschitz: float
    iters_used: int
    residual: float
    converged: bool = True


# -- Spectral estimation --

START_SEED = 0


def _start_vectors(n: int):
    """The normalized all-ones vector and a fixed-seed Gaussian vector.

    The all-ones vector is an eigenvector of any Gram matrix with constant
    row sums; the Gaussian start has a component along every eigenvector.
    """
    ones = np.full(n, 1.0 / np.sqrt(n))
    g = np.random.default_rng(START_SEED).standard_normal(n)
    return ones, g / np.linalg.norm(g)


def _power_iteration(apply, v: np.ndarray, scale: Optional[float], tol: float, max_iters: int):
    """Largest eigenvalue of a symmetric PSD operator, starting from the unit vector v.

    Stops when successive Rayleigh quotients differ by at most tol and the
    eigen-residual ||G v - lambda v|| is at most sqrt(tol), both relative to
    scale (or the estimate). Returns (estimate, iterations, residual, converged).
    """
    previous = None
    estimate, residual = 0.0, np.inf
    for k in range(1, max_iters + 1):
        w = apply(v)
        estimate = float(v @ w)
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0, k, 0.0, True
        if previous is not None:
            reference = scale if scale is not None else abs(estimate)
            if reference <= 0:
                return estimate, k, 0.0, True
            residual = abs(estimate - previous) / reference
            eigen_residual = float(np.linalg.norm(w - estimate * v)) / reference
            if residual <= tol and eigen_residual <= np.sqrt(tol):
                return estimate, k, residual, True
        previous = estimate
        v = w / norm
    return estimate, max_iters, residual, False


def _top_eigenvalue(apply, n: int, scale: Optional[float], tol: float, max_iters: int):
    """Power iteration from both start vectors; the larger estimate wins."""
    runs = [_power_iteration(apply, v, scale, tol, max_iters) for v in _start_vectors(n)]
    return (
        max(r[0] for r in runs),
        sum(r[1] for r in runs),
        max(r[2] for r in runs),
        all(r[3] for r in runs),
    )


def largest_eigenvalue(a_matrix: np.ndarray, tol: Optional[float] = None,
                       max_iters: Optional[int] = None) -> float:
    """lambda_max(A^T A) by power iteration."""
    tol = Config.SPECTRAL_TOLERANCE if tol is None else tol
    max_iters = Config.SPECTRAL_MAX_ITERS if max_iters is None else max_iters
    a = np.asarray(a_matrix, dtype=float)
    if not np.any(a):
        raise ZeroMatrix("matrix has no nonzero entry")
    gram = a.T @ a
    value, iters, residual, ok = _top_eigenvalue(lambda v: gram @ v, a.shape[1], None, tol, max_iters)
    if not ok:
        logger.warning(f"Power iteration not converged after {iters} iterations (residual {residual:.3e})")
    return value


def estimate_spectral_bounds(a_matrix: np.ndarray, tol: Optional[float] = None,
                             max_iters: Optional[int] = None, strict: bool = False) -> SpectralBounds:
    """Estimate lambda_min and lambda_max of A^T A.

    lambda_max comes from power iteration on A^T A, lambda_min from power
    iteration on lambda_max I - A^T A. Each runs from two start vectors and
    keeps the larger estimate. A run stops when successive
    Rayleigh quotients differ by at most tol * lambda_max and the
    eigen-residual is at most sqrt(tol) * lambda_max.

    Args:
        a_matrix: Dense m x n matrix.
        tol: Relative tolerance (defaults to CFKIT_SPECTRAL_TOLERANCE).
        max_iters: Cap for each of the two power iterations.
        strict: Raise NotConverged instead of returning flagged bounds.

    Returns:
        SpectralBounds with mu = lambda_min and lipschitz = lambda_max.
    """
    tol = Config.SPECTRAL_TOLERANCE if tol is None else tol
    max_iters = Config.SPECTRAL_MAX_ITERS if max_iters is None else max_iters
    if tol <= 0 or max_iters < 1:
        raise ValueError("tolerance must be positive and max_iters at least 1")
    a = np.asarray(a_matrix, dtype=float)
    if a.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.any(a):
        raise ZeroMatrix("matrix has no nonzero entry")
    m, n = a.shape
    if m < n:
        logger.warning(f"A is {m}x{n} with m < n; lambda_min(A^T A) is zero")

    gram = a.T @ a
    top, it_top, res_top, ok_top = _top_eigenvalue(lambda v: gram @ v, n, None, tol, max_iters)
    shifted, it_low, res_low, ok_low = _top_eigenvalue(
        lambda v: top * v - gram @ v, n, top, tol, max_iters
    )
    mu = min(max(top - shifted, 0.0), top)
    bounds = SpectralBounds(mu, top, it_top + it_low, max(res_top, res_low), ok_top and ok_low)
    logger.info(f"Spectral bounds for {m}x{n} A: mu={mu:.6g}, L={top:.6g} ({bounds.iters_used} iterations)")
    if not bounds.converged:
        if strict:
            raise NotConverged(bounds)
        logger.warning(f"Spectral estimate not converged (residual {bounds.residual:.3e})")
    return bounds


# -- Lasso --

def _check_vector(name: str, v: np.ndarray, n: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (n,):
        raise DimensionMismatch(f"{name} has shape {v.shape}, expected ({n},)")
    return v


def lasso_gradient_point(p: LassoProblem, y: np.ndarray, lipschitz: float) -> np.ndarray:
    """y - (1/L) A^T (A y - b)."""
    y = _check_vector("y", y, p.shape[1])
    if not lipschitz > 0:
        raise ValueError(f"L must be positive, got {lipschitz}")
    return y - (p.a_matrix.T @ (p.a_matrix @ y - p.b)) / lipschitz


def lasso_objective(p: LassoProblem, x: np.ndarray) -> float:
    x = _check_vector("x", x, p.shape[1])
    r = p.a_matrix @ x - p.b
    group_part = sum(float(np.linalg.norm(x[list(g)])) for g in p.groups.groups)
    return 0.5 * float(r @ r) + p.gamma1 * group_part + p.gamma2 * float(np.sum(np.abs(x)))


class LassoOracle(CompositeOracle):
    """Least-squares smooth part.

    The identity view takes B = id, H(x) = 1/2||Ax - b||^2 with
    mu = lambda_min, L = lambda_max. The composite view takes B = A,
    H(u) = 1/2||u - b||^2 with mu = L = 1, tau = lambda_min, r = lambda_max.
    """

    def __init__(self, a_matrix: np.ndarray, b: np.ndarray, mu: float, lipschitz: float,
                 view: str = "identity"):
        if view not in VIEWS:
            raise ValueError(f"Unknown view '{view}'. Available: {list(VIEWS)}")
        self.a_matrix = np.asarray(a_matrix, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.view = view
        if view == "identity":
            self._constants = CompositeConstants(mu=mu, lipschitz=lipschitz)
        else:
            self._constants = CompositeConstants(mu=1.0, lipschitz=1.0, tau=mu, r=lipschitz)

    @property
    def constants(self) -> CompositeConstants:
        return self._constants

    @property
    def dim(self) -> int:
        return self.a_matrix.shape[1]

    def value(self, x: np.ndarray) -> float:
        r = self.a_matrix @ x - self.b
        return 0.5 * float(r @ r)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        if x.shape != (self.dim,):
            raise DimensionMismatch(f"x has shape {x.shape}, expected ({self.dim},)")
        return self.a_matrix.T @ (self.a_matrix @ x - self.b)


def lasso_constants(a_matrix: np.ndarray, mu: Optional[float], lipschitz: Optional[float]) -> Tuple[float, float]:
    if mu is None or lipschitz is None:
        bounds = estimate_spectral_bounds(a_matrix)
        mu = bounds.mu if mu is None else mu
        lipschitz = bounds.lipschitz if lipschitz is None else lipschitz
    if mu <= RANK_TOLERANCE * lipschitz:
        raise ConditionViolated("mu>0", f"lambda_min(A^T A)={mu:.3e} (A is rank deficient)")
    return mu, lipschitz


def lasso_penalty(p: LassoProblem, flavor: Optional[str] = None) -> Penalty:
    return get_penalty(flavor or p.flavor, p.groups, p.gamma1, p.gamma2)


def _solve_lasso(p: LassoProblem, flavor: str, cfg: Optional[SolverConfig], mu: Optional[float],
                 lipschitz: Optional[float], view: str) -> SolveResult:
    penalty = lasso_penalty(p, flavor)
    mu, lipschitz = lasso_constants(p.a_matrix, mu, lipschitz)
    oracle = LassoOracle(p.a_matrix, p.b, mu, lipschitz, view)
    logger.info(f"Solving {flavor.upper()} ({p.shape[0]}x{p.shape[1]}, {len(p.groups)} groups)")
    return solve(oracle, penalty, np.zeros(p.shape[1]), cfg=cfg)


def solve_gl(p: LassoProblem, cfg: Optional[SolverConfig] = None, mu: Optional[float] = None,
             lipschitz: Optional[float] = None, view: str = "identity") -> SolveResult:
    """Group Lasso by C-FISTA. The solution is result.state.x."""
    return _solve_lasso(p, "gl", cfg, mu, lipschitz, view)


def solve_sgl(p: LassoProblem, cfg: Optional[SolverConfig] = None, mu: Optional[float] = None,
              lipschitz: Optional[float] = None, view: str = "identity") -> SolveResult:
    """Sparse-group Lasso by C-FISTA with the closed-form sparse-group prox."""
    return _solve_lasso(p, "sgl", cfg, mu, lipschitz, view)


def solve_osgl(p: LassoProblem, cfg: Optional[SolverConfig] = None, mu: Optional[float] = None,
               lipschitz: Optional[float] = None, view: str = "identity") -> SolveResult:
    """Overlapping sparse-group Lasso; every prox call runs the dual inner solver."""
    return _solve_lasso(p, "osgl", cfg, mu, lipschitz, view)


def solve_constrained_lasso(a_matrix: np.ndarray, b: np.ndarray, gamma: float, lower, upper,
                            cfg: Optional[SolverConfig] = None, mu: Optional[float] = None,
                            lipschitz: Optional[float] = None) -> SolveResult:
    """l1-penalized least squares restricted to lower <= x <= upper."""
    a = np.asarray(a_matrix, dtype=float)
    b = _check_vector("b", b, a.shape[0])
    penalty = BoxL1Penalty(gamma, lower, upper)
    mu, lipschitz = lasso_constants(a, mu, lipschitz)
    oracle = LassoOracle(a, b, mu, lipschitz)
    x0 = np.clip(np.zeros(a.shape[1]), lower, upper)
    # The prox validates the box on its first call; check it before iterating
    penalty.prox(x0, 0.0)
    return solve(oracle, penalty, x0, cfg=cfg)


# -- Sparse-group logistic regression --

def _split_margins(p: LogisticProblem, y_aug: np.ndarray) -> np.ndarray:
    y_aug = _check_vector("y_aug", y_aug, p.n + 1)
    return p.labels * (p.augmented @ y_aug)


def logistic_loss(p: LogisticProblem, y_aug: np.ndarray) -> float:
    """(1/m) sum_i log(1 + exp(-y_i (a_i^T x + b)))."""
    return float(np.mean(np.logaddexp(0.0, -_split_margins(p, y_aug))))


def logistic_gradient(p: LogisticProblem, y_aug: np.ndarray) -> np.ndarray:
    """Gradient of the averaged logistic loss with respect to (x; b)."""
    weights = p.labels * expit(-_split_margins(p, y_aug))
    return -(p.augmented.T @ weights) / p.m


def sglr_gradient_point(p: LogisticProblem, y_aug: np.ndarray, lipschitz: float) -> np.ndarray:
    """y_aug - (1/L) grad of the averaged logistic loss."""
    if not lipschitz > 0:
        raise ValueError(f"L must be positive, got {lipschitz}")
    y_aug = np.asarray(y_aug, dtype=float)
    return y_aug - logistic_gradient(p, y_aug) / lipschitz


def sglr_intercept_update(p: LogisticProblem, y_aug: np.ndarray, lipschitz: float) -> float:
    """Intercept component of sglr_gradient_point; b is never penalized."""
    return float(sglr_gradient_point(p, y_aug, lipschitz)[-1])


def sglr_objective(p: LogisticProblem, y_aug: np.ndarray) -> float:
    return logistic_loss(p, y_aug) + sglr_penalty(p).value(np.asarray(y_aug, dtype=float))


def sglr_penalty(p: LogisticProblem) -> Penalty:
    if p.groups.disjoint:
        inner = SparseGroupPenalty(p.groups, p.gamma1, p.gamma2)
    else:
        inner = OverlappingSparseGroupPenalty(p.groups, p.gamma1, p.gamma2)
    return PartialPenalty(inner, p.n)


def sglr_default_lipschitz(p: LogisticProblem) -> float:
    """lambda_max([A | 1]^T [A | 1]) / (4m), a global bound on the loss Hessian."""
    return largest_eigenvalue(p.augmented) / (4.0 * p.m)


class LogisticOracle(CompositeOracle):
    def __init__(self, problem: LogisticProblem, mu: float, lipschitz: float):
        self.problem = problem
        self._constants = CompositeConstants(mu=mu, lipschitz=lipschitz)

    @property
    def constants(self) -> CompositeConstants:
        return self._constants

    @property
    def dim(self) -> int:
        return self.problem.n + 1

    def value(self, x: np.ndarray) -> float:
        return logistic_loss(self.problem, x)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return logistic_gradient(self.problem, x)


def sglr_constants(p: LogisticProblem, mu: Optional[float] = None,
                   lipschitz: Optional[float] = None) -> Tuple[float, float]:
    """Fill in missing SGLR constants; a defaulted mu is logged as a warning."""
    if lipschitz is None:
        lipschitz = sglr_default_lipschitz(p)
    if mu is None:
        mu = Config.SGLR_MU_FACTOR * lipschitz
        logger.warning(
            f"No strong convexity modulus given for SGLR; using mu={mu:.3e} "
            f"({Config.SGLR_MU_FACTOR:g} * L). The logistic loss is not globally strongly convex."
        )
    return mu, lipschitz


def solve_sglr(p: LogisticProblem, mu: Optional[float] = None, lipschitz: Optional[float] = None,
               cfg: Optional[SolverConfig] = None) -> SolveResult:
    """Sparse-group logistic regression by C-FISTA.

    result.state.x holds (x; b): coefficients then the intercept.
    """
    mu, lipschitz = sglr_constants(p, mu, lipschitz)
    oracle = LogisticOracle(p, mu, lipschitz)
    logger.info(f"Solving SGLR ({p.m} samples, {p.n} features, {len(p.groups)} groups)")
    return solve(oracle, sglr_penalty(p), np.zeros(p.n + 1), cfg=cfg)
