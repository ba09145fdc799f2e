"""
Accelerated composite proximal-gradient engine.

Minimizes F(x) = H(B(x)) + R(x) with three sequences (x, y, z):

    y    = x/(1+theta) + theta z/(1+theta)
    x+   = Prox_{R/(rL)}(y - g(y)/(rL))          g(y) = J_B(y)^T grad H(B(y))
    z+   = (1-theta) z + theta y + alpha (x+ - y)

With theta, alpha and C derived from (mu, L, tau, r, xi) the quantity
F(x) - F* + C||z - x*||^2 contracts by (1 - theta) every iteration.
"""

import logging
import math
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Iterator, List, Optional, Tuple

import numpy as np

from cfkit.config import Config
from cfkit.errors import (
    ConditionViolated,
    DimensionMismatch,
    MaxItersExceeded,
    NonFiniteValue,
    NonPositiveScale,
)
from cfkit.penalties import Penalty

logger = logging.getLogger(__name__)

CONTRACTION_SLACK = 1e-8

STATUS_CONVERGED = "converged"
STATUS_STALLED = "stalled"
STATUS_MAX_ITERS = "max_iters"


@dataclass(frozen=True)
class CompositeConstants:
    """Curvature constants of H and B."""
    mu: float
    lipschitz: float
    tau: float = 1.0
    r: float = 1.0
    xi: float = 0.0


@dataclass(frozen=True)
class StepParameters:
    theta: float
    alpha: float
    big_c: float
    step: float


@dataclass(frozen=True)
class SolverState:
    x: np.ndarray
    z: np.ndarray
    k: int = 0


@dataclass(frozen=True)
class IterationRecord:
    k: int
    objective: float
    step_norm: float
    elapsed: float  # milliseconds since the solve started


@dataclass(frozen=True)
class SolverConfig:
    """Stopping and recording options shared by C-FISTA and the baselines.

    The solve stops when rL * ||x^{k+1} - y^k|| <= tolerance. theta and
    alpha, when given, override the derived parameters. stall_window > 0
    ends the solve once the best residual has not improved for that many
    iterations.
    """
    max_iters: int = field(default_factory=lambda: Config.MAX_ITERS)
    tolerance: float = field(default_factory=lambda: Config.TOLERANCE)
    record_trace: bool = True
    theta: Optional[float] = None
    alpha: Optional[float] = None
    stall_window: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")
        if self.tolerance < 0:
            raise ValueError(f"tolerance must be nonnegative, got {self.tolerance}")
        if self.stall_window < 0:
            raise ValueError(f"stall_window must be nonnegative, got {self.stall_window}")


class CompositeOracle(ABC):
    """Smooth part H(B(x)) of a composite problem."""

    @property
    @abstractmethod
    def constants(self) -> CompositeConstants:
        ...

    @property
    @abstractmethod
    def dim(self) -> int:
        """Dimension n of the decision variable."""
        ...

    @abstractmethod
    def value(self, x: np.ndarray) -> float:
        """Return H(B(x))."""
        ...

    @abstractmethod
    def gradient(self, x: np.ndarray) -> np.ndarray:
        """Return the pulled-back gradient J_B(x)^T grad H(B(x))."""
        ...


@dataclass
class SolveResult:
    """Outcome of a solve: final state, trace and how it ended."""
    state: SolverState
    trace: List[IterationRecord]
    params: StepParameters
    status: str
    residual: float
    initial_objective: float
    final_objective: float
    wall_time: float  # seconds

    @property
    def iterations(self) -> int:
        return self.state.k

    @property
    def converged(self) -> bool:
        return self.status == STATUS_CONVERGED

    def raise_for_status(self) -> "SolveResult":
        if self.status == STATUS_MAX_ITERS:
            raise MaxItersExceeded(self)
        return self


def validate_constants(c: CompositeConstants) -> None:
    """Raise ConditionViolated unless 0<mu<=L, 0<tau<=r, xi>=0 and tau*mu-xi>0."""
    checks = (
        ("mu>0", c.mu > 0),
        ("mu<=L", c.mu <= c.lipschitz),
        ("tau>0", c.tau > 0),
        ("tau<=r", c.tau <= c.r),
        ("xi>=0", c.xi >= 0),
        ("tau*mu-xi>0", c.tau * c.mu - c.xi > 0),
    )
    for which, ok in checks:
        if not ok:
            raise ConditionViolated(which, f"{c}")


def compute_parameters(c: CompositeConstants) -> StepParameters:
    validate_constants(c)
    low = c.tau * c.mu - c.xi
    rl = c.r * c.lipschitz
    high = rl - c.xi
    return StepParameters(
        theta=math.sqrt(low * high) / rl,
        alpha=math.sqrt(high / low),
        big_c=low / 2.0,
        step=1.0 / rl,
    )


def homogeneous_rescale(lam: float, c: CompositeConstants) -> CompositeConstants:
    """Constants after substituting x' = lam^(1/d1) x for a degree-d1 homogeneous B.

    tau scales by lam^2 and xi by lam; mu, L and r are unchanged.
    """
    if not lam > 0:
        raise NonPositiveScale(f"scale must be positive, got {lam}")
    return replace(c, tau=lam * lam * c.tau, xi=lam * c.xi)


def apply_overrides(params: StepParameters, cfg: Optional[SolverConfig]) -> StepParameters:
    """Replace theta and alpha with the configured values, warning when either is set."""
    if cfg is None or (cfg.theta is None and cfg.alpha is None):
        return params
    theta = params.theta if cfg.theta is None else cfg.theta
    alpha = params.alpha if cfg.alpha is None else cfg.alpha
    logger.warning(f"Overriding derived parameters: theta={theta:.6g}, alpha={alpha:.6g}")
    return replace(params, theta=theta, alpha=alpha)


def check_finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"{name} returned a non-finite entry")


def _advance(state: SolverState, oracle: CompositeOracle, penalty: Penalty,
             p: StepParameters) -> Tuple[SolverState, np.ndarray]:
    x, z = state.x, state.z
    if x.shape != z.shape or x.shape != (oracle.dim,):
        raise DimensionMismatch(f"x {x.shape}, z {z.shape}, oracle expects ({oracle.dim},)")
    theta = p.theta
    y = x + (theta / (1.0 + theta)) * (z - x)
    g = oracle.gradient(y)
    check_finite("oracle gradient", g)
    x_new = penalty.prox(y - p.step * g, p.step)
    check_finite("prox", x_new)
    z_new = (1.0 - theta) * z + theta * y + p.alpha * (x_new - y)
    return SolverState(x_new, z_new, state.k + 1), y


def step(state: SolverState, oracle: CompositeOracle, penalty: Penalty,
         p: StepParameters) -> SolverState:
    """One C-FISTA iteration (y, x and z updates)."""
    return _advance(state, oracle, penalty, p)[0]


def iterate(oracle: CompositeOracle, penalty: Penalty, p: StepParameters,
            x0: np.ndarray, z0: Optional[np.ndarray] = None) -> Iterator[Tuple[SolverState, np.ndarray, float]]:
    """Yield (state, y, ||x^{k+1} - y^k||) after every step, without end."""
    x = np.array(x0, dtype=float)
    z = x.copy() if z0 is None else np.array(z0, dtype=float)
    state = SolverState(x, z, 0)
    while True:
        state, y = _advance(state, oracle, penalty, p)
        yield state, y, float(np.linalg.norm(state.x - y))


def objective(oracle: CompositeOracle, penalty: Penalty, x: np.ndarray) -> float:
    """F(x) = H(B(x)) + R(x)."""
    return oracle.value(x) + penalty.value(x)


def solve(oracle: CompositeOracle, penalty: Penalty, x0: np.ndarray,
          z0: Optional[np.ndarray] = None, cfg: Optional[SolverConfig] = None) -> SolveResult:
    """Run C-FISTA until the gradient-mapping residual meets cfg.tolerance.

    Hitting max_iters is not an error: the result is flagged with status
    'max_iters' and raise_for_status() escalates it.
    """
    cfg = cfg or SolverConfig()
    params = apply_overrides(compute_parameters(oracle.constants), cfg)
    c = oracle.constants
    logger.info(
        f"C-FISTA start: n={oracle.dim}, mu={c.mu:.6g}, L={c.lipschitz:.6g}, tau={c.tau:.6g}, "
        f"r={c.r:.6g}, xi={c.xi:.6g}, theta={params.theta:.6g}"
    )
    return run_iterations(
        iterate(oracle, penalty, params, x0, z0),
        lambda x: objective(oracle, penalty, x),
        params, cfg, np.asarray(x0, dtype=float), label="C-FISTA",
    )


def run_iterations(steps, evaluate, params: StepParameters, cfg: SolverConfig,
                   x0: np.ndarray, label: str) -> SolveResult:
    """Drive an iterator of (state, y, step_norm) with the shared stopping rule.

    Shared by C-FISTA and the baselines so their traces line up.
    """
    start = time.perf_counter()
    initial = evaluate(x0)
    trace: List[IterationRecord] = []
    best, best_k = math.inf, 0
    status = STATUS_MAX_ITERS
    state, residual = None, math.inf
    for state, _, step_norm in steps:
        k = state.k
        residual = step_norm / params.step
        if cfg.record_trace:
            value = evaluate(state.x)
            if not math.isfinite(value):
                raise NonFiniteValue(f"objective is not finite at iteration {k}")
            trace.append(IterationRecord(k, value, step_norm, (time.perf_counter() - start) * 1000.0))
        if k % Config.LOG_EVERY == 0:
            logger.debug(f"{label} iteration {k}: residual {residual:.3e}")
        if residual <= cfg.tolerance:
            status = STATUS_CONVERGED
            break
        if residual < best:
            best, best_k = residual, k
        elif cfg.stall_window and k - best_k >= cfg.stall_window:
            status = STATUS_STALLED
            break
        if k >= cfg.max_iters:
            break

    final = trace[-1].objective if trace else evaluate(state.x)
    wall = time.perf_counter() - start
    if status == STATUS_MAX_ITERS:
        logger.warning(f"{label} stopped at max_iters={cfg.max_iters} with residual {residual:.3e}")
    else:
        logger.info(f"{label} {status} after {state.k} iterations: residual {residual:.3e}, objective {final:.12g}")
    return SolveResult(state, trace, params, status, residual, initial, final, wall)


def lyapunov(x: np.ndarray, z: np.ndarray, x_star: np.ndarray, f_x: float,
             f_star: float, big_c: float) -> float:
    """(f_x - f_star) + big_c * ||z - x_star||^2."""
    if f_x < f_star - 1e-10:
        logger.debug(f"Objective {f_x!r} below reference {f_star!r}; reference is not optimal")
    diff = np.asarray(z, dtype=float) - np.asarray(x_star, dtype=float)
    return (f_x - f_star) + big_c * float(diff @ diff)


@dataclass
class CertificateReport:
    """Per-iteration Lyapunov values and the first violations, if any."""
    theta: float
    lyapunov_values: List[float]
    gaps: List[float]
    contraction_violation: Optional[int] = None
    envelope_violation: Optional[int] = None

    @property
    def contraction_ok(self) -> bool:
        return self.contraction_violation is None

    @property
    def envelope_ok(self) -> bool:
        return self.envelope_violation is None

    @property
    def passed(self) -> bool:
        return self.contraction_ok and self.envelope_ok


def check_certificate(oracle: CompositeOracle, penalty: Penalty, x0: np.ndarray,
                      z0: Optional[np.ndarray], x_star: np.ndarray, f_star: float,
                      params: StepParameters, max_iters: int, tolerance: float = 0.0,
                      floor: Optional[float] = None) -> CertificateReport:
    """Replay a solve and test the per-step contraction and the geometric envelope.

    Both inequalities get the multiplicative slack (1 + 1e-8) plus an
    absolute floor that absorbs roundoff once the Lyapunov value reaches
    the precision of f_star.
    """
    if floor is None:
        floor = Config.CHECK_FLOOR * max(1.0, abs(f_star))
    x0 = np.asarray(x0, dtype=float)
    z0 = x0.copy() if z0 is None else np.asarray(z0, dtype=float)
    f0 = objective(oracle, penalty, x0)
    initial = lyapunov(x0, z0, x_star, f0, f_star, params.big_c)
    report = CertificateReport(params.theta, [initial], [f0 - f_star])
    rate = 1.0 - params.theta
    previous = initial
    for state, _, step_norm in iterate(oracle, penalty, params, x0, z0):
        k = state.k
        f_k = objective(oracle, penalty, state.x)
        current = lyapunov(state.x, state.z, x_star, f_k, f_star, params.big_c)
        report.lyapunov_values.append(current)
        report.gaps.append(f_k - f_star)
        if report.contraction_violation is None and \
                current > rate * previous * (1.0 + CONTRACTION_SLACK) + floor:
            report.contraction_violation = k
            logger.info(f"Contraction fails at iteration {k}: {current!r} > {rate!r} * {previous!r}")
        if report.envelope_violation is None and \
                f_k - f_star > rate ** k * initial * (1.0 + CONTRACTION_SLACK) + floor:
            report.envelope_violation = k
            logger.info(f"Envelope fails at iteration {k}")
        previous = current
        if k >= max_iters or step_norm / params.step <= tolerance:
            break
    return report
