"""
Reference first-order methods: ISTA and FISTA with the standard momentum sequence.

Both use step 1/(rL) from the oracle's constants and report through the
same SolveResult/trace format and stopping rule as C-FISTA.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np

from cfkit.engine import (
    CompositeOracle,
    SolveResult,
    SolverConfig,
    SolverState,
    StepParameters,
    check_finite,
    objective,
    run_iterations,
)
from cfkit.penalties import Penalty

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MomentumState:
    x: np.ndarray
    x_prev: np.ndarray
    t: float = 1.0

    def __post_init__(self):
        if self.t < 1:
            raise ValueError(f"momentum parameter must be at least 1, got {self.t}")


def _forward_backward(y: np.ndarray, oracle: CompositeOracle, penalty: Penalty, lipschitz: float) -> np.ndarray:
    g = oracle.gradient(y)
    check_finite("oracle gradient", g)
    x = penalty.prox(y - g / lipschitz, 1.0 / lipschitz)
    check_finite("prox", x)
    return x


def ista_step(x: np.ndarray, oracle: CompositeOracle, penalty: Penalty, lipschitz: float) -> np.ndarray:
    """prox_{R/L}(x - g(x)/L)."""
    if not lipschitz > 0:
        raise ValueError(f"L must be positive, got {lipschitz}")
    return _forward_backward(np.asarray(x, dtype=float), oracle, penalty, lipschitz)


def _extrapolate(s: MomentumState) -> Tuple[np.ndarray, float]:
    t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * s.t * s.t))
    return s.x + ((s.t - 1.0) / t_next) * (s.x - s.x_prev), t_next


def fista_step(s: MomentumState, oracle: CompositeOracle, penalty: Penalty, lipschitz: float) -> MomentumState:
    if not lipschitz > 0:
        raise ValueError(f"L must be positive, got {lipschitz}")
    y, t_next = _extrapolate(s)
    return MomentumState(_forward_backward(y, oracle, penalty, lipschitz), s.x, t_next)


def _baseline_params(oracle: CompositeOracle) -> StepParameters:
    c = oracle.constants
    if not c.r * c.lipschitz > 0:
        raise ValueError(f"L must be positive, got {c.lipschitz}")
    # theta/alpha/C have no meaning here; only the step is used
    return StepParameters(theta=0.0, alpha=1.0, big_c=0.0, step=1.0 / (c.r * c.lipschitz))


def _ista_iterates(oracle, penalty, lipschitz, x0) -> Iterator[Tuple[SolverState, np.ndarray, float]]:
    x = np.array(x0, dtype=float)
    k = 0
    while True:
        x_new = _forward_backward(x, oracle, penalty, lipschitz)
        k += 1
        yield SolverState(x_new, x_new, k), x, float(np.linalg.norm(x_new - x))
        x = x_new


def _fista_iterates(oracle, penalty, lipschitz, x0) -> Iterator[Tuple[SolverState, np.ndarray, float]]:
    x = np.array(x0, dtype=float)
    s = MomentumState(x, x.copy(), 1.0)
    k = 0
    while True:
        y, t_next = _extrapolate(s)
        x_new = _forward_backward(y, oracle, penalty, lipschitz)
        s = MomentumState(x_new, s.x, t_next)
        k += 1
        yield SolverState(x_new, s.x_prev, k), y, float(np.linalg.norm(x_new - y))


def solve_ista(oracle: CompositeOracle, penalty: Penalty, x0: np.ndarray,
               cfg: Optional[SolverConfig] = None) -> SolveResult:
    cfg = cfg or SolverConfig()
    params = _baseline_params(oracle)
    logger.info(f"ISTA start: n={oracle.dim}, step={params.step:.6g}")
    return run_iterations(
        _ista_iterates(oracle, penalty, 1.0 / params.step, x0),
        lambda x: objective(oracle, penalty, x),
        params, cfg, np.asarray(x0, dtype=float), label="ISTA",
    )


def solve_fista(oracle: CompositeOracle, penalty: Penalty, x0: np.ndarray,
                cfg: Optional[SolverConfig] = None) -> SolveResult:
    """FISTA without strong-convexity information (t_1 = 1, no restart)."""
    cfg = cfg or SolverConfig()
    params = _baseline_params(oracle)
    logger.info(f"FISTA start: n={oracle.dim}, step={params.step:.6g}")
    return run_iterations(
        _fista_iterates(oracle, penalty, 1.0 / params.step, x0),
        lambda x: objective(oracle, penalty, x),
        params, cfg, np.asarray(x0, dtype=float), label="FISTA",
    )

