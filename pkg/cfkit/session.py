"""
Solve session facade for cfkit.

Turns a Dataset plus command-line style options into an oracle/penalty
pair and runs C-FISTA or a baseline on it, computes reference optima and
replays certificate checks.
"""

import json
import logging
import os
from dataclasses import asdict, dataclass, replace
from typing import Optional

import numpy as np

from cfkit.baselines import solve_fista, solve_ista
from cfkit.config import Config
from cfkit.data import Dataset, read_vector, write_array, write_atomic
from cfkit.engine import (
    CertificateReport,
    CompositeConstants,
    SolveResult,
    SolverConfig,
    StepParameters,
    apply_overrides,
    check_certificate,
    compute_parameters,
    objective,
    solve,
)
from cfkit.errors import CorruptFile, MaxItersExceeded
from cfkit.models import (
    FLAVORS,
    LassoOracle,
    LassoProblem,
    LogisticOracle,
    LogisticProblem,
    lasso_constants,
    lasso_penalty,
    sglr_constants,
    sglr_penalty,
)

logger = logging.getLogger(__name__)

ALGORITHMS = {
    "cfista": lambda oracle, penalty, x0, cfg: solve(oracle, penalty, x0, cfg=cfg),
    "ista": solve_ista,
    "fista": solve_fista,
}

REFERENCE_FILE = "reference.json"
SOLUTION_FILE = "x_star.f64"


@dataclass
class ReferenceSolution:
    """Best known optimum of one (dataset, flavor, penalty weights) problem."""
    objective: float
    x: np.ndarray
    flavor: str
    gamma1: float
    gamma2: float
    iterations: int
    residual: float
    status: str


def infer_flavor(dataset: Dataset, flavor: Optional[str] = None, gamma2: Optional[float] = None) -> str:
    """Model flavor from the dataset and options.

    Logistic data is always sglr. For Lasso data an explicit flavor wins;
    otherwise overlapping groups give osgl, a positive gamma2 gives sgl and
    anything else gl.
    """
    if dataset.model == "logistic":
        if flavor not in (None, "sglr"):
            raise ValueError(f"flavor '{flavor}' does not apply to logistic data")
        return "sglr"
    if flavor is not None:
        if flavor not in FLAVORS:
            raise ValueError(f"Unknown flavor '{flavor}'. Available: {list(FLAVORS)}")
        return flavor
    if not dataset.groups.disjoint:
        return "osgl"
    if gamma2:
        return "sgl"
    return "gl"


class SolveSession:
    """One problem instance, ready to be solved by any of the algorithms."""

    def __init__(
        self,
        dataset: Dataset,
        algorithm: str = "cfista",
        flavor: Optional[str] = None,
        gamma1: Optional[float] = None,
        gamma2: Optional[float] = None,
        mu: Optional[float] = None,
        lipschitz: Optional[float] = None,
        config: Optional[SolverConfig] = None,
        view: str = "identity",
    ):
        """Initialize a session.

        Args:
            dataset: Loaded or generated dataset.
            algorithm: cfista, ista or fista.
            flavor: gl, sgl or osgl for Lasso data; inferred when None.
            gamma1: Group weight; the dataset default when None.
            gamma2: l1 weight; the dataset default when None.
            mu: Strong convexity modulus; estimated (Lasso) or defaulted (SGLR) when None.
            lipschitz: Gradient Lipschitz constant; estimated when None.
            config: Stopping options for run().
            view: identity or composite constants for Lasso.
        """
        if algorithm not in ALGORITHMS:
            raise ValueError(f"Unknown algorithm '{algorithm}'. Available: {list(ALGORITHMS.keys())}")
        self.dataset = dataset
        self.algorithm = algorithm
        self.config = config or SolverConfig()
        self.flavor = infer_flavor(dataset, flavor, gamma2)

        default1, default2 = dataset.gamma_defaults(self.flavor)
        self.gamma1 = default1 if gamma1 is None else gamma1
        self.gamma2 = default2 if gamma2 is None else gamma2
        if self.flavor == "gl" and gamma2 is None:
            self.gamma2 = 0.0
        logger.info(f"Session: flavor={self.flavor}, gamma1={self.gamma1:g}, gamma2={self.gamma2:g}, algorithm={algorithm}")

        if self.flavor == "sglr":
            self.problem = LogisticProblem(dataset.a_matrix, dataset.response, dataset.groups, self.gamma1, self.gamma2)
            self.mu, self.lipschitz = sglr_constants(self.problem, mu, lipschitz)
            self.oracle = LogisticOracle(self.problem, self.mu, self.lipschitz)
            self.penalty = sglr_penalty(self.problem)
        else:
            self.problem = LassoProblem(
                dataset.a_matrix, dataset.response, dataset.groups, self.gamma1, self.gamma2, self.flavor
            )
            self.mu, self.lipschitz = lasso_constants(dataset.a_matrix, mu, lipschitz)
            self.oracle = LassoOracle(dataset.a_matrix, dataset.response, self.mu, self.lipschitz, view)
            self.penalty = lasso_penalty(self.problem)

    @property
    def constants(self) -> CompositeConstants:
        return self.oracle.constants

    @property
    def parameters(self) -> StepParameters:
        return apply_overrides(compute_parameters(self.constants), self.config)

    def initial_point(self) -> np.ndarray:
        return np.zeros(self.oracle.dim)

    def objective(self, x: np.ndarray) -> float:
        return objective(self.oracle, self.penalty, x)

    def run(self) -> SolveResult:
        return ALGORITHMS[self.algorithm](self.oracle, self.penalty, self.initial_point(), self.config)

    def reference(self, tolerance: Optional[float] = None, max_iters: Optional[int] = None) -> ReferenceSolution:
        """C-FISTA at the reference tolerance.

        A run that stalls at machine precision is accepted when its residual
        is at most CFKIT_STALL_ACCEPT; otherwise MaxItersExceeded is raised.
        """
        cfg = SolverConfig(
            max_iters=max_iters or Config.REFERENCE_MAX_ITERS,
            tolerance=Config.REFERENCE_TOLERANCE if tolerance is None else tolerance,
            record_trace=False,
            stall_window=Config.STALL_WINDOW,
        )
        result = solve(self.oracle, self.penalty, self.initial_point(), cfg=cfg)
        if not (result.converged or (result.status == "stalled" and result.residual <= Config.STALL_ACCEPT)):
            raise MaxItersExceeded(result)
        return ReferenceSolution(
            objective=result.final_objective,
            x=result.state.x,
            flavor=self.flavor,
            gamma1=self.gamma1,
            gamma2=self.gamma2,
            iterations=result.iterations,
            residual=result.residual,
            status=result.status,
        )

    def certify(self, x_star: np.ndarray, f_star: float, theta_scale: float = 1.0,
                max_iters: Optional[int] = None) -> CertificateReport:
        """Replay C-FISTA from the initial point and test the Lyapunov certificate.

        theta_scale multiplies the theta actually run; the inequalities are
        checked against that theta.
        """
        params = self.parameters
        if theta_scale != 1.0:
            params = replace(params, theta=params.theta * theta_scale)
            logger.warning(f"Certificate replay with theta scaled by {theta_scale:g} to {params.theta:.6g}")
        x_star = np.asarray(x_star, dtype=float)
        if x_star.shape != (self.oracle.dim,):
            raise CorruptFile(f"reference solution has shape {x_star.shape}, expected ({self.oracle.dim},)")
        return check_certificate(
            self.oracle, self.penalty, self.initial_point(), None, x_star, f_star, params,
            max_iters=max_iters or self.config.max_iters, tolerance=self.config.tolerance,
        )


def save_reference(ref: ReferenceSolution, directory: str):
    os.makedirs(directory, exist_ok=True)
    write_array(os.path.join(directory, SOLUTION_FILE), ref.x)
    record = {k: v for k, v in asdict(ref).items() if k != "x"}
    write_atomic(os.path.join(directory, REFERENCE_FILE), (json.dumps(record, indent=2) + "\n").encode("utf-8"))
    logger.info(f"Saved reference optimum {ref.objective!r} to {directory}")


def load_reference(directory: str) -> ReferenceSolution:
    try:
        with open(os.path.join(directory, REFERENCE_FILE), encoding="utf-8") as f:
            record = json.load(f)
        return ReferenceSolution(x=read_vector(os.path.join(directory, SOLUTION_FILE)), **record)
    except (json.JSONDecodeError, TypeError) as e:
        raise CorruptFile(f"{directory} does not hold a valid reference: {e}")
