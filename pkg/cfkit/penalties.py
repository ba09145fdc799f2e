"""
Pluggable regularizers for cfkit solvers.

A penalty knows its value R(x) and its proximal map Prox_{step R}; the
engine and the baselines never look past this interface.
"""

import logging
from abc import ABC, abstractmethod
from typing import Optional

import numpy as np

from cfkit.prox import (
    GroupStructure,
    prox_group_l2,
    prox_l1,
    prox_l1_box,
    prox_overlapping_sparse_group,
    prox_sparse_group,
)

logger = logging.getLogger(__name__)


class Penalty(ABC):
    """Abstract base class for the nonsmooth term R."""

    @abstractmethod
    def value(self, x: np.ndarray) -> float:
        """Return R(x)."""
        ...

    @abstractmethod
    def prox(self, v: np.ndarray, step: float) -> np.ndarray:
        """Return argmin_x 1/2||x - v||^2 + step * R(x).

        Args:
            v: Point after the forward (gradient) step.
            step: Step size the penalty weights are scaled by.

        Returns:
            The proximal point, same shape as v.
        """
        ...


class ZeroPenalty(Penalty):
    """R = 0; the prox is the identity."""

    def value(self, x: np.ndarray) -> float:
        return 0.0

    def prox(self, v: np.ndarray, step: float) -> np.ndarray:
        return np.array(v, dtype=float)


class L1Penalty(Penalty):
    def __init__(self, gamma: float):
        self.gamma = gamma

    def value(self, x: np.ndarray) -> float:
        return self.gamma * float(np.sum(np.abs(x)))

    def prox(self, v: np.ndarray, step: float) -> np.ndarray:
        return prox_l1(v, step * self.gamma)


class BoxL1Penalty(Penalty):
    """gamma ||x||_1 plus the indicator of lower <= x <= upper."""

    def __init__(self, gamma: float, lower, upper):
        self.gamma = gamma
        self.lower = lower
        self.upper = upper

    def value(self, x: np.ndarray) -> float:
        if np.any(x < self.lower) or np.any(x > self.upper):
            return np.inf
        return self.gamma * float(np.sum(np.abs(x)))

    def prox(self, v: np.ndarray, step: float) -> np.ndarray:
        return prox_l1_box(v, step * self.gamma, self.lower, self.upper)


class GroupL2Penalty(Penalty):
    """gamma sum_j ||x(j)|| over disjoint groups."""

    def __init__(self, groups: GroupStructure, gamma: float):
        if not groups.disjoint:
            raise ValueError("group Lasso penalty requires disjoint groups")
        self.groups = groups
        self.gamma = gamma

    def value(self, x: np.ndarray) -> float:
        return self.gamma * sum(float(np.linalg.norm(x[list(g)])) for g in self.groups.groups)

    def prox(self, v: np.ndarray, step: float) -> np.ndarray:
        out = np.array(v, dtype=float)
        for g in self.groups.groups:
            idx = list(g)
            out[idx] = prox_group_l2(v[idx], step * self.gamma)
        return out


class SparseGroupPenalty(Penalty):
    """gamma1 sum_j ||x(j)|| + gamma2 ||x||_1 over disjoint groups."""

    def __init__(self, groups: GroupStructure, gamma1: float, gamma2: float):
        if not groups.disjoint:
            raise ValueError("sparse-group penalty requires disjoint groups; use OverlappingSparseGroupPenalty")
        self.groups = groups
        self.gamma1 = gamma1
        self.gamma2 = gamma2

    def value(self, x: np.ndarray) -> float:
        group_part = sum(float(np.linalg.norm(x[list(g)])) for g in self.groups.groups)
        return self.gamma1 * group_part + self.gamma2 * float(np.sum(np.abs(x)))

    def prox(self, v: np.ndarray, step: float) -> np.ndarray:
        # Coordinates outside every group only see the l1 term
        out = prox_l1(v, step * self.gamma2)
        for g in self.groups.groups:
            idx = list(g)
            out[idx] = prox_sparse_group(v[idx], step * self.gamma1, step * self.gamma2)
        return out


class OverlappingSparseGroupPenalty(Penalty):
    """Sparse-group penalty whose groups may share coordinates.

    last_block holds the DualBlock of the most recent prox call. It is
    diagnostic only and the solvers never read it. A penalty shared between
    concurrent solves will see it overwritten. Use one instance per solve.
    """

    def __init__(self, groups: GroupStructure, gamma1: float, gamma2: float,
                 inner_tol: Optional[float] = None, max_inner: Optional[int] = None):
        self.groups = groups
        self.gamma1 = gamma1
        self.gamma2 = gamma2
        self.inner_tol = inner_tol
        self.max_inner = max_inner
        self.last_block = None

    def value(self, x: np.ndarray) -> float:
        group_part = sum(float(np.linalg.norm(x[list(g)])) for g in self.groups.groups)
        return self.gamma1 * group_part + self.gamma2 * float(np.sum(np.abs(x)))

    def prox(self, v: np.ndarray, step: float) -> np.ndarray:
        x, self.last_block = prox_overlapping_sparse_group(
            v, step * self.gamma1, step * self.gamma2, self.groups,
            tol=self.inner_tol, max_inner=self.max_inner,
        )
        return x


class PartialPenalty(Penalty):
    """Apply an inner penalty to the leading n_penalized coordinates only.

    Used for the logistic intercept, which is unregularized.
    """

    def __init__(self, inner: Penalty, n_penalized: int):
        self.inner = inner
        self.n_penalized = n_penalized

    def value(self, x: np.ndarray) -> float:
        return self.inner.value(x[:self.n_penalized])

    def prox(self, v: np.ndarray, step: float) -> np.ndarray:
        out = np.array(v, dtype=float)
        out[:self.n_penalized] = self.inner.prox(v[:self.n_penalized], step)
        return out


PENALTIES = {
    "gl": GroupL2Penalty,
    "sgl": SparseGroupPenalty,
    "osgl": OverlappingSparseGroupPenalty,
}


def get_penalty(name: str, groups: GroupStructure, gamma1: float, gamma2: float = 0.0, **kwargs) -> Penalty:
    """Get a penalty by flavor name.

    Args:
        name: Flavor (gl, sgl, osgl).
        groups: Group structure the penalty acts on.
        gamma1: Group weight.
        gamma2: l1 weight; must be 0 for gl.
        **kwargs: Flavor-specific options (inner solver settings for osgl).

    Returns:
        An instantiated Penalty.
    """
    if name not in PENALTIES:
        raise ValueError(f"Unknown penalty '{name}'. Available: {list(PENALTIES.keys())}")
    if name == "gl":
        if gamma2 != 0:
            raise ValueError("group Lasso takes no l1 weight")
        return GroupL2Penalty(groups, gamma1)
    return PENALTIES[name](groups, gamma1, gamma2, **kwargs)
