"""
Proximal operators for the regularizers used by the Lasso-type models.

The sparse-group closed form comes from the Fenchel dual of

    min_x  1/2 ||x - d||^2 + gamma1 ||x|| + gamma2 ||x||_1

whose l-infinity block is solved by a componentwise clamp and whose l2
block is a radial projection; the primal solution is recovered as
x = d + (sum of dual blocks). The overlapping case keeps the same dual but
couples the blocks, so it is solved numerically by accelerated projected
gradient with the same closed-form projections.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from cfkit.config import Config
from cfkit.errors import BoxInverted, DimensionMismatch, EmptyGroups, InnerMaxIters

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GroupStructure:
    """Ordered, possibly overlapping, index groups over {0, ..., n-1}."""
    groups: Tuple[Tuple[int, ...], ...]
    n: int
    _flat: np.ndarray = field(init=False, repr=False, compare=False)
    _starts: np.ndarray = field(init=False, repr=False, compare=False)
    _coverage: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        groups = tuple(tuple(int(i) for i in g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        if self.n < 1:
            raise ValueError(f"ambient dimension must be positive, got {self.n}")
        for j, g in enumerate(groups):
            if not g:
                raise EmptyGroups(f"group {j} is empty")
            if g[0] < 0 or g[-1] >= self.n:
                raise ValueError(f"group {j} has an index outside [0, {self.n})")
            if any(b <= a for a, b in zip(g, g[1:])):
                raise ValueError(f"group {j} indices are not strictly increasing")

        sizes = np.array([len(g) for g in groups], dtype=np.intp)
        flat = np.fromiter((i for g in groups for i in g), dtype=np.intp, count=int(sizes.sum()))
        starts = np.concatenate(([0], np.cumsum(sizes)[:-1])).astype(np.intp) if groups else np.zeros(0, np.intp)
        object.__setattr__(self, "_flat", flat)
        object.__setattr__(self, "_starts", starts)
        object.__setattr__(self, "_coverage", np.bincount(flat, minlength=self.n))

    @classmethod
    def from_lists(cls, groups: Sequence[Sequence[int]], n: int) -> "GroupStructure":
        return cls(tuple(tuple(g) for g in groups), n)

    def __len__(self) -> int:
        return len(self.groups)

    @property
    def disjoint(self) -> bool:
        """True iff no index appears in two groups."""
        return bool(np.all(self._coverage <= 1))

    @property
    def flat_index(self) -> np.ndarray:
        """All group indices concatenated in group order."""
        return self._flat

    @property
    def starts(self) -> np.ndarray:
        """Offset of each group inside flat_index."""
        return self._starts

    @property
    def coverage(self) -> np.ndarray:
        """Number of groups containing each coordinate."""
        return self._coverage

    def embed(self, stacked: np.ndarray) -> np.ndarray:
        """Sum of E_j^T y_j for group variables stacked in flat_index order."""
        if not self.groups:
            return np.zeros(self.n)
        return np.bincount(self._flat, weights=stacked, minlength=self.n)

    def split(self, stacked: np.ndarray) -> Tuple[np.ndarray, ...]:
        return tuple(np.split(stacked, self._starts[1:])) if self.groups else ()

    def to_lists(self):
        return [list(g) for g in self.groups]


@dataclass
class DualBlock:
    """Dual certificate of the overlapping sparse-group prox.

    y0 lives in the l-infinity ball of radius gamma2, each group_duals[j]
    in the l2 ball of radius gamma1.
    """
    y0: np.ndarray
    group_duals: Tuple[np.ndarray, ...]
    groups: GroupStructure
    gamma1: float
    gamma2: float
    iterations: int = 0
    residual: float = 0.0
    converged: bool = True

    def stacked(self) -> np.ndarray:
        if not self.group_duals:
            return np.zeros(0)
        return np.concatenate(self.group_duals)

    def is_feasible(self, slack: float = 1e-12) -> bool:
        if np.max(np.abs(self.y0), initial=0.0) > self.gamma2 + slack:
            return False
        return all(np.linalg.norm(y) <= self.gamma1 + slack for y in self.group_duals)


def threshold_clamp(t, kappa: float):
    """Clamp t (scalar or array, componentwise) to [-kappa, kappa]."""
    if kappa < 0:
        raise ValueError(f"threshold must be nonnegative, got {kappa}")
    return np.clip(t, -kappa, kappa)


def prox_l1(d: np.ndarray, gamma: float) -> np.ndarray:
    """Soft threshold: argmin 1/2||x - d||^2 + gamma ||x||_1."""
    d = np.asarray(d, dtype=float)
    return d + threshold_clamp(-d, gamma)


def prox_group_l2(d: np.ndarray, gamma: float) -> np.ndarray:
    """Block soft threshold: argmin 1/2||x - d||^2 + gamma ||x||."""
    if gamma < 0:
        raise ValueError(f"penalty must be nonnegative, got {gamma}")
    d = np.asarray(d, dtype=float)
    norm = np.linalg.norm(d)
    if norm <= gamma:
        return np.zeros_like(d)
    return ((norm - gamma) / norm) * d


def prox_sparse_group(d: np.ndarray, gamma1: float, gamma2: float) -> np.ndarray:
    """Closed-form prox of gamma1 ||x|| + gamma2 ||x||_1 on a single group."""
    return prox_group_l2(prox_l1(d, gamma2), gamma1)


def prox_l1_box(d: np.ndarray, gamma: float, lower, upper) -> np.ndarray:
    """Prox of gamma ||x||_1 restricted to the box lower <= x <= upper."""
    d = np.asarray(d, dtype=float)
    lower = np.broadcast_to(np.asarray(lower, dtype=float), d.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), d.shape)
    if np.any(lower > upper):
        bad = int(np.argmax(lower > upper))
        raise BoxInverted(f"lower[{bad}]={lower[bad]} exceeds upper[{bad}]={upper[bad]}")
    return np.clip(prox_l1(d, gamma), lower, upper)


def recover_primal(d: np.ndarray, blk: DualBlock) -> np.ndarray:
    """Primal point d + y0 + sum_j E_j^T y_j of a dual block."""
    d = np.asarray(d, dtype=float)
    if d.shape != blk.y0.shape:
        raise DimensionMismatch(f"d has shape {d.shape}, dual block has {blk.y0.shape}")
    return d + blk.y0 + blk.groups.embed(blk.stacked())


def _project_balls(stacked: np.ndarray, starts: np.ndarray, radius: float) -> np.ndarray:
    """Radial projection of every group segment onto the l2 ball of the given radius."""
    if stacked.size == 0:
        return stacked
    if radius == 0:
        return np.zeros_like(stacked)
    norms = np.sqrt(np.add.reduceat(stacked * stacked, starts))
    scale = np.ones_like(norms)
    outside = norms > radius
    scale[outside] = radius / norms[outside]
    sizes = np.diff(np.append(starts, stacked.size))
    return stacked * np.repeat(scale, sizes)


def prox_overlapping_sparse_group(
    d: np.ndarray,
    gamma1: float,
    gamma2: float,
    g: GroupStructure,
    tol: Optional[float] = None,
    max_inner: Optional[int] = None,
    strict: bool = False,
    callback: Optional[Callable[[int, DualBlock], None]] = None,
) -> Tuple[np.ndarray, DualBlock]:
    """Prox of gamma1 sum_j ||x(j)|| + gamma2 ||x||_1 for overlapping groups.

    Minimizes the dual 1/2||d + y0 + sum_j E_j^T y_j||^2 over the product of
    balls by accelerated projected gradient with gradient-based restart,
    then recovers x = d + y0 + sum_j E_j^T y_j.

    Args:
        d: Point to evaluate the prox at.
        gamma1: Group weight (radius of every l2 ball).
        gamma2: l1 weight (radius of the l-infinity ball).
        g: Group structure; may overlap, may be empty.
        tol: Stop when the dual projected-gradient mapping norm is at most tol.
        max_inner: Iteration cap.
        strict: Raise InnerMaxIters instead of returning a flagged block.
        callback: Called with (k, block) after every dual iteration.

    Returns:
        The primal point and its dual certificate.
    """
    tol = Config.INNER_TOLERANCE if tol is None else tol
    max_inner = Config.MAX_INNER_ITERS if max_inner is None else max_inner
    if tol <= 0:
        raise ValueError(f"inner tolerance must be positive, got {tol}")
    if gamma1 < 0 or gamma2 < 0:
        raise ValueError("penalty weights must be nonnegative")
    d = np.asarray(d, dtype=float)
    if d.shape != (g.n,):
        raise DimensionMismatch(f"d has shape {d.shape}, groups expect ({g.n},)")
    for j, grp in enumerate(g.groups):
        if not grp:
            raise EmptyGroups(f"group {j} is empty")

    flat, starts = g.flat_index, g.starts
    step = 1.0 / (1.0 + float(np.max(g.coverage, initial=0)))

    def block(y0, yg, k, residual, converged):
        return DualBlock(y0, g.split(yg), g, gamma1, gamma2, k, residual, converged)

    y0 = np.zeros(g.n)
    yg = np.zeros(flat.size)
    w0, wg = y0, yg
    t = 1.0
    best = (np.inf, y0, yg)
    for k in range(1, max_inner + 1):
        u = d + w0 + g.embed(wg)
        y0_new = threshold_clamp(w0 - step * u, gamma2)
        yg_new = _project_balls(wg - step * u[flat], starts, gamma1)

        diff0, diffg = y0_new - w0, yg_new - wg
        residual = float(np.sqrt(diff0 @ diff0 + diffg @ diffg)) / step
        if residual < best[0]:
            best = (residual, y0_new, yg_new)
        if callback is not None:
            callback(k, block(y0_new, yg_new, k, residual, residual <= tol))
        if residual <= tol:
            blk = block(y0_new, yg_new, k, residual, True)
            logger.debug(f"Overlapping prox converged in {k} dual iterations")
            return recover_primal(d, blk), blk

        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        # Restart when the step opposes the momentum direction
        if (-diff0) @ (y0_new - y0) + (-diffg) @ (yg_new - yg) > 0:
            t_new = 1.0
            w0, wg = y0_new, yg_new
        else:
            beta = (t - 1.0) / t_new
            w0 = y0_new + beta * (y0_new - y0)
            wg = yg_new + beta * (yg_new - yg)
        y0, yg, t = y0_new, yg_new, t_new

    residual, y0, yg = best
    blk = block(y0, yg, max_inner, residual, False)
    x = recover_primal(d, blk)
    if strict:
        raise InnerMaxIters(x, blk)
    logger.warning(f"Overlapping prox hit {max_inner} dual iterations (residual {residual:.3e})")
    return x, blk
