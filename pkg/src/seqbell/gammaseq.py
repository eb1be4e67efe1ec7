"""Sharpness sequences for the sequential protocol and their feasibility checks.

For a side with slack ``epsilon`` and angle ``theta`` the sequence is

    gamma_1 = (1 + eps) (1 - cos theta) / sin theta
    gamma_j = (1 + eps) (2**(j-1) - cos theta * prod_{g<j} (1 + sqrt(1 - gamma_g**2))) / sin theta

and is continued only while the previous entry lies in (0, 1). Entries past
that point are the ``INFEASIBLE`` sentinel, never a float infinity.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import InvalidParam, NotFound


class _Infeasible:
    """Marker for sequence entries where no violation is possible."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFEASIBLE"

    def __reduce__(self):
        return (_Infeasible, ())


INFEASIBLE = _Infeasible()


def _check(epsilon, theta):
    if not (math.isfinite(epsilon) and epsilon > 0):
        raise InvalidParam(f"epsilon must be > 0, got {epsilon!r}")
    if not (math.isfinite(theta) and 0 < theta <= math.pi / 2):
        raise InvalidParam(f"theta must lie in (0, pi/2], got {theta!r}")


def gamma_first(epsilon: float, theta: float) -> float:
    _check(epsilon, theta)
    return (1 + epsilon) * (1 - math.cos(theta)) / math.sin(theta)


def sharp_product(gammas) -> float:
    """prod (1 + sqrt(1 - g**2)); the empty product is 1."""
    out = 1.0
    for g in gammas:
        out *= 1.0 + math.sqrt(max(0.0, 1.0 - g * g))
    return out


@dataclass(frozen=True)
class GammaSequence:
    epsilon: float
    theta: float
    values: tuple
    feasible_count: int

    @property
    def feasible(self) -> tuple:
        """The finite prefix as floats."""
        return tuple(self.values[: self.feasible_count])

    def is_fully_feasible(self) -> bool:
        return self.feasible_count == len(self.values)

    def first_infeasible_index(self):
        """1-based index of the first sentinel entry, or None."""
        if self.is_fully_feasible():
            return None
        return self.feasible_count + 1


def gamma_sequence(epsilon: float, theta: float, n: int) -> GammaSequence:
    _check(epsilon, theta)
    if n < 1:
        raise InvalidParam(f"sequence length must be >= 1, got {n}")
    s, c = math.sin(theta), math.cos(theta)
    values = []
    prod = 1.0
    alive = True
    for j in range(1, n + 1):
        if not alive:
            values.append(INFEASIBLE)
            continue
        g = (1 + epsilon) * (2 ** (j - 1) - c * prod) / s
        if not (0.0 < g < 1.0):
            alive = False
            values.append(INFEASIBLE)
            continue
        values.append(g)
        prod *= 1.0 + math.sqrt(1.0 - g * g)
    count = sum(1 for v in values if v is not INFEASIBLE)
    return GammaSequence(epsilon, theta, tuple(values), count)


def gamma_sequence_grid(epsilon, theta, n):
    """Vectorized recursion over broadcast arrays of ``epsilon`` and ``theta``.

    Returns an array of shape ``(n,) + broadcast_shape`` with NaN in place of
    infeasible entries. Used by the optimizer's grid stage; ``gamma_sequence``
    remains the reference.
    """
    eps, th = np.broadcast_arrays(np.asarray(epsilon, float), np.asarray(theta, float))
    s, c = np.sin(th), np.cos(th)
    out = np.full((n,) + eps.shape, np.nan)
    prod = np.ones(eps.shape)
    alive = np.ones(eps.shape, dtype=bool)
    for j in range(1, n + 1):
        with np.errstate(divide="ignore", invalid="ignore"):
            g = (1 + eps) * (2.0 ** (j - 1) - c * prod) / s
        alive &= (g > 0) & (g < 1)
        out[j - 1] = np.where(alive, g, np.nan)
        prod = prod * (1.0 + np.sqrt(np.clip(1.0 - np.where(alive, g, 0.0) ** 2, 0.0, None)))
    return out


def is_positive_increasing(seq: GammaSequence) -> bool:
    """Feasible prefix is positive and strictly increasing."""
    vals = seq.feasible
    return all(v > 0 for v in vals) and all(a < b for a, b in zip(vals, vals[1:]))


@dataclass(frozen=True)
class FeasibilityScan:
    epsilon: float
    n: int
    thetas: tuple  # descending
    feasible: tuple
    best_theta: float | None
    level: int
    monotonicity_violations: tuple  # grid angles below best_theta that fail


def feasibility_scan(epsilon: float, n: int, grid_size: int = 1000, max_levels: int = 8) -> FeasibilityScan:
    """Descending uniform grid over (0, upper]; zoom into the lowest cell when empty.

    Level 0 uses ``upper = pi/4``. If no grid point is feasible, the next level
    repeats the grid over ``(0, upper / grid_size]``, which is the interval
    left unexamined below the smallest point.
    """
    if grid_size < 1:
        raise InvalidParam("grid_size must be >= 1")
    upper = math.pi / 4
    for level in range(max_levels):
        thetas = tuple(upper * i / grid_size for i in range(grid_size, 0, -1))
        feas = tuple(gamma_sequence(epsilon, t, n).feasible_count == n for t in thetas)
        if any(feas):
            i0 = feas.index(True)
            bad = tuple(t for t, ok in zip(thetas[i0:], feas[i0:]) if not ok)
            return FeasibilityScan(epsilon, n, thetas, feas, thetas[i0], level, bad)
        upper = thetas[-1]
    return FeasibilityScan(epsilon, n, thetas, feas, None, max_levels - 1, ())


def find_feasible_theta(epsilon: float, n: int, grid_size: int = 1000, max_levels: int = 8) -> float:
    """Largest grid angle in (0, pi/4] at which gamma_1..gamma_n are all in (0, 1)."""
    _check(epsilon, math.pi / 4)
    if n < 1:
        raise InvalidParam(f"n must be >= 1, got {n}")
    scan = feasibility_scan(epsilon, n, grid_size, max_levels)
    if scan.best_theta is None:
        raise NotFound(f"no feasible theta for epsilon={epsilon}, n={n} after {max_levels} grid levels")
    return scan.best_theta


def feasibility_boundary(epsilon: float, n: int, grid_size: int = 1000, tol: float = 1e-13) -> float:
    """Bisect between the best grid angle and its infeasible upper neighbour.

    Returns the largest angle (to ``tol``) keeping gamma_1..gamma_n in (0, 1),
    assuming feasibility is monotone across that one grid cell.
    """
    scan = feasibility_scan(epsilon, n, grid_size)
    if scan.best_theta is None:
        raise NotFound(f"no feasible theta for epsilon={epsilon}, n={n}")
    i = scan.thetas.index(scan.best_theta)
    if i == 0:
        return scan.best_theta
    lo, hi = scan.best_theta, scan.thetas[i - 1]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if gamma_sequence(epsilon, mid, n).feasible_count == n:
            lo = mid
        else:
            hi = mid
    return lo
