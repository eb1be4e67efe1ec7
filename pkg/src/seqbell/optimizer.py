"""Search for (epsilon, theta) maximizing the weakest pairwise violation.

The objective is the closed-form S^(j,k) table. A vectorized coarse grid over
(0, 2] x (0, pi/4] picks starting cells; Nelder-Mead then refines each one.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.optimize import minimize

from .errors import InvalidParam, NoFeasiblePoint
from .gammaseq import gamma_sequence, gamma_sequence_grid
from .measurements import SideParameters
from .witness import BASELINE, closed_form_table

EPS_MAX = 2.0
THETA_MAX = math.pi / 4
INFEASIBLE_OBJECTIVE = -math.inf
OBJECTIVES = ("min", "mean", "s11")


@dataclass(frozen=True)
class OptimizationResult:
    epsilon: float
    theta: float
    min_S: float
    argmin_pair: tuple
    table: tuple  # rows are Bobs
    iterations: int
    grid_best: float
    objective: str = "min"
    epsilon2: float | None = None  # set only in asymmetric mode
    theta2: float | None = None

    @property
    def value(self) -> float:
        return _reduce(np.asarray(self.table), self.objective)


def _reduce(table, objective):
    if objective == "min":
        return float(np.min(table))
    if objective == "mean":
        return float(np.mean(table))
    if objective == "s11":
        return float(table[0][0])
    raise InvalidParam(f"unknown objective {objective!r}; choose from {OBJECTIVES}")


def _sides(eps1, th1, eps2, th2, J, K, symmetric):
    if symmetric:
        n = max(J, K)
        s = SideParameters.from_protocol(eps1, th1, n)
        return s, s
    return SideParameters.from_protocol(eps1, th1, J), SideParameters.from_protocol(eps2, th2, K)


def _feasible(eps, theta, n):
    if not (eps > 0 and 0 < theta < math.pi / 2):
        return False
    return gamma_sequence(eps, theta, n).is_fully_feasible()


def table_for(epsilon, theta, J, K, epsilon2=None, theta2=None):
    symmetric = epsilon2 is None
    a, b = _sides(epsilon, theta, epsilon2, theta2, J, K, symmetric)
    return closed_form_table(a, b, J, K)


def objective_min_S(epsilon: float, theta: float, J: int, K: int, objective: str = "min") -> float:
    """Weakest closed-form S over all (j, k), or -inf when the sharpness sequence is infeasible."""
    if not _feasible(epsilon, theta, max(J, K)):
        return INFEASIBLE_OBJECTIVE
    return _reduce(np.asarray(table_for(epsilon, theta, J, K)), objective)


def _asymmetric_objective(x, J, K, objective):
    e1, t1, e2, t2 = x
    if not (_feasible(e1, t1, J) and _feasible(e2, t2, K)):
        return INFEASIBLE_OBJECTIVE
    return _reduce(np.asarray(table_for(e1, t1, J, K, e2, t2)), objective)


def objective_grid(eps, theta, J, K, objective="min"):
    """Vectorized objective on broadcast arrays; -inf where infeasible."""
    n = max(J, K)
    g = gamma_sequence_grid(eps, theta, n)
    eps_b, th_b = np.broadcast_arrays(np.asarray(eps, float), np.asarray(theta, float))
    s, c = np.sin(th_b), np.cos(th_b)
    prod = np.ones(eps_b.shape)
    brackets = []
    for j in range(1, n + 1):
        gj = g[j - 1]
        brackets.append(2.0 ** (5 - j) * (gj * s + c * prod))
        prod = prod * (1.0 + np.sqrt(np.clip(1.0 - np.nan_to_num(gj) ** 2, 0.0, None)))
    b = np.stack(brackets)
    table = b[None, :J] + b[:K, None] + BASELINE  # [k, j, ...]
    if objective == "min":
        val = table.min(axis=(0, 1))
    elif objective == "mean":
        val = table.mean(axis=(0, 1))
    elif objective == "s11":
        val = table[0, 0]
    else:
        raise InvalidParam(f"unknown objective {objective!r}")
    infeasible = np.isnan(g).any(axis=0) | np.isnan(val)
    return np.where(infeasible, -np.inf, val)


def _argbest(table):
    """Position of the weakest entry, reported as (j, k)."""
    t = np.asarray(table)
    k, j = np.unravel_index(int(np.argmin(t)), t.shape)
    return int(j) + 1, int(k) + 1


class _Tracker:
    """Best feasible point seen, ties broken on (value desc, params asc)."""

    def __init__(self):
        self.best = None
        self.evaluations = 0

    def offer(self, value, params):
        self.evaluations += 1
        if not math.isfinite(value):
            return
        key = (-value,) + tuple(params)
        if self.best is None or key < self.best[0]:
            self.best = (key, value, tuple(params))


def optimize_symmetric(
    J: int,
    K: int,
    budget: int = 500,
    seed: int = 0,
    grid_size: int = 200,
    starts: int = 4,
    objective: str = "min",
    asymmetric: bool = False,
) -> OptimizationResult:
    if J < 1 or K < 1:
        raise InvalidParam("J and K must be >= 1")
    if objective not in OBJECTIVES:
        raise InvalidParam(f"unknown objective {objective!r}")
    if asymmetric:
        sym = optimize_symmetric(J, K, budget, seed, grid_size, starts, objective)
        return _refine_asymmetric(sym, J, K, budget, seed, grid_size)
    rng = np.random.default_rng(seed)
    eps_axis = EPS_MAX * np.arange(1, grid_size + 1) / grid_size
    th_axis = THETA_MAX * np.arange(1, grid_size + 1) / grid_size
    E, T = np.meshgrid(eps_axis, th_axis, indexing="ij")
    grid = objective_grid(E, T, J, K, objective)
    if not np.any(np.isfinite(grid)):
        raise NoFeasiblePoint(f"no feasible grid point for J={J}, K={K}")

    # lexicographic: value desc, eps asc, theta asc
    order = np.lexsort((T.ravel(), E.ravel(), -grid.ravel()))
    cells = [(E.ravel()[i], T.ravel()[i]) for i in order[:starts] if np.isfinite(grid.ravel()[i])]
    grid_best = float(grid.ravel()[order[0]])

    tracker = _Tracker()
    tracker.offer(grid_best, cells[0])
    steps = np.array([EPS_MAX / grid_size, THETA_MAX / grid_size])
    per_start = max(1, budget // len(cells))

    def f(x):
        v = objective_min_S(float(x[0]), float(x[1]), J, K, objective)
        tracker.offer(v, (float(x[0]), float(x[1])))
        return -v if math.isfinite(v) else 1e6

    bounds = [(1e-12, EPS_MAX), (1e-12, THETA_MAX)]
    for x0 in cells:
        x0 = np.array(x0)
        simplex = np.array([x0, x0 + [steps[0], 0], x0 + [0, steps[1]]])
        simplex[1:] -= rng.uniform(0.0, 1.0, size=(2, 2)) * steps
        minimize(f, x0, method="Nelder-Mead", bounds=bounds,
                 options={"maxfev": per_start, "initial_simplex": simplex,
                          "xatol": 1e-12, "fatol": 1e-12})
    _, _, (eps, th) = tracker.best
    table = table_for(eps, th, J, K)
    return OptimizationResult(eps, th, float(np.min(table)), _argbest(table),
                              tuple(map(tuple, table)), tracker.evaluations, grid_best, objective)


def _refine_asymmetric(sym, J, K, budget, seed, grid_size):
    """Refine (eps1, theta1, eps2, theta2) starting from a symmetric optimum."""
    rng = np.random.default_rng(seed + 1)
    steps = np.array([EPS_MAX / grid_size, THETA_MAX / grid_size])
    objective = sym.objective
    tracker = _Tracker()

    def f4(x):
        v = _asymmetric_objective([float(t) for t in x], J, K, objective)
        tracker.offer(v, tuple(float(t) for t in x))
        return -v if math.isfinite(v) else 1e6

    x0 = np.array([sym.epsilon, sym.theta, sym.epsilon, sym.theta])
    f4(x0)
    simplex = np.vstack([x0, x0 + np.diag(np.tile(steps, 2)) * rng.uniform(-1.0, 1.0, size=4)])
    minimize(f4, x0, method="Nelder-Mead", bounds=[(1e-12, EPS_MAX), (1e-12, THETA_MAX)] * 2,
             options={"maxfev": budget, "initial_simplex": simplex, "xatol": 1e-12, "fatol": 1e-12})
    _, _, (e1, t1, e2, t2) = tracker.best
    table = table_for(e1, t1, J, K, e2, t2)
    return OptimizationResult(e1, t1, float(np.min(table)), _argbest(table),
                              tuple(map(tuple, table)), sym.iterations + tracker.evaluations,
                              sym.grid_best, objective, e2, t2)
