"""Main-server frequency split: min over F of max_k m_k + n_k / f_k.

The solver is a Lagrangian relaxation of the epigraph form (T_m >= every
client's latency, sum f <= f_s).  Stationarity in f gives the closed-form
primal step f_k = sqrt(mu_k n_k / lambda); the multipliers then move along
their subgradients.  A grid search over the simplex serves as test oracle.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

# share handed to clients that need no server compute (C2 wants f > 0)
FLOOR_SHARE = 1e-9


@dataclass(frozen=True)
class FreqSubproblem:
    """m: frequency-independent seconds; n: cycle-seconds; budget: f_s."""

    m: np.ndarray
    n: np.ndarray
    budget: float

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.m, dtype=float))
        n = np.atleast_1d(np.asarray(self.n, dtype=float))
        if m.shape != n.shape:
            raise ValueError("m and n must have the same length")
        if np.any(m < 0) or np.any(n < 0) or not np.all(np.isfinite(n)):
            raise ValueError("m and n must be >= 0 and n finite")
        if not self.budget > 0:
            raise ValueError("budget must be > 0")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "budget", float(self.budget))

    def objective(self, shares) -> float:
        shares = np.asarray(shares, dtype=float)
        with np.errstate(divide="ignore"):
            return float(np.max(self.m + np.where(self.n > 0, self.n / shares, 0.0)))


@dataclass
class DualState:
    """Initial multipliers and step sizes.

    ``alpha`` scales the multiplicative budget step (1 jumps to the
    stationary lambda for the current mu); ``beta`` scales the normalised
    per-client step; ``eps_rel`` is the stopping threshold relative to the
    objective of the even split.
    """

    lam: float = 1.0
    mu: np.ndarray | None = None
    alpha: float = 1.0
    beta: float = 1.0
    eps_rel: float = 1e-6


@dataclass
class FreqSolution:
    shares: np.ndarray
    objective: float
    iterations: int
    converged: bool
    trace: np.ndarray = field(default=None, repr=False)

    def write_trace(self, path) -> None:
        """CSV with columns iteration, T_m, lambda, sum_f."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "T_m", "lambda", "sum_f"])
            if self.trace is not None:
                for i, (t, lam, total) in enumerate(self.trace):
                    writer.writerow([i, repr(t), repr(lam), repr(total)])


def solve_freq(sub: FreqSubproblem, dual0: DualState | None = None,
               max_iters: int = 10_000) -> FreqSolution:
    """Allocate ``sub.budget`` across clients to minimise the worst latency.

    Clients with n_k = 0 (no server work) or m_k = inf (already lost) sit out
    of the dual with a floor share.  The returned shares always satisfy
    sum f <= budget and f > 0.
    """
    dual0 = dual0 or DualState()
    if not dual0.lam > 0:
        raise ValueError("initial lambda must be > 0")
    k_all = sub.m.shape[0]
    active = (sub.n > 0) & np.isfinite(sub.m)
    idx = np.flatnonzero(active)
    shares = np.zeros(k_all)
    if idx.size == 0:
        shares[:] = sub.budget / k_all
        return FreqSolution(shares, sub.objective(shares), 0, True, np.empty((0, 3)))
    floor = FLOOR_SHARE * sub.budget
    shares[~active] = floor
    budget = sub.budget - floor * (k_all - idx.size)
    if idx.size == 1:
        shares[idx] = budget
        return FreqSolution(shares, sub.objective(shares), 0, True, np.empty((0, 3)))

    m, n = sub.m[idx], sub.n[idx]
    if dual0.mu is None:
        mu = np.full(idx.size, 1.0 / idx.size)
    else:
        mu = np.asarray(dual0.mu, dtype=float)[idx].copy()
        mu /= mu.sum()
    t0 = float(np.max(m + n / (budget / idx.size)))
    trace = np.zeros((max_iters, 3))
    best_f, _, iters, converged, _ = _kernels.freq_dual(
        m, n, budget, float(dual0.lam), mu, float(dual0.alpha), float(dual0.beta),
        dual0.eps_rel * t0, int(max_iters), trace)
    # guard C3 against rounding in the rescale
    best_f = best_f * min(1.0, budget / best_f.sum())
    shares[idx] = best_f
    return FreqSolution(shares, sub.objective(shares), int(iters), bool(converged),
                        trace[:iters].copy())


def _compositions(k: int, grid: int):
    """All positive integer vectors of length k summing to grid, in blocks."""
    if k == 1:
        yield np.array([[grid]])
        return
    if k == 2:
        c = np.arange(1, grid)
        yield np.stack([c, grid - c], axis=1)
        return
    for head in itertools.product(range(1, grid), repeat=k - 2):
        rest = grid - sum(head)
        if rest < 2:
            continue
        c = np.arange(1, rest)
        block = np.empty((c.size, k), dtype=np.int64)
        block[:, : k - 2] = head
        block[:, k - 2] = c
        block[:, k - 1] = rest - c
        yield block


def _grid_objective(sub: FreqSubproblem, shares: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        lat = sub.m + np.where(sub.n > 0, sub.n / shares, 0.0)
    lat = np.where(shares > 0, lat, np.inf)
    return lat.max(axis=1)


def brute_force_freq(sub: FreqSubproblem, grid: int, refine: int = 0,
                     refine_points: int = 25, refine_span: int = 3) -> tuple[np.ndarray, float]:
    """Exhaustive search over shares on the simplex sum f = budget.

    The base lattice has step budget/grid.  Each refinement level searches a
    box of +-``refine_span`` current steps around the incumbent with
    ``refine_points`` per free axis and shrinks the step accordingly.
    """
    k = sub.m.shape[0]
    if k > 5:
        raise ValueError(f"brute force limited to K <= 5, got {k}")
    if not 1 <= grid <= 200 or grid < k:
        raise ValueError(f"grid must be in [K, 200], got {grid}")
    best, best_shares = np.inf, None
    for block in _compositions(k, grid):
        shares = sub.budget * block / grid
        obj = _grid_objective(sub, shares)
        j = int(np.argmin(obj))
        if obj[j] < best:
            best, best_shares = float(obj[j]), shares[j].copy()
    step = sub.budget / grid
    offsets = np.linspace(-refine_span, refine_span, refine_points)
    for _ in range(refine):
        if k == 1:
            break
        axes = np.meshgrid(*([offsets] * (k - 1)), indexing="ij")
        delta = np.stack([a.ravel() for a in axes], axis=1) * step
        free = best_shares[: k - 1] + delta
        last = sub.budget - free.sum(axis=1, keepdims=True)
        shares = np.concatenate([free, last], axis=1)
        obj = _grid_objective(sub, shares)
        j = int(np.argmin(obj))
        if obj[j] < best:
            best, best_shares = float(obj[j]), shares[j].copy()
        step *= 2.0 * refine_span / (refine_points - 1)
    return best_shares, best
