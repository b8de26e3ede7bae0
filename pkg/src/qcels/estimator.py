"""Single-level phase fit: loss, closed-form amplitude, and maximizer.

Fitting r e^{-i theta n tau} to the samples in the least-squares sense
reduces, after eliminating r in closed form, to maximizing

    f(theta) = |sum_n Z_n e^{i theta n tau}|^2,

an oscillatory function whose main lobe around the dominant phase has
width about 2 pi / (N tau).  The maximizer walks a uniform grid fine
enough to land twice per lobe and polishes every local maximum by
golden-section ascent, keeping the best refined candidate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from . import backend
from .sampler import TimeSeriesDataset

GOLDEN_RATIO = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class FitResult:
    theta_star: float
    r_star: complex
    objective_value: float
    loss_value: float
    grid_points_evaluated: int
    refinements: int
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "theta_star": self.theta_star,
            "r_star": [self.r_star.real, self.r_star.imag],
            "objective_value": self.objective_value,
            "loss_value": self.loss_value,
            "grid_points_evaluated": self.grid_points_evaluated,
            "refinements": self.refinements,
            "degenerate": self.degenerate,
        }


def loss(ds: TimeSeriesDataset, r: complex, theta: float) -> float:
    """Mean squared residual (1/N) sum_n |Z_n - r e^{-i theta t_n}|^2."""
    resid = ds.values - r * np.exp(-1j * theta * ds.times)
    return float(np.mean(np.abs(resid) ** 2))


def optimal_amplitude(ds: TimeSeriesDataset, theta: float) -> complex:
    """Closed-form minimizer of the loss in r: (1/N) sum_n e^{i theta t_n} Z_n."""
    return complex(np.mean(ds.values * np.exp(1j * theta * ds.times)))


def objective(ds: TimeSeriesDataset, theta: float) -> float:
    """f(theta) = |sum_n Z_n e^{i theta n tau}|^2, the quantity fit maximizes."""
    s = ds.values @ np.exp(1j * float(theta) * ds.tau * np.arange(ds.n_points))
    return float(s.real * s.real + s.imag * s.imag)


def objective_many(ds: TimeSeriesDataset, thetas) -> np.ndarray:
    """Vectorized objective over an array of trial phases."""
    return backend.objective_scan(ds.values, ds.tau, np.asarray(thetas, dtype=np.float64))


def _objective_derivatives(ds: TimeSeriesDataset, theta: float):
    """f, f', f'' of f(theta) = |sum Z_n e^{i theta n tau}|^2, analytically."""
    nt = ds.tau * np.arange(ds.n_points)
    terms = ds.values * np.exp(1j * theta * nt)
    s0 = terms.sum()
    s1 = (1j * nt * terms).sum()
    s2 = (-(nt**2) * terms).sum()
    f = abs(s0) ** 2
    d1 = 2.0 * (np.conj(s0) * s1).real
    d2 = 2.0 * (abs(s1) ** 2 + (np.conj(s0) * s2).real)
    return f, d1, d2


def _newton_polish(ds: TimeSeriesDataset, theta: float, lo: float, hi: float):
    """Drive f'(theta) to zero inside [lo, hi], starting from theta.

    Comparing raw objective values bottoms out at sqrt(eps) resolution in
    theta (the top of the lobe is flat); a few Newton steps on the analytic
    derivative recover full floating-point accuracy.  Returns (theta,
    converged).
    """
    for _ in range(60):
        _, d1, d2 = _objective_derivatives(ds, theta)
        if d2 >= 0:
            return theta, False
        step = -d1 / d2
        new = min(max(theta + step, lo), hi)
        if new == theta or abs(step) <= 4.0 * np.finfo(float).eps * max(1.0, abs(new)):
            return new, True
        theta = new
    return theta, True


def _golden_max(func, lo: float, hi: float, tol: float):
    """Golden-section ascent; returns the best evaluated (x, f(x))."""
    x1 = hi - GOLDEN_RATIO * (hi - lo)
    x2 = lo + GOLDEN_RATIO * (hi - lo)
    f1, f2 = func(x1), func(x2)
    best = (x1, f1) if f1 >= f2 else (x2, f2)
    while hi - lo > tol:
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN_RATIO * (hi - lo)
            f1 = func(x1)
            if f1 > best[1]:
                best = (x1, f1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN_RATIO * (hi - lo)
            f2 = func(x2)
            if f2 > best[1]:
                best = (x2, f2)
    return best


def fit(ds: TimeSeriesDataset, search_interval, tol: float = None) -> FitResult:
    """Maximize the objective over [lo, hi] by grid scan plus local ascent.

    The interval may not exceed one period 2 pi / tau.  Ties between equal
    refined maxima break toward the smaller theta so results do not depend
    on evaluation order.
    """
    lo, hi = float(search_interval[0]), float(search_interval[1])
    if ds.n_points < 1:
        raise ValueError("empty dataset")
    if not hi > lo:
        raise ValueError("search interval must have positive width")
    period = 2.0 * np.pi / ds.tau
    if hi - lo > period * (1.0 + 1e-12):
        raise ValueError("search interval wider than one period 2 pi / tau")
    if tol is None:
        tol = 1e-12 * (hi - lo) + 1e-14

    if not np.any(ds.values):
        # all-zero data: flat objective, report the midpoint
        return FitResult(theta_star=0.5 * (lo + hi), r_star=0j,
                         objective_value=0.0, loss_value=0.0,
                         grid_points_evaluated=0, refinements=0, degenerate=True)

    t_span = ds.n_points * ds.tau
    n_cells = max(math.ceil((hi - lo) * t_span / np.pi), 8)
    grid = np.linspace(lo, hi, n_cells + 1)
    fvals = objective_many(ds, grid)
    nt = ds.tau * np.arange(ds.n_points)

    def scalar(theta):
        s = ds.values @ np.exp(1j * theta * nt)
        return float(s.real * s.real + s.imag * s.imag)

    # one candidate per local maximum of the grid scan: theta from golden
    # section plus a Newton polish, f from the best value seen on the lobe
    # (raw evaluations near the flat top are only sqrt(eps)-trustworthy,
    # so the accurate theta and the comparable f are tracked separately)
    candidates = []
    refinements = 0
    for i in range(grid.size):
        left_ok = i == 0 or fvals[i] >= fvals[i - 1]
        right_ok = i == grid.size - 1 or fvals[i] >= fvals[i + 1]
        if not (left_ok and right_ok):
            continue
        a = float(grid[max(i - 1, 0)])
        b = float(grid[min(i + 1, grid.size - 1)])
        theta_c, f_lobe = float(grid[i]), float(fvals[i])
        if b > a:
            theta_g, f_g = _golden_max(scalar, a, b, tol)
            f_lobe = max(f_lobe, f_g)
            theta_n, converged = _newton_polish(ds, theta_g, a, b)
            theta_c = theta_n if converged else theta_g
            f_lobe = max(f_lobe, scalar(theta_c))
            refinements += 1
        candidates.append((theta_c, f_lobe))

    best_f = max(c[1] for c in candidates)
    theta_star = min(theta for theta, f in candidates if f == best_f)
    r_star = optimal_amplitude(ds, theta_star)
    return FitResult(theta_star=theta_star, r_star=r_star,
                     objective_value=best_f,
                     loss_value=loss(ds, r_star, theta_star),
                     grid_points_evaluated=grid.size, refinements=refinements)


def wrapped_distance(a: float, b: float, period: float) -> float:
    """min over integers c of |a - b - c * period|; lies in [0, period/2]."""
    if period <= 0:
        raise ValueError("period must be positive")
    d = (a - b) % period
    return float(min(d, period - d))


# ---------------------------------------------------------------------------
# theory constants and kernel helpers


@lru_cache(maxsize=1)
def alpha_constant() -> float:
    """1 + max over c in (0, pi/2] of sin(c)/(pi + c), about 1.217."""
    res = minimize_scalar(lambda c: -math.sin(c) / (math.pi + c),
                          bounds=(1e-9, math.pi / 2), method="bounded",
                          options={"xatol": 1e-12})
    return 1.0 - res.fun


def _depth_ratio(delta: float) -> float:
    return delta * math.cos(delta / 10.0) / (2.0 * math.sin(delta / 2.0))


def feasibility_delta(p0: float, xi: float = 1e-3) -> float:
    """Smallest depth constant delta in (0, 4] allowed at overlap p0.

    Solves p0 / ((1+alpha) p0 - alpha - xi) <= delta cos(delta/10) /
    (2 sin(delta/2)) by bisection; the right side increases on (0, 4], so
    the crossing point is the smallest admissible delta.  Overlaps below
    roughly 0.71 make the left side too large for any delta <= 4 and raise
    ValueError.
    """
    if not 0.0 < p0 <= 1.0:
        raise ValueError(f"p0 must be in (0, 1], got {p0}")
    if xi <= 0:
        raise ValueError("xi must be positive")
    alpha = alpha_constant()
    denom = (1.0 + alpha) * p0 - alpha - xi
    if denom <= 0:
        raise ValueError(f"infeasible overlap p0 = {p0}: depth bound undefined "
                         "(needs roughly p0 > 0.71)")
    target = p0 / denom
    if _depth_ratio(4.0) < target:
        raise ValueError(f"infeasible overlap p0 = {p0}: no delta <= 4 satisfies "
                         f"the depth inequality (needs ratio {target:.4f})")
    lo, hi = 1e-12, 4.0
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if _depth_ratio(mid) >= target:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def dirichlet_kernel(theta, n: int) -> np.ndarray:
    """|sin(n theta / 2) / sin(theta / 2)|, the noiseless objective profile."""
    theta = np.asarray(theta, dtype=np.float64)
    s = np.sin(theta / 2.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.abs(np.sin(n * theta / 2.0) / s)
    return np.where(np.abs(s) < 1e-300, float(n), out)


def geom_kernel_real(theta, n: int) -> np.ndarray:
    """Re((e^{i theta n} - 1) / (e^{i theta} - 1)) = cos((n-1)theta/2) sin(n theta/2) / sin(theta/2)."""
    theta = np.asarray(theta, dtype=np.float64)
    s = np.sin(theta / 2.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.cos((n - 1) * theta / 2.0) * np.sin(n * theta / 2.0) / s
    return np.where(np.abs(s) < 1e-300, float(n), out)
