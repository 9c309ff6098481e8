"""Large-degree Gaussian density evolution.

As ``d -> inf`` with ``lambda`` fixed, the root messages conditioned on the
root label are Gaussian, ``N(h +/- mu/2, mu)``, and one more generation maps
``mu`` to

    G(mu) = lambda / (1-p)^2 * E[ 1 / (p + (1-p) exp(sqrt(mu) Z - mu/2)) - 1 ],

with ``Z`` standard normal. This module evaluates ``G``, iterates it, locates
and classifies its fixed points, and derives the spinodal curve and the
reveal-fraction threshold.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import optimize
from scipy.special import erf, expit, roots_hermite

from .model import ModelParams

DEFAULT_QUAD_NODES = 201
# Gauss-Hermite nodes per unit of mu; the logistic step in the integrand has
# width ~ 1/sqrt(mu) and its poles sit ~ pi/sqrt(mu) off the real axis.
NODES_PER_MU = 10
MAX_QUAD_NODES = 20_000


@lru_cache(maxsize=64)
def _hermite_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    t, w = roots_hermite(n)
    z = math.sqrt(2.0) * t
    w = w / math.sqrt(math.pi)
    z.setflags(write=False)
    w.setflags(write=False)
    return z, w


def _node_count(mu: float, quad_nodes: int) -> int:
    return int(min(MAX_QUAD_NODES, max(quad_nodes, math.ceil(NODES_PER_MU * mu))))


def h_map(mu: float, p: float, quad_nodes: int = DEFAULT_QUAD_NODES) -> float:
    """``G(mu)`` at ``lambda = 1``.

    ``quad_nodes`` is the minimum Gauss-Hermite order; above ``mu = 20`` the
    order grows linearly with ``mu`` to keep resolving the logistic step.
    Clamped at zero, which Jensen's inequality guarantees up to rounding.
    """
    mu = float(mu)
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    if mu == 0.0:
        return 0.0
    z, w = _hermite_rule(_node_count(mu, quad_nodes))
    shift = math.log((1.0 - p) / p)
    # 1 / (p + (1-p) e^u) = expit(-(u + log((1-p)/p))) / p
    inner = expit(-(math.sqrt(mu) * z - 0.5 * mu + shift))
    mean = math.fsum(w * inner) / p
    return max(0.0, (mean - 1.0) / (1.0 - p) ** 2)


def g_map(mu: float, params: ModelParams, quad_nodes: int = DEFAULT_QUAD_NODES) -> float:
    """The density-evolution map ``G(mu)`` for ``params`` (only ``p`` and
    ``lambda`` matter)."""
    return params.lam * h_map(mu, params.p, quad_nodes)


def g_map_mc(mu: float, p: float, lam: float, n_draws: int = 10**7, seed=0,
             chunk: int = 10**6) -> tuple[float, float]:
    """Monte Carlo estimate of ``G(mu)`` and its standard error.

    Independent check on the quadrature; shares nothing with it but the
    formula.
    """
    rng = np.random.default_rng(seed)
    s = 0.0
    s2 = 0.0
    done = 0
    while done < n_draws:
        m = min(chunk, n_draws - done)
        zs = rng.standard_normal(m)
        v = 1.0 / (p + (1.0 - p) * np.exp(math.sqrt(mu) * zs - mu / 2.0)) - 1.0
        s += v.sum()
        s2 += (v * v).sum()
        done += m
    mean = s / n_draws
    var = max(0.0, s2 / n_draws - mean * mean) * n_draws / (n_draws - 1)
    scale = lam / (1.0 - p) ** 2
    return scale * mean, scale * math.sqrt(var / n_draws)


def g_prime(mu: float, params: ModelParams, quad_nodes: int = DEFAULT_QUAD_NODES) -> float:
    """Central-difference slope of ``G`` with step ``1e-5 max(1, mu)``.

    At ``mu = 0`` the exact slope ``lambda`` is returned, since ``G`` is not
    defined for negative arguments.
    """
    if mu == 0.0:
        return params.lam
    step = 1e-5 * max(1.0, mu)
    step = min(step, mu)
    return (g_map(mu + step, params, quad_nodes) - g_map(mu - step, params, quad_nodes)) / (2 * step)


def success_from_mu(mu: float) -> float:
    """``2 P(N(mu/2, mu) > 0) - 1 = 2 Phi(sqrt(mu)/2) - 1``."""
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    return float(erf(math.sqrt(mu) / (2.0 * math.sqrt(2.0))))


def mu_one(q: float, params: ModelParams) -> float:
    """Starting value ``q lambda / (p (1-p))``."""
    return q * params.lam / (params.p * (1.0 - params.p))


def mu_upper(params: ModelParams) -> float:
    """Range bound: ``G(mu) <= lambda / (p (1-p))`` for every ``mu``."""
    return params.lam / (params.p * (1.0 - params.p))


@dataclass(frozen=True)
class FixedPointReport:
    """Fixed points of ``G``.

    ``roots`` holds every positive fixed point found, in increasing order,
    with its slope ``G'``; ``beta`` is the smallest unstable positive one and
    ``alpha`` the largest stable one.
    """

    p: float
    lam: float
    zero_stable: bool
    beta: float | None
    alpha: float | None
    roots: tuple = ()
    slopes: tuple = ()
    warnings: tuple = ()

    def as_dict(self) -> dict:
        return {
            "p": self.p,
            "lambda": self.lam,
            "zero_stable": self.zero_stable,
            "beta": self.beta,
            "alpha": self.alpha,
            "roots": list(self.roots),
            "slopes": list(self.slopes),
            "warnings": list(self.warnings),
        }

    def nearest(self, mu: float) -> str:
        candidates = [("zero", 0.0)]
        if self.beta is not None:
            candidates.append(("beta-unstable-hit", self.beta))
        if self.alpha is not None:
            candidates.append(("alpha", self.alpha))
        return min(candidates, key=lambda kv: abs(kv[1] - mu))[0]


def fixed_points(
    params: ModelParams,
    grid_points: int = 2000,
    quad_nodes: int = DEFAULT_QUAD_NODES,
    xtol: float = 1e-12,
) -> FixedPointReport:
    """All fixed points of ``G`` on ``[0, lambda/(p(1-p))]``.

    Sign changes of ``G(mu) - mu`` are located on a log-spaced grid (so a
    small ``beta`` near zero is still resolved) and refined by a bracketing
    root finder. Stability is ``|G'| < 1`` with a central difference.
    """
    lam = params.lam
    if lam == 0.0:
        return FixedPointReport(params.p, lam, True, None, None)
    top = mu_upper(params)
    grid = np.geomspace(top * 1e-9, top, grid_points)
    resid = np.array([g_map(m, params, quad_nodes) - m for m in grid])
    notes = []
    roots = []
    sign = np.sign(resid)
    for i in range(len(grid) - 1):
        if sign[i] == 0:
            roots.append(float(grid[i]))
            continue
        if sign[i] * sign[i + 1] < 0:
            root = optimize.brentq(
                lambda m: g_map(m, params, quad_nodes) - m, grid[i], grid[i + 1],
                xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500,
            )
            roots.append(float(root))
            # resolution check: look for a hidden pair of crossings in the cell
            mid = np.linspace(grid[i], grid[i + 1], 9)[1:-1]
            inner = np.sign([g_map(m, params, quad_nodes) - m for m in mid])
            if np.count_nonzero(np.diff(np.concatenate([[sign[i]], inner, [sign[i + 1]]]))) > 1:
                notes.append(f"multiple sign changes near mu={root:.6g}; refine grid")
    if sign[-1] == 0:
        roots.append(float(grid[-1]))
    slopes = [g_prime(m, params, quad_nodes) for m in roots]
    stable = [abs(s) < 1.0 for s in slopes]
    beta = next((m for m, st in zip(roots, stable) if not st), None)
    alpha = next((m for m, st in zip(reversed(roots), reversed(stable)) if st), None)
    for note in notes:
        warnings.warn(note, RuntimeWarning, stacklevel=2)
    return FixedPointReport(
        p=params.p, lam=lam, zero_stable=abs(lam) < 1.0, beta=beta, alpha=alpha,
        roots=tuple(roots), slopes=tuple(slopes), warnings=tuple(notes),
    )


@dataclass(frozen=True)
class DensityEvolutionTrace:
    q: float
    mus: tuple
    converged: bool
    converged_to: float | None
    iterations: int
    classification: str | None = None
    fixed_points: FixedPointReport | None = field(default=None, repr=False)


def iterate_mu(
    q: float,
    params: ModelParams,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    quad_nodes: int = DEFAULT_QUAD_NODES,
    classify: bool = True,
) -> DensityEvolutionTrace:
    """Iterate ``mu_{k+1} = G(mu_k)`` from ``mu_1 = q lambda / (p(1-p))``.

    Stops once successive values differ by less than ``tol``. If that never
    happens within ``max_iter`` steps the trace is returned with
    ``converged=False`` and no classification, and a warning is issued.
    """
    if not (0.0 <= q <= 1.0):
        raise ValueError("q must lie in [0, 1]")
    mus = [mu_one(q, params)]
    converged = False
    for _ in range(max_iter):
        nxt = g_map(mus[-1], params, quad_nodes)
        mus.append(nxt)
        if abs(nxt - mus[-2]) < tol:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"density evolution did not converge in {max_iter} iterations "
            f"(last step {abs(mus[-1] - mus[-2]):.3g})",
            RuntimeWarning, stacklevel=2,
        )
        return DensityEvolutionTrace(q, tuple(mus), False, None, len(mus) - 1)
    report = fixed_points(params, quad_nodes=quad_nodes) if classify else None
    label = report.nearest(mus[-1]) if report is not None else None
    return DensityEvolutionTrace(
        q, tuple(mus), True, mus[-1], len(mus) - 1, label, report
    )


def p_star() -> float:
    """``1/2 - 1/(2 sqrt 3)``: below it the quadratic term of ``G`` at 0 is
    positive and the spinodal drops under the Kesten-Stigum line."""
    return 0.5 - 0.5 / math.sqrt(3.0)


def spinodal(
    p: float,
    tol: float = 1e-8,
    grid_points: int = 400,
    quad_nodes: int = DEFAULT_QUAD_NODES,
) -> float:
    """Spinodal ``lambda_sp(p) = inf_{mu > 0} mu / h(mu)``, capped at 1.

    ``G`` is linear in ``lambda``, so ``lambda h(mu) = mu`` has a positive
    root exactly when ``lambda >= mu / h(mu)`` for some ``mu``. The ratio
    tends to 1 as ``mu -> 0``.
    """
    if not (0.0 < p <= 0.5):
        raise ValueError("p must lie in (0, 1/2]")
    top = 10.0 / (p * (1.0 - p))

    def ratio(mu):
        hv = h_map(mu, p, quad_nodes)
        return mu / hv if hv > 0 else math.inf

    grid = np.geomspace(1e-4, top, grid_points)
    vals = np.array([ratio(m) for m in grid])
    i = int(np.argmin(vals))
    if i == 0:
        return min(1.0, float(vals[0]))
    lo, hi = grid[i - 1], grid[min(i + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(ratio, bounds=(lo, hi), method="bounded",
                                   options={"xatol": tol * max(1.0, grid[i])})
    return float(min(1.0, vals[i], res.fun))


def q_threshold(params: ModelParams, report: FixedPointReport | None = None) -> float:
    """Smallest reveal fraction that lifts ``mu_1`` above ``beta``:
    ``beta p (1-p) / lambda``.

    Only defined between the spinodal and the Kesten-Stigum line, where
    ``G`` has the three fixed points ``0 < beta < alpha``.
    """
    if not (0.0 < params.lam < 1.0):
        raise ValueError("q-threshold needs 0 < lambda < 1")
    report = report or fixed_points(params)
    if report.beta is None or report.alpha is None or not report.zero_stable:
        raise ValueError(
            f"no unstable fixed point beta at p={params.p}, lambda={params.lam}: "
            "lambda is not above the spinodal"
        )
    return report.beta * params.p * (1.0 - params.p) / params.lam


def phase_diagram(p_grid, tol: float = 1e-8, quad_nodes: int = DEFAULT_QUAD_NODES) -> list[dict]:
    """Rows ``{p, lambda_sp, lambda_ks}`` with the Kesten-Stigum line at 1."""
    rows = []
    for p in p_grid:
        rows.append({"p": float(p), "lambda_sp": spinodal(float(p), tol, quad_nodes=quad_nodes),
                     "lambda_ks": 1.0})
    return rows


def limit_params(p: float, lam: float) -> ModelParams:
    """Parameters for the ``d -> inf`` analysis; only ``p`` and ``lambda``
    enter ``G``, so ``d`` is set to a nominal huge value."""
    from .model import derive_params

    return derive_params(p, 1e12, lam)
