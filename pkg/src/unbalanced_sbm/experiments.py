"""Monte Carlo validation: cavity population dynamics, the Nishimori
identity, and success-probability estimates on trees and block-model graphs.

Success is always the rescaled class-conditional quantity
``P(T=1 | X=1) + P(T=2 | X=2) - 1``, estimated from the empirical
frequencies within each true class, so any constant classifier scores
exactly zero.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import expit

from . import _seeding
from .bp import f_message, local_test, propagate, tree_test
from .graphs import (
    DEFAULT_BALL_BUDGET,
    RevealedSet,
    extract_ball,
    sample_gw,
    sample_reveal,
    sample_sbm,
)
from .model import ModelParams, transition_matrix

# Above this many expected vertices a tree's last generation is not built;
# revealed frontier children are drawn directly by Poisson thinning.
FULL_TREE_LIMIT = 200_000


@dataclass(frozen=True)
class MessageSamplePair:
    """Pools representing the laws of the root message given root label 1
    (``xi1``) and label 2 (``xi2``) after ``r`` generations.

    ``parents`` holds the two pools the last generation was resampled from,
    or ``None`` when every sample was drawn independently.
    """

    xi1: np.ndarray
    xi2: np.ndarray
    r: int
    q: float
    params: ModelParams
    parents: tuple | None = None


@dataclass(frozen=True)
class EstimateReport:
    estimate: float
    stderr: float
    n_samples: int
    flagged_fraction: float = 0.0
    n_class1: int = 0
    n_class2: int = 0
    nontree_fraction: float = 0.0
    workers: int = 1
    config: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "stderr": self.stderr,
            "n_samples": self.n_samples,
            "n_class1": self.n_class1,
            "n_class2": self.n_class2,
            "flagged_fraction": self.flagged_fraction,
            "nontree_fraction": self.nontree_fraction,
            "workers": self.workers,
            "config": self.config,
        }


def rescaled_success(decisions, truth) -> tuple[float, float, int, int]:
    """Class-conditional success estimate and its standard error.

    Returns ``(estimate, stderr, n1, n2)`` where the standard error combines
    the two binomial proportions, ``sqrt(s1^2/n1 + s2^2/n2)`` with sample
    variances ``s^2``.
    """
    decisions = np.asarray(decisions)
    truth = np.asarray(truth)
    hit1 = decisions[truth == 1] == 1
    hit2 = decisions[truth == 2] == 2
    n1, n2 = len(hit1), len(hit2)
    if n1 == 0 or n2 == 0:
        raise ValueError("both root classes must be sampled at least once; increase reps")
    est = hit1.mean() + hit2.mean() - 1.0
    var = 0.0
    for hits, n in ((hit1, n1), (hit2, n2)):
        if n > 1:
            var += hits.var(ddof=1) / n
    return float(est), math.sqrt(var), n1, n2


def _pmap(fn, items, workers):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


# -- population dynamics ----------------------------------------------------

def _sum_of_draws(rng, counts, values, chunk):
    """For each slot ``i``, the sum of ``counts[i]`` uniform draws from ``values``."""
    out = np.zeros(len(counts))
    for lo in range(0, len(counts), chunk):
        c = counts[lo:lo + chunk]
        total = int(c.sum())
        if total == 0:
            continue
        picks = values[rng.integers(0, len(values), size=total)]
        slot = np.repeat(np.arange(len(c)), c)
        out[lo:lo + chunk] = np.bincount(slot, weights=picks, minlength=len(c))
    return out


def _offspring_means(params):
    p, d = params.p, params.d
    return ((p * params.a * d, (1 - p) * params.b * d),
            (p * params.b * d, (1 - p) * params.c * d))


def _first_generation(rng, params, q, label, size):
    """Independent depth-1 messages: revealed children of each label are
    Poisson thinned, unrevealed ones contribute ``f(h) = 0``."""
    means = _offspring_means(params)[label - 1]
    n1 = rng.poisson(q * means[0], size)
    n2 = rng.poisson(q * means[1], size)
    return params.h + n1 * f_message(np.inf, params) + n2 * f_message(-np.inf, params)


def _fresh_sum(rng, params, q, counts, label, chunk):
    """Like :func:`_sum_of_draws`, but every summand is a fresh depth-1 message."""
    out = np.zeros(len(counts))
    for lo in range(0, len(counts), chunk):
        c = counts[lo:lo + chunk]
        total = int(c.sum())
        if total == 0:
            continue
        vals = f_message(_first_generation(rng, params, q, label, total), params)
        slot = np.repeat(np.arange(len(c)), c)
        out[lo:lo + chunk] = np.bincount(slot, weights=vals, minlength=len(c))
    return out


def population_dynamics(
    params: ModelParams,
    q: float,
    r: int,
    pool: int = 100_000,
    seed: int | None = None,
    exact_generations: int = 2,
    chunk: int = 20_000,
) -> MessageSamplePair:
    """Sample the class-conditional message laws by population dynamics.

    Generation 0 holds ``+inf`` (pool 1) or ``-inf`` (pool 2) with probability
    ``q`` and ``h`` otherwise. Each later generation resamples, with
    replacement, from the previous pools:

        xi1 = h + sum_{Poi(p a d)} f(xi1') + sum_{Poi((1-p) b d)} f(xi2')
        xi2 = h + sum_{Poi(p b d)} f(xi1') + sum_{Poi((1-p) c d)} f(xi2')

    The first ``exact_generations`` generations (at most 2) are instead drawn
    independently from their exact laws, which are cheap to sample. This
    matters at large ``d``: every member of a generation shares the same
    finite parent pool, and the parent pool's sampling error is multiplied
    by roughly ``sqrt(lam d)`` at each step. With ``exact_generations=0``
    every step resamples.
    """
    if pool < 1000:
        raise ValueError("pool must hold at least 1000 samples")
    if not (0.0 <= q <= 1.0):
        raise ValueError("q must lie in [0, 1]")
    if r < 0:
        raise ValueError("r must be non-negative")
    if exact_generations not in (0, 1, 2):
        raise ValueError("exact_generations must be 0, 1 or 2")
    rng = _seeding.child_rng(seed, _seeding.POOL)
    h = params.h
    (m11, m12), (m21, m22) = _offspring_means(params)
    start = min(r, exact_generations)
    if start == 0:
        xi1 = np.where(rng.random(pool) < q, np.inf, h)
        xi2 = np.where(rng.random(pool) < q, -np.inf, h)
    elif start == 1:
        xi1 = _first_generation(rng, params, q, 1, pool)
        xi2 = _first_generation(rng, params, q, 2, pool)
    else:
        xi1 = (h + _fresh_sum(rng, params, q, rng.poisson(m11, pool), 1, chunk)
               + _fresh_sum(rng, params, q, rng.poisson(m12, pool), 2, chunk))
        xi2 = (h + _fresh_sum(rng, params, q, rng.poisson(m21, pool), 1, chunk)
               + _fresh_sum(rng, params, q, rng.poisson(m22, pool), 2, chunk))
    parents = None
    for _ in range(start, r):
        f1 = f_message(xi1, params)
        f2 = f_message(xi2, params)
        new1 = (h + _sum_of_draws(rng, rng.poisson(m11, pool), f1, chunk)
                + _sum_of_draws(rng, rng.poisson(m12, pool), f2, chunk))
        new2 = (h + _sum_of_draws(rng, rng.poisson(m21, pool), f1, chunk)
                + _sum_of_draws(rng, rng.poisson(m22, pool), f2, chunk))
        parents = (xi1, xi2)
        xi1, xi2 = new1, new2
    return MessageSamplePair(xi1=xi1, xi2=xi2, r=int(r), q=float(q), params=params,
                             parents=parents)


def gaussian_moments(pair: MessageSamplePair) -> dict:
    """Sample mean, variance and their standard errors for pool 1."""
    x = pair.xi1[np.isfinite(pair.xi1)]
    n = len(x)
    var = x.var(ddof=1)
    m4 = np.mean((x - x.mean()) ** 4)
    return {
        "mean": float(x.mean()),
        "mean_stderr": float(math.sqrt(var / n)),
        "var": float(var),
        "var_stderr": float(math.sqrt(max(m4 - var * var, 0.0) / n)),
        "n": n,
    }


# -- Nishimori identity -----------------------------------------------------

def default_battery(params: ModelParams) -> dict:
    h = params.h
    return {
        "one": lambda x: np.ones_like(x),
        "sigmoid": lambda x: expit(x),
        "above_h": lambda x: (x > h).astype(float),
    }


def _pool_variance_of_weight(pair: MessageSamplePair) -> float:
    """Variance of ``p/(1-p) E[e^{-xi1} | parent pools]`` due to the finite
    parent pools (delta method on its closed form).

    Given the parent pools, ``e^{-xi1}`` has conditional mean
    ``e^{-h} exp(sum_j m_j (E_j[e^{-f}] - 1))`` with ``m_j`` the offspring
    means of a label-1 vertex and ``E_j`` the empirical parent-pool mean,
    so each parent mean's sampling error propagates with weight ``m_j``.
    """
    params = pair.params
    var = 0.0
    expo = 0.0
    for m, prev in zip(_offspring_means(params)[0], pair.parents):
        e = np.exp(-f_message(prev, params))
        expo += m * (e.mean() - 1.0)
        var += m * m * e.var(ddof=1) / len(e)
    cond = params.p / (1 - params.p) * math.exp(-params.h + expo)
    return cond * cond * var


def _pool_variance_of_difference(pair: MessageSamplePair, lhs_fn, rhs_fn, partners=32,
                                 seed=0) -> float:
    """Parent-pool contribution to the variance of ``mean(lhs) - mean(rhs)``.

    A parent sample ``y`` of class ``j`` enters a class-``i`` output through
    ``Poi(m_ij)`` children, so by the delta method its influence on
    ``E[phi(xi_i)]`` is ``m_ij E[phi(xi_i + f(y)) - phi(xi_i)]``. The inner
    expectation is estimated twice per ``y`` from disjoint sets of random
    output samples; the covariance of the two estimates across ``y`` is an
    unbiased estimate of the influence variance.
    """
    rng = np.random.default_rng(seed)
    means = _offspring_means(pair.params)
    half = max(partners // 2, 1)
    var = 0.0
    for j, prev in enumerate(pair.parents):
        fy = f_message(prev, pair.params)[:, None]
        est = []
        for _ in range(2):
            x1 = pair.xi1[rng.integers(0, len(pair.xi1), size=(len(prev), half))]
            x2 = pair.xi2[rng.integers(0, len(pair.xi2), size=(len(prev), half))]
            est.append(means[1][j] * (lhs_fn(x2 + fy) - lhs_fn(x2)).mean(axis=1)
                       - means[0][j] * (rhs_fn(x1 + fy) - rhs_fn(x1)).mean(axis=1))
        a, b = est
        cov = np.mean((a - a.mean()) * (b - b.mean())) * len(a) / (len(a) - 1)
        var += max(cov, 0.0) / len(prev)
    return var


def nishimori_terms(pair: MessageSamplePair, test_functions: dict | None = None) -> list[dict]:
    """Both sides of ``E g(xi2) = p/(1-p) E[g(xi1) e^{-xi1}]`` per test function.

    An ``xi1 = +inf`` atom contributes 0 to the right-hand side. Each entry
    reports both sides, the standard error of their difference, and ``z``,
    the discrepancy in standard-error units. When the pools were resampled
    from parent pools, the standard error includes the error inherited from
    those finite parents (all outputs share them, so treating pool members as
    independent would understate it); for constant ``g`` this term is exact.
    """
    p = pair.params.p
    ratio = p / (1.0 - p)
    xi1, xi2 = pair.xi1, pair.xi2
    if np.any(xi1 == -np.inf):
        raise ValueError("pool 1 holds a -inf message, impossible under root label 1")
    fns = test_functions or default_battery(pair.params)
    out = []
    for name, g in fns.items():
        def lhs_fn(x, g=g):
            return np.asarray(g(x), dtype=float) * np.ones(np.shape(x))

        def rhs_fn(x, g=g):
            with np.errstate(over="ignore", invalid="ignore"):
                val = lhs_fn(x, g) * np.exp(-x)
            return ratio * np.where(x == np.inf, 0.0, val)

        lhs = lhs_fn(xi2)
        rhs = rhs_fn(xi1)
        diff = lhs.mean() - rhs.mean()
        var = lhs.var(ddof=1) / len(lhs) + rhs.var(ddof=1) / len(rhs)
        if pair.parents is not None:
            g1 = lhs_fn(xi1)
            if np.all(lhs == lhs[0]) and np.all(g1 == lhs[0]):
                var += lhs[0] ** 2 * _pool_variance_of_weight(pair)
            else:
                var += _pool_variance_of_difference(pair, lhs_fn, rhs_fn)
        se = math.sqrt(var)
        if se > 0:
            z = abs(diff) / se
        else:
            z = 0.0 if abs(diff) <= 1e-12 * max(1.0, abs(lhs.mean())) else math.inf
        out.append({"name": name, "lhs": float(lhs.mean()), "rhs": float(rhs.mean()),
                    "stderr": se, "z": float(z)})
    return out


def nishimori_check(pair: MessageSamplePair, test_functions: dict | None = None) -> float:
    """Largest Nishimori discrepancy over the battery, in standard errors."""
    return max(t["z"] for t in nishimori_terms(pair, test_functions))


# -- trees ------------------------------------------------------------------

def _thinned_root_ratio(params, q, depth, seed):
    """Root message of a tree whose depth-``depth`` generation is not built.

    Unrevealed frontier children contribute ``f(h) = 0`` (a consequence of
    the balance constraint), so each depth-``depth-1`` vertex only needs the
    number of revealed children of each label: ``Poi(q d R[x, j])``.
    """
    tree = sample_gw(params, depth - 1, seed=seed)
    rng = _seeding.child_rng(seed, _seeding.REVEAL)
    R = transition_matrix(params)
    xi = np.full(tree.n_vertices, params.h)
    last = np.flatnonzero(tree.depth == depth - 1)
    lab = tree.labels[last] - 1
    n1 = rng.poisson(q * params.d * R[lab, 0])
    n2 = rng.poisson(q * params.d * R[lab, 1])
    xi[last] = params.h + n1 * f_message(np.inf, params) + n2 * f_message(-np.inf, params)
    return propagate(tree.parent, tree.depth, xi, depth - 1, params), int(tree.labels[0])


def _full_root_ratio(params, q, depth, seed):
    tree = sample_gw(params, depth, seed=seed)
    rev = sample_reveal(tree.level(depth), q, seed=seed)
    xi = np.full(tree.n_vertices, params.h)
    m = rev.members
    xi[m] = np.where(tree.labels[m] == 1, np.inf, -np.inf)
    return propagate(tree.parent, tree.depth, xi, depth, params), int(tree.labels[0])


def sample_tree_messages(
    params: ModelParams,
    q: float,
    depth: int,
    reps: int,
    seed: int | None = None,
    workers: int = 1,
    method: str = "auto",
) -> tuple[np.ndarray, np.ndarray]:
    """Root messages and root labels of ``reps`` independent labeled trees.

    ``method="full"`` samples whole trees; ``"thinned"`` skips building the
    last generation (same law, far cheaper at large ``d``); ``"auto"`` picks
    ``thinned`` once ``d^depth`` exceeds :data:`FULL_TREE_LIMIT`.
    """
    if method == "auto":
        method = "thinned" if depth >= 1 and params.d ** depth > FULL_TREE_LIMIT else "full"
    if method not in ("full", "thinned"):
        raise ValueError(f"unknown method {method!r}")
    if method == "thinned" and depth < 1:
        raise ValueError("thinned sampling needs depth >= 1")
    one = _thinned_root_ratio if method == "thinned" else _full_root_ratio
    results = _pmap(
        lambda i: one(params, q, depth, _seeding.child_seed(seed, _seeding.REPLICA, i)),
        range(reps), workers,
    )
    xi = np.array([x for x, _ in results])
    labels = np.array([lab for _, lab in results])
    return xi, labels


def estimate_psucc_tree(
    params: ModelParams,
    q: float,
    depth: int,
    reps: int,
    seed: int | None = None,
    workers: int = 1,
    classifier=None,
    method: str = "auto",
) -> EstimateReport:
    """Success of the optimal tree test (or ``classifier(xi, params)``) when
    each depth-``depth`` label is revealed with probability ``q``."""
    if reps < 100:
        raise ValueError("reps must be at least 100")
    classifier = classifier or tree_test
    xi, labels = sample_tree_messages(params, q, depth, reps, seed, workers, method)
    decisions = np.array([classifier(x, params) for x in xi])
    est, se, n1, n2 = rescaled_success(decisions, labels)
    return EstimateReport(
        estimate=est, stderr=se, n_samples=reps, n_class1=n1, n_class2=n2, workers=workers,
        config={"p": params.p, "d": params.d, "lambda": params.lam, "q": q, "depth": depth,
                "reps": reps, "seed": seed, "method": method},
    )


# -- block-model graphs -----------------------------------------------------

def estimate_psucc_sbm(
    params: ModelParams,
    n: int,
    q: float,
    r: int,
    reps: int,
    seed: int | None = None,
    graphs: int = 1,
    workers: int = 1,
    budget: int = 22,
    cyclic: str = "bfs_tree",
    max_ball: int = DEFAULT_BALL_BUDGET,
    classifier=None,
) -> EstimateReport:
    """Success of the radius-``r`` local test on sampled block-model graphs.

    Each graph gets its own reveal set (every vertex independently with
    probability ``q``); ``reps`` centers are drawn uniformly with
    replacement, split evenly across ``graphs``. Only revealed labels on the
    boundary sphere of a center's ball are used. With ``classifier`` given,
    the decision is ``classifier(ball, revealed_boundary, params)`` instead.
    """
    if n < 1000:
        raise ValueError("n must be at least 1000")
    per_graph = [reps // graphs + (1 if g < reps % graphs else 0) for g in range(graphs)]
    decisions, truth, methods = [], [], []
    for g, count in enumerate(per_graph):
        gseed = _seeding.child_seed(seed, _seeding.REPLICA, g)
        graph = sample_sbm(params, n, seed=gseed)
        revealed = sample_reveal(np.arange(n), q, seed=gseed).mask(n)
        centers = _seeding.child_rng(seed, _seeding.CENTERS, g).integers(0, n, size=count)

        def decide(center, graph=graph, revealed=revealed):
            ball = extract_ball(graph, center, r, max_vertices=max_ball)
            bnd = ball.boundary
            rev = RevealedSet(q, bnd[revealed[bnd]])
            if classifier is not None:
                return classifier(ball, rev, params), "custom"
            out = local_test(ball, rev, params, budget=budget, cyclic=cyclic)
            return out.label, out.method

        for (label, method), c in zip(_pmap(decide, centers, workers), centers):
            decisions.append(label)
            truth.append(int(graph.labels[c]))
            methods.append(method)
    methods = np.array(methods)
    est, se, n1, n2 = rescaled_success(decisions, truth)
    return EstimateReport(
        estimate=est, stderr=se, n_samples=reps, n_class1=n1, n_class2=n2,
        flagged_fraction=float(np.isin(methods, ["bfs_tree", "prior"]).mean()),
        nontree_fraction=float(np.isin(methods, ["bfs_tree", "prior", "enumeration"]).mean()),
        workers=workers,
        config={"p": params.p, "d": params.d, "lambda": params.lam, "n": n, "q": q, "r": r,
                "reps": reps, "seed": seed, "graphs": graphs, "budget": budget,
                "cyclic": cyclic},
    )


# -- diagnostics ------------------------------------------------------------

def local_convergence(
    params: ModelParams,
    n: int,
    r: int,
    centers: int,
    seed: int | None = None,
    graphs: int = 1,
) -> dict:
    """Tree-likeness of radius-``r`` balls in a sampled graph.

    Centers are distinct vertices whenever ``centers <= n``. Returns the
    fraction of sampled centers whose ball is a tree (with its binomial
    standard error) and the root degrees of all sampled balls and of the
    tree balls only. Conditioning on a tree ball favors low-degree roots,
    an effect that vanishes as ``n`` grows.
    """
    per_graph = [centers // graphs + (1 if g < centers % graphs else 0) for g in range(graphs)]
    is_tree, degrees = [], []
    for g, count in enumerate(per_graph):
        graph = sample_sbm(params, n, seed=_seeding.child_seed(seed, _seeding.REPLICA, g))
        deg = graph.degrees()
        crng = _seeding.child_rng(seed, _seeding.CENTERS, g)
        for c in crng.choice(n, size=count, replace=count > n):
            ball = extract_ball(graph, c, r, edge_limit=0)
            is_tree.append(ball.is_tree)
            degrees.append(int(deg[c]))
    is_tree = np.array(is_tree)
    degrees = np.array(degrees)
    frac = float(is_tree.mean())
    return {
        "n": n,
        "r": r,
        "tree_fraction": frac,
        "stderr": math.sqrt(frac * (1 - frac) / len(is_tree)),
        "root_degrees": degrees,
        "tree_root_degrees": degrees[is_tree],
    }


def poisson_chisquare(samples, mean: float, min_expected: float = 5.0) -> tuple[float, float]:
    """Chi-square goodness of fit of integer samples to ``Poi(mean)``.

    Cells are merged from both tails until each expects at least
    ``min_expected`` counts. Returns ``(statistic, p_value)``.
    """
    samples = np.asarray(samples, dtype=np.int64)
    n = len(samples)
    kmax = int(max(samples.max(), stats.poisson.isf(1e-9, mean)))
    probs = stats.poisson.pmf(np.arange(kmax + 1), mean)
    probs[-1] += stats.poisson.sf(kmax, mean)
    counts = np.bincount(samples, minlength=kmax + 1).astype(float)
    # merge cells left to right, then fold an underfull last cell backwards
    cells_p, cells_c = [], []
    acc_p = acc_c = 0.0
    for pk, ck in zip(probs, counts):
        acc_p += pk
        acc_c += ck
        if acc_p * n >= min_expected:
            cells_p.append(acc_p)
            cells_c.append(acc_c)
            acc_p = acc_c = 0.0
    if acc_p > 0 or acc_c > 0:
        cells_p[-1] += acc_p
        cells_c[-1] += acc_c
    exp = np.array(cells_p) * n
    res = stats.chisquare(np.array(cells_c), exp * (np.sum(cells_c) / exp.sum()))
    return float(res.statistic), float(res.pvalue)


def ks_to_gaussian(samples, mean: float, var: float) -> float:
    """Kolmogorov-Smirnov distance between samples and ``N(mean, var)``."""
    x = np.asarray(samples, dtype=float)
    x = x[np.isfinite(x)]
    return float(stats.kstest(x, "norm", args=(mean, math.sqrt(var))).statistic)


def empirical_tv(xi1, xi2) -> float:
    """Total-variation distance between the empirical laws of two samples of
    a discrete statistic (values matched exactly)."""
    xi1, xi2 = np.asarray(xi1), np.asarray(xi2)
    vals = np.unique(np.concatenate([xi1, xi2]))
    c1 = np.searchsorted(vals, xi1)
    c2 = np.searchsorted(vals, xi2)
    f1 = np.bincount(c1, minlength=len(vals)) / len(xi1)
    f2 = np.bincount(c2, minlength=len(vals)) / len(xi2)
    return float(0.5 * np.abs(f1 - f2).sum())


def best_threshold_success(xi1, xi2) -> float:
    """Largest empirical ``P(xi1 >= t) + P(xi2 < t) - 1`` over thresholds ``t``."""
    xi1, xi2 = np.sort(np.asarray(xi1)), np.sort(np.asarray(xi2))
    cuts = np.unique(np.concatenate([xi1, xi2, [np.inf]]))
    above1 = 1.0 - np.searchsorted(xi1, cuts, side="left") / len(xi1)
    below2 = np.searchsorted(xi2, cuts, side="left") / len(xi2)
    return float(np.max(above1 + below2 - 1.0))
