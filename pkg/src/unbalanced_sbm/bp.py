"""Exact belief propagation on rooted trees and tree-like balls.

Messages are log-likelihood ratios ``xi = log(nu(1) / nu(2))``. A vertex at
the recursion frontier whose label is revealed carries ``+inf`` (label 1) or
``-inf`` (label 2); the edge map ``f`` sends those to its exact limits
``log(a/b)`` and ``log(b/c)``, so nothing downstream of the frontier is
infinite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from .graphs import Ball, LabeledTree, RevealedSet
from .model import ModelParams

DEFAULT_ENUM_BUDGET = 22


class EnumerationBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class PosteriorPair:
    prob1: float
    prob2: float


@dataclass(frozen=True)
class LocalDecision:
    """Outcome of :func:`local_test`.

    ``method`` is one of ``"tree"``, ``"enumeration"``, ``"bfs_tree"`` or
    ``"prior"``; the last two are approximations and set ``flagged``.
    """

    label: int
    xi: float
    method: str

    @property
    def flagged(self) -> bool:
        return self.method in ("bfs_tree", "prior")


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def f_message(x, params: ModelParams):
    """Edge map ``f(x) = log((a e^x + b) / (b e^x + c))``, vectorized.

    For ``x > 0`` the factor ``e^x`` is cancelled analytically, giving
    ``log(a + b e^{-x}) - log(b + c e^{-x})``, so no large terms are ever
    subtracted. The limits ``f(+inf) = log(a/b)`` and ``f(-inf) = log(b/c)``
    fall out of the same formulas.
    """
    x = np.asarray(x, dtype=float)
    la, lb, lc = _log(params.a), _log(params.b), _log(params.c)
    pos = x > 0
    with np.errstate(invalid="ignore"):
        up = np.logaddexp(la, lb - x) - np.logaddexp(lb, lc - x)
        down = np.logaddexp(la + x, lb) - np.logaddexp(lb + x, lc)
    out = np.where(pos, up, down)
    return out if out.ndim else float(out)


def f_prime(x, params: ModelParams):
    """Derivative of :func:`f_message` for finite ``x``."""
    x = np.asarray(x, dtype=float)
    a, b, c = params.a, params.b, params.c
    s1 = expit(x + _log(a) - _log(b))
    s2 = expit(x + _log(b) - _log(c))
    return s1 - s2


def propagate(parent, depth, xi, top, params):
    """Run the recursion upward from level ``top`` to the root.

    ``xi`` must hold the messages of every vertex at depth ``top``; values
    above that level are overwritten (a childless vertex ends up with ``h``).
    Children are summed per parent in sorted order, which makes the root
    value independent of how siblings are numbered. Returns the root value.
    """
    h = params.h
    n = len(parent)
    xi = np.array(xi, dtype=float)
    for k in range(top, 0, -1):
        kids = np.flatnonzero(depth == k)
        upper = np.flatnonzero(depth == k - 1)
        if len(kids) == 0:
            xi[upper] = h
            continue
        contrib = f_message(xi[kids], params)
        par = parent[kids]
        order = np.lexsort((contrib, par))
        acc = np.bincount(par[order], weights=contrib[order], minlength=n)
        xi[upper] = h + acc[upper]
    return float(xi[0])


def _root_ratio(parent, depth, labels, revealed_mask, r, params):
    keep = depth <= r
    if not keep.all():
        idx = np.flatnonzero(keep)
        remap = np.full(len(parent), -1)
        remap[idx] = np.arange(len(idx))
        par = parent[idx]
        parent = np.where(par >= 0, remap[np.maximum(par, 0)], -1)
        depth, labels, revealed_mask = depth[idx], labels[idx], revealed_mask[idx]
    xi = np.full(len(parent), params.h)
    leaf = (depth == r) & revealed_mask
    xi[leaf] = np.where(labels[leaf] == 1, np.inf, -np.inf)
    return propagate(parent, depth, xi, r, params)


def tree_messages(
    tree: LabeledTree,
    revealed: RevealedSet,
    params: ModelParams,
    r: int | None = None,
) -> float:
    """Root log-ratio after exact message passing down to depth ``r``.

    ``r`` defaults to ``tree.max_depth``; ``revealed`` may only contain
    vertices at depth exactly ``r``. Unrevealed depth-``r`` vertices and
    childless vertices above depth ``r`` both carry the prior ratio ``h``.
    Vertices deeper than ``r`` are ignored.
    """
    r = tree.max_depth if r is None else int(r)
    members = np.asarray(revealed.members)
    if len(members) and np.any(tree.depth[members] != r):
        raise ValueError(f"revealed vertices must sit at depth exactly {r}")
    mask = np.zeros(tree.n_vertices, dtype=bool)
    mask[members] = True
    return _root_ratio(tree.parent, tree.depth, tree.labels, mask, r, params)


def ratio_to_posterior(xi: float) -> PosteriorPair:
    return PosteriorPair(float(expit(xi)), float(expit(-xi)))


def _enumerate(n_vertices, edges, labels, revealed_local, params, budget):
    if n_vertices > budget:
        raise EnumerationBudgetExceeded(
            f"{n_vertices} vertices exceed the enumeration budget of {budget}"
        )
    fixed = {int(v): int(labels[v]) - 1 for v in revealed_local}
    free = [v for v in range(n_vertices) if v not in fixed]
    code = np.arange(2 ** len(free), dtype=np.int64)
    state = {}
    for j, v in enumerate(free):
        state[v] = (code >> j) & 1
    for v, x in fixed.items():
        state[v] = np.full(len(code), x, dtype=np.int64)
    logprior = np.array([_log(params.p), _log(1.0 - params.p)])
    logpsi = np.array([[_log(params.a), _log(params.b)], [_log(params.b), _log(params.c)]])
    logw = np.zeros(len(code))
    for v in range(n_vertices):
        logw += logprior[state[v]]
    for u, v in edges:
        logw += logpsi[state[int(u)], state[int(v)]]
    root_is_one = state[0] == 0
    l1 = logsumexp(logw[root_is_one]) if root_is_one.any() else -np.inf
    l2 = logsumexp(logw[~root_is_one]) if (~root_is_one).any() else -np.inf
    z = np.logaddexp(l1, l2)
    return PosteriorPair(float(np.exp(l1 - z)), float(np.exp(l2 - z)))


def exact_posterior(
    obj: LabeledTree | Ball,
    revealed: RevealedSet,
    params: ModelParams,
    budget: int = DEFAULT_ENUM_BUDGET,
) -> PosteriorPair:
    """Root posterior by brute-force summation over all hidden labelings.

    Each labeling is weighted by ``prod_v p(x_v) * prod_edges psi(x_u, x_v)``,
    which on a tree equals ``p(x_root) * prod R[x_parent, x_child]``. Works for
    balls with cycles as well. Revealed ids are tree vertex ids for a
    :class:`LabeledTree` and global graph ids for a :class:`Ball`.
    """
    if isinstance(obj, LabeledTree):
        n = obj.n_vertices
        edges = np.column_stack([obj.parent[1:], np.arange(1, n)])
        local = np.asarray(revealed.members)
    else:
        n = obj.n_vertices
        edges = obj.edges
        local = obj.local_index(revealed.members) if len(revealed) else np.zeros(0, int)
    return _enumerate(n, edges, obj.labels, local, params, budget)


def tree_test(xi: float, params: ModelParams) -> int:
    """Label 1 iff ``xi >= log(p/(1-p))``; ties go to label 1."""
    return 1 if xi >= params.h else 2


def prior_decision(params: ModelParams) -> int:
    return 2 if params.p < 0.5 else 1


def local_test(
    ball: Ball,
    revealed_boundary: RevealedSet,
    params: ModelParams,
    budget: int = DEFAULT_ENUM_BUDGET,
    cyclic: str = "bfs_tree",
) -> LocalDecision:
    """Classify the ball's center from the ball and its revealed boundary.

    Tree balls are solved exactly by message passing. A ball with a cycle is
    solved by enumeration when it has at most ``budget`` vertices. Beyond
    that, ``cyclic`` picks the fallback: ``"bfs_tree"`` runs message passing
    on the breadth-first spanning tree (dropping the extra edges) and
    ``"prior"`` returns the constant prior decision. Both fallbacks are
    flagged.
    """
    if cyclic not in ("bfs_tree", "prior"):
        raise ValueError(f"unknown cyclic-ball policy {cyclic!r}")
    members = np.asarray(revealed_boundary.members)
    if len(members):
        loc = ball.local_index(members)
        if np.any(ball.depth[loc] != ball.radius):
            raise ValueError("revealed vertices must lie on the boundary sphere")
    else:
        loc = np.zeros(0, dtype=np.int64)
    if ball.is_tree or (cyclic == "bfs_tree" and ball.n_vertices > budget):
        mask = np.zeros(ball.n_vertices, dtype=bool)
        mask[loc] = True
        xi = _root_ratio(ball.parent, ball.depth, ball.labels, mask, ball.radius, params)
        return LocalDecision(tree_test(xi, params), xi, "tree" if ball.is_tree else "bfs_tree")
    if ball.n_vertices <= budget:
        post = _enumerate(ball.n_vertices, ball.edges, ball.labels, loc, params, budget)
        with np.errstate(divide="ignore"):
            xi = float(np.log(post.prob1) - np.log(post.prob2))
        return LocalDecision(tree_test(xi, params), xi, "enumeration")
    return LocalDecision(prior_decision(params), params.h, "prior")
