"""Random labeled graphs: block-model graphs, labeled Poisson Galton-Watson
trees, revealed-label sets and rooted balls.

Vertices are 0-based integers; labels take the values 1 and 2.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _seeding
from .model import ModelParams, transition_matrix

DEFAULT_TREE_BUDGET = 2_000_000
DEFAULT_BALL_BUDGET = 1_000_000
DEFAULT_EDGE_LIMIT = 10_000


class BudgetExceeded(RuntimeError):
    """A sampler or extractor would exceed its configured vertex budget."""


def _csr(n: int, edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if len(edges) == 0:
        return np.zeros(n + 1, dtype=np.int64), np.zeros(0, dtype=np.int64)
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    order = np.lexsort((dst, src))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return indptr, dst[order].astype(np.int64)


@dataclass(frozen=True, eq=False)
class LabeledGraph:
    """Undirected simple graph with a label in {1, 2} per vertex.

    ``edges`` is an ``(m, 2)`` array with ``u < v`` on every row, sorted
    lexicographically.
    """

    n: int
    edges: np.ndarray
    labels: np.ndarray
    indptr: np.ndarray = field(init=False, repr=False)
    indices: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        labels = np.asarray(self.labels, dtype=np.int8)
        if labels.shape != (self.n,):
            raise ValueError("need exactly one label per vertex")
        if np.any((labels != 1) & (labels != 2)):
            raise ValueError("labels must be 1 or 2")
        if len(edges):
            if np.any(edges[:, 0] >= edges[:, 1]):
                raise ValueError("edges must satisfy u < v (no self-loops)")
            if edges.min() < 0 or edges.max() >= self.n:
                raise ValueError("edge endpoint out of range")
            edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
            if np.any(np.all(edges[1:] == edges[:-1], axis=1)):
                raise ValueError("multi-edges are not allowed")
        edges.setflags(write=False)
        labels.setflags(write=False)
        indptr, indices = _csr(self.n, edges)
        indptr.setflags(write=False)
        indices.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]


@dataclass(frozen=True, eq=False)
class LabeledTree:
    """Rooted tree stored generation by generation.

    Vertex 0 is the root and every parent index is smaller than its
    children's, so a reverse sweep over vertex ids is a valid leaves-to-root
    order.
    """

    parent: np.ndarray
    depth: np.ndarray
    labels: np.ndarray
    max_depth: int

    root = 0

    def __post_init__(self):
        for name in ("parent", "depth", "labels"):
            arr = np.array(getattr(self, name), dtype=np.int64 if name != "labels" else np.int8)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = len(self.parent)
        if n == 0 or self.parent[0] != -1 or self.depth[0] != 0:
            raise ValueError("vertex 0 must be the root")
        if len(self.depth) != n or len(self.labels) != n:
            raise ValueError("parent, depth and labels must have equal length")
        if n > 1:
            par = self.parent[1:]
            if np.any(par < 0) or np.any(par >= np.arange(1, n)):
                raise ValueError("parents must precede their children")
            if np.any(self.depth[1:] != self.depth[par] + 1):
                raise ValueError("depth must equal parent depth + 1")
        if self.depth.max() > self.max_depth:
            raise ValueError("vertex deeper than max_depth")

    @property
    def n_vertices(self) -> int:
        return len(self.parent)

    def children(self, v: int) -> np.ndarray:
        return np.flatnonzero(self.parent == v)

    def level(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.depth == k)

    def generation_sizes(self) -> np.ndarray:
        return np.bincount(self.depth, minlength=self.max_depth + 1)


@dataclass(frozen=True, eq=False)
class RevealedSet:
    """Vertices whose true labels are observed, drawn with probability ``q``."""

    q: float
    members: np.ndarray

    def __post_init__(self):
        m = np.unique(np.asarray(self.members, dtype=np.int64))
        m.setflags(write=False)
        object.__setattr__(self, "members", m)

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, v) -> bool:
        i = np.searchsorted(self.members, v)
        return bool(i < len(self.members) and self.members[i] == v)

    def mask(self, n: int) -> np.ndarray:
        out = np.zeros(n, dtype=bool)
        out[self.members] = True
        return out

    def restrict(self, vertices) -> "RevealedSet":
        """Members that also belong to ``vertices``."""
        return RevealedSet(self.q, np.intersect1d(self.members, np.asarray(vertices)))


@dataclass(frozen=True, eq=False)
class Ball:
    """Radius-``r`` neighbourhood of ``center``, in breadth-first order.

    Local index 0 is the center. ``vertices`` maps local to global ids,
    ``parent`` is the breadth-first parent (local ids, ``-1`` at the center),
    and ``edges`` lists every induced edge in local ids (``None`` for balls
    too large to list them). When ``is_tree`` is true the breadth-first
    parents are exactly the edges of the ball.
    """

    center: int
    radius: int
    vertices: np.ndarray
    depth: np.ndarray
    parent: np.ndarray
    labels: np.ndarray
    edges: np.ndarray | None
    is_tree: bool

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def boundary(self) -> np.ndarray:
        """Global ids of the vertices at distance exactly ``radius``."""
        return self.vertices[self.depth == self.radius]

    def local_index(self, global_ids) -> np.ndarray:
        order = np.argsort(self.vertices)
        g = np.asarray(global_ids, dtype=np.int64)
        pos = np.searchsorted(self.vertices, g, sorter=order)
        pos = np.minimum(pos, len(order) - 1)
        loc = order[pos]
        if np.any(self.vertices[loc] != g):
            raise ValueError("vertex not in ball")
        return loc


def _unique_pairs(rng, m, draw, max_rounds=1000):
    """First ``m`` distinct codes from a stream of iid uniform pair draws.

    Keeping first occurrences in draw order makes the result a uniform
    ``m``-subset of all pairs.
    """
    if m == 0:
        return np.zeros(0, dtype=np.int64)
    chunks = []
    have = 0
    for _ in range(max_rounds):
        need = m - have
        chunks.append(draw(rng, int(need * 1.05) + 16))
        codes = np.concatenate(chunks)
        uniq, first = np.unique(codes, return_index=True)
        have = len(uniq)
        if have >= m:
            return codes[np.sort(first)[:m]]
        chunks = [codes[np.sort(first)]]
    raise RuntimeError("edge placement did not terminate")


def _within_block(rng, ids, prob):
    k = len(ids)
    npairs = k * (k - 1) // 2
    if npairs == 0 or prob == 0:
        return np.zeros((0, 2), dtype=np.int64)
    m = int(rng.binomial(npairs, prob))

    def draw(rng, size):
        i = rng.integers(0, k, size=size)
        j = rng.integers(0, k, size=size)
        keep = i != j
        i, j = i[keep], j[keep]
        return np.minimum(i, j) * k + np.maximum(i, j)

    codes = _unique_pairs(rng, m, draw)
    return np.column_stack([ids[codes // k], ids[codes % k]])


def _cross_block(rng, ids1, ids2, prob):
    k1, k2 = len(ids1), len(ids2)
    if k1 == 0 or k2 == 0 or prob == 0:
        return np.zeros((0, 2), dtype=np.int64)
    m = int(rng.binomial(k1 * k2, prob))

    def draw(rng, size):
        return rng.integers(0, k1, size=size) * k2 + rng.integers(0, k2, size=size)

    codes = _unique_pairs(rng, m, draw)
    u, v = ids1[codes // k2], ids2[codes % k2]
    return np.column_stack([np.minimum(u, v), np.maximum(u, v)])


def sample_sbm(params: ModelParams, n: int, seed: int | None = None) -> LabeledGraph:
    """Draw a block-model graph on ``n`` vertices.

    Labels are iid with ``P(X=1) = p``. Rather than scanning all pairs, the
    number of edges inside each label block is drawn from its binomial law
    and the edges are then placed uniformly without repetition, which gives
    exactly the same distribution as independent Bernoulli pairs.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be positive")
    probs = params.M_scale / n
    if probs.max() > 1.0:
        raise ValueError(f"n={n} too small: an entry of M = (d/n)[[a,b],[b,c]] exceeds 1")
    labels = np.where(_seeding.child_rng(seed, _seeding.LABELS).random(n) < params.p, 1, 2)
    ids1 = np.flatnonzero(labels == 1)
    ids2 = np.flatnonzero(labels == 2)
    rng = _seeding.child_rng(seed, _seeding.EDGES)
    edges = np.concatenate([
        _within_block(rng, ids1, probs[0, 0]),
        _cross_block(rng, ids1, ids2, probs[0, 1]),
        _within_block(rng, ids2, probs[1, 1]),
    ])
    return LabeledGraph(n=n, edges=edges, labels=labels.astype(np.int8))


def sample_gw(
    params: ModelParams,
    max_depth: int,
    seed: int | None = None,
    max_vertices: int = DEFAULT_TREE_BUDGET,
) -> LabeledTree:
    """Labeled Poisson(d) Galton-Watson tree truncated at ``max_depth``.

    The root is labeled 1 with probability ``p``; a child of a vertex with
    label ``i`` gets label 1 with probability ``R[i, 1]``.
    """
    if max_depth < 0:
        raise ValueError("max_depth must be nonnegative")
    rng = _seeding.child_rng(seed, _seeding.TREE)
    R = transition_matrix(params)
    parents = [np.array([-1])]
    depths = [np.array([0])]
    labels = [np.array([1 if rng.random() < params.p else 2])]
    gen = np.array([0])
    total = 1
    for k in range(1, max_depth + 1):
        counts = rng.poisson(params.d, size=len(gen))
        m = int(counts.sum())
        if total + m > max_vertices:
            raise BudgetExceeded(
                f"Galton-Watson tree exceeds {max_vertices} vertices at depth {k}"
            )
        if m == 0:
            break
        par = np.repeat(gen, counts)
        p_one = R[labels[-1][np.searchsorted(gen, par)] - 1, 0]
        lab = np.where(rng.random(m) < p_one, 1, 2)
        new = np.arange(total, total + m)
        parents.append(par)
        depths.append(np.full(m, k))
        labels.append(lab)
        gen = new
        total += m
    return LabeledTree(
        parent=np.concatenate(parents),
        depth=np.concatenate(depths),
        labels=np.concatenate(labels),
        max_depth=int(max_depth),
    )


def sample_reveal(eligible, q: float, seed: int | None = None) -> RevealedSet:
    """Keep each eligible vertex independently with probability ``q``."""
    if not (0.0 <= q <= 1.0):
        raise ValueError("q must lie in [0, 1]")
    eligible = np.asarray(eligible, dtype=np.int64)
    rng = _seeding.child_rng(seed, _seeding.REVEAL)
    keep = rng.random(len(eligible)) < q
    return RevealedSet(q=float(q), members=eligible[keep])


def _gather(indptr, indices, verts):
    starts = indptr[verts]
    lens = indptr[verts + 1] - starts
    total = int(lens.sum())
    offs = np.repeat(starts - np.cumsum(lens) + lens, lens) + np.arange(total)
    return indices[offs], np.repeat(verts, lens)


def extract_ball(
    graph: LabeledGraph,
    center: int,
    r: int,
    max_vertices: int = DEFAULT_BALL_BUDGET,
    edge_limit: int = DEFAULT_EDGE_LIMIT,
) -> Ball:
    """Breadth-first ball of radius ``r`` around ``center``.

    Cycles are detected during the search: an incidence from a frontier
    vertex to an already visited vertex other than its parent, or a new
    vertex reached from two frontier vertices, closes a cycle. Induced edges
    are listed only for balls of at most ``edge_limit`` vertices (``edges``
    is ``None`` otherwise). Raises :class:`BudgetExceeded` instead of
    truncating when the ball would hold more than ``max_vertices`` vertices.
    """
    center = int(center)
    if not (0 <= center < graph.n):
        raise ValueError("center is not a vertex of the graph")
    if r < 0:
        raise ValueError("radius must be nonnegative")
    loc = np.full(graph.n, -1, dtype=np.int64)
    loc[center] = 0
    verts = [np.array([center])]
    parents = [np.array([-1])]
    depths = [np.array([0])]
    frontier = verts[0]
    frontier_parent = np.array([-1])
    count = 1
    cyclic = False

    def closes_cycle(seen):
        # incidences into the ball, minus the one parent incidence per vertex
        return seen.sum() > np.count_nonzero(frontier_parent >= 0)

    for k in range(1, r + 1):
        nb, src = _gather(graph.indptr, graph.indices, frontier)
        seen = loc[nb] >= 0
        if not cyclic and closes_cycle(seen):
            cyclic = True
        fresh = ~seen
        new, first = np.unique(nb[fresh], return_index=True)
        if not cyclic and len(new) < np.count_nonzero(fresh):
            cyclic = True
        if count + len(new) > max_vertices:
            raise BudgetExceeded(f"ball of radius {r} exceeds {max_vertices} vertices")
        if len(new) == 0:
            frontier = new
            frontier_parent = np.zeros(0, dtype=np.int64)
            break
        loc[new] = np.arange(count, count + len(new))
        par = loc[src[fresh][first]]
        verts.append(new)
        parents.append(par)
        depths.append(np.full(len(new), k))
        frontier = new
        frontier_parent = par
        count += len(new)
    if not cyclic and len(frontier):
        nb, src = _gather(graph.indptr, graph.indices, frontier)
        cyclic = closes_cycle(loc[nb] >= 0)
    vertices = np.concatenate(verts)
    edges = None
    if len(vertices) <= edge_limit:
        nb, src = _gather(graph.indptr, graph.indices, vertices)
        lu, lv = loc[src], loc[nb]
        keep = (lv >= 0) & (lu < lv)
        edges = np.column_stack([lu[keep], lv[keep]])
    return Ball(
        center=center,
        radius=int(r),
        vertices=vertices,
        depth=np.concatenate(depths),
        parent=np.concatenate(parents),
        labels=graph.labels[vertices],
        edges=edges,
        is_tree=not cyclic,
    )
