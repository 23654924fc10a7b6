"""
Finite weighted rooted trees.

Vertices are stored in breadth-first order with contiguous integer indices:
the root is index 0, every level occupies a contiguous index range, and the
children of a vertex are contiguous and keep their input order.  Every
aggregate used downstream (subtree sums, root-path sums) is a single sweep
over the level ranges, vectorized per level.

Vertex functions are plain float arrays of length ``vertex_count`` indexed by
BFS position.  Entry 0 belongs to the root; Dirichlet functions must hold an
exact zero there, and no formula ever reads the root's vertex weight.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

P_MIN = 1.01
P_MAX = 100.0


class TreeError(ValueError):
    """Invalid tree input or an out-of-range structural query."""


@dataclass(frozen=True)
class PExponent:
    """The exponent ``p`` together with its conjugate ``p_hat = p / (p - 1)``."""

    p: float
    p_hat: float = field(init=False)

    def __post_init__(self):
        p = float(self.p)
        if not math.isfinite(p) or not P_MIN <= p <= P_MAX:
            raise ValueError(f"p must lie in [{P_MIN}, {P_MAX}], got {self.p!r}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "p_hat", p / (p - 1.0))


def as_exponent(p: float | PExponent) -> PExponent:
    return p if isinstance(p, PExponent) else PExponent(p)


class WeightedTree:
    """A finite rooted tree with vertex weights ``mu`` and edge weights ``nu``.

    ``nu[i]`` is the weight of the edge joining ``i`` to its parent, so
    ``nu[0]`` is undefined (stored as NaN and never read).  ``mu[0]`` is kept
    for round-tripping but is likewise never read.

    Instances are immutable; the arrays are flagged read-only.

    Attributes
    ----------
    ids : tuple of str
        External vertex labels in BFS order.
    parent : (n,) int array
        Parent index, ``-1`` for the root.
    level : (n,) int array
        Distance to the root.
    mu, nu : (n,) float arrays
    n_children : (n,) int array
    child_start : (n,) int array
        Index of the first child; children of ``i`` are
        ``range(child_start[i], child_start[i] + n_children[i])``.
    level_bounds : (N + 2,) int array
        Level ``l`` occupies indices ``level_bounds[l]:level_bounds[l + 1]``.
    max_level : int
        ``N``, the maximal level.
    """

    def __init__(self, ids, parent, mu, nu):
        parent = np.asarray(parent, dtype=np.int64)
        n = parent.size
        if n < 2:
            raise TreeError("root has no child")
        if parent[0] != -1 or np.any(parent[1:] < 0) or np.any(parent[1:] >= np.arange(1, n)):
            raise TreeError("parent array is not in BFS order")
        if np.any(np.diff(parent[1:]) < 0):
            raise TreeError("children are not grouped by parent in BFS order")
        level = np.zeros(n, dtype=np.int64)
        for i in range(1, n):
            level[i] = level[parent[i]] + 1
        if np.any(np.diff(level) < 0):
            raise TreeError("levels are not contiguous in BFS order")

        mu = np.array(mu, dtype=float)
        nu = np.array(nu, dtype=float)
        nu[0] = np.nan
        if not (np.all(np.isfinite(mu[1:])) and np.all(mu[1:] > 0)):
            bad = int(np.flatnonzero(~(np.isfinite(mu[1:]) & (mu[1:] > 0)))[0]) + 1
            raise TreeError(f"nonpositive or non-finite weight mu at vertex {ids[bad]!r}")
        if not (np.all(np.isfinite(nu[1:])) and np.all(nu[1:] > 0)):
            bad = int(np.flatnonzero(~(np.isfinite(nu[1:]) & (nu[1:] > 0)))[0]) + 1
            raise TreeError(f"nonpositive or non-finite weight nu at vertex {ids[bad]!r}")

        n_children = np.bincount(parent[1:], minlength=n).astype(np.int64)
        child_start = np.zeros(n, dtype=np.int64)
        # children of i start right after all children of vertices < i
        child_start[:] = 1 + np.concatenate(([0], np.cumsum(n_children)[:-1]))
        max_level = int(level[-1])
        level_bounds = np.searchsorted(level, np.arange(max_level + 2), side="left")

        self.ids = tuple(str(x) for x in ids)
        if len(self.ids) != n:
            raise TreeError("ids and parent lengths differ")
        self.parent = parent
        self.level = level
        self.mu = mu
        self.nu = nu
        self.n_children = n_children
        self.child_start = child_start
        self.level_bounds = level_bounds
        self.max_level = max_level
        for arr in (parent, level, mu, nu, n_children, child_start, level_bounds):
            arr.setflags(write=False)
        self._index = {name: k for k, name in enumerate(self.ids)}
        if len(self._index) != n:
            raise TreeError("duplicate vertex id")

    @property
    def vertex_count(self) -> int:
        return self.parent.size

    def __len__(self):
        return self.parent.size

    def __repr__(self):
        return f"WeightedTree(vertex_count={self.vertex_count}, max_level={self.max_level})"

    def index(self, vertex) -> int:
        """BFS index of ``vertex``, given either as an id string or an index."""
        if isinstance(vertex, (int, np.integer)) and not isinstance(vertex, bool):
            if 0 <= vertex < self.vertex_count:
                return int(vertex)
            raise TreeError(f"unknown vertex {vertex!r}")
        try:
            return self._index[str(vertex)]
        except KeyError:
            raise TreeError(f"unknown vertex {vertex!r}") from None

    def children(self, i) -> range:
        i = self.index(i)
        start = int(self.child_start[i])
        return range(start, start + int(self.n_children[i]))

    def level_slice(self, n: int) -> slice:
        return slice(int(self.level_bounds[n]), int(self.level_bounds[n + 1]))

    def branch(self) -> np.ndarray:
        """Index of the level-1 ancestor of every vertex (0 for the root)."""
        out = np.arange(self.vertex_count)
        out[0] = 0
        for lv in range(2, self.max_level + 1):
            sl = self.level_slice(lv)
            out[sl] = out[self.parent[sl]]
        return out

    # -- aggregate kernels -------------------------------------------------

    def subtree_sum(self, x) -> np.ndarray:
        """Return ``S[i] = sum_{j in V_i} x[j]`` for every non-root ``i``.

        ``x[0]`` is ignored; ``S[0]`` is the sum over all non-root vertices.
        """
        s = np.array(x, dtype=float)
        s[0] = 0.0
        bounds = self.level_bounds
        for lv in range(self.max_level, 0, -1):
            lo, hi = int(bounds[lv]), int(bounds[lv + 1])
            plo, phi = int(bounds[lv - 1]), int(bounds[lv])
            s[plo:phi] += np.bincount(self.parent[lo:hi] - plo, weights=s[lo:hi], minlength=phi - plo)
        return s

    def path_sum(self, x) -> np.ndarray:
        """Return ``P[i] = sum_{k in P(i)} x[k]``, the root excluded; ``P[0] = 0``."""
        s = np.array(x, dtype=float)
        s[0] = 0.0
        bounds = self.level_bounds
        for lv in range(2, self.max_level + 1):
            lo, hi = int(bounds[lv]), int(bounds[lv + 1])
            s[lo:hi] += s[self.parent[lo:hi]]
        return s

    def increments(self, f) -> np.ndarray:
        """``f[i] - f[parent(i)]`` for non-root ``i``; entry 0 is 0."""
        f = np.asarray(f, dtype=float)
        d = np.zeros_like(f)
        d[1:] = f[1:] - f[self.parent[1:]]
        return d


@dataclass(frozen=True)
class DerivedWeights:
    """Exponent-dependent aggregates of a tree.

    ``nu_hat[i] = nu[i] ** (1 - p_hat)``, ``subtree_mu[i] = mu(V_i)``,
    ``path_nu_hat[i]`` is the ``nu_hat`` sum over ``P(i)`` and
    ``phi = path_nu_hat ** (p - 1)``.  Root entries are 0 except
    ``subtree_mu[0]``, the non-root total.
    """

    exponent: PExponent
    nu_hat: np.ndarray
    subtree_mu: np.ndarray
    path_nu_hat: np.ndarray
    phi: np.ndarray


def build_tree(entries: Iterable[Sequence]) -> WeightedTree:
    """Validate ``(id, parent_id_or_None, mu, nu_or_None)`` records into a tree.

    Vertices are re-indexed in BFS order; children keep their input order.

    Raises
    ------
    TreeError
        On duplicate ids, zero or several roots, an unknown parent, a cycle,
        a missing or nonpositive weight, or a root without children.
    """
    records = []
    seen = set()
    for rec in entries:
        if len(rec) != 4:
            raise TreeError(f"expected (id, parent, mu, nu), got {rec!r}")
        vid, par, mu, nu = rec
        vid = str(vid)
        if vid in seen:
            raise TreeError(f"duplicate vertex id {vid!r}")
        seen.add(vid)
        records.append((vid, None if par is None else str(par), mu, nu))

    roots = [r[0] for r in records if r[1] is None]
    if not roots:
        raise TreeError("no root: every vertex has a parent (cycle detected)")
    if len(roots) > 1:
        raise TreeError(f"multiple roots: {roots}")

    children: dict[str, list[str]] = {r[0]: [] for r in records}
    info = {}
    for vid, par, mu, nu in records:
        if par is not None:
            if par not in children:
                raise TreeError(f"unknown parent {par!r} of vertex {vid!r}")
            children[par].append(vid)
            if nu is None:
                raise TreeError(f"missing nu on non-root vertex {vid!r}")
        info[vid] = (par, mu, nu)

    root = roots[0]
    if not children[root]:
        raise TreeError("root has no child")

    order = []
    queue = deque([root])
    while queue:
        v = queue.popleft()
        order.append(v)
        queue.extend(children[v])
    if len(order) != len(records):
        stuck = sorted(set(children) - set(order))
        raise TreeError(f"cycle detected among vertices {stuck}")

    pos = {v: k for k, v in enumerate(order)}
    parent = [-1] + [pos[info[v][0]] for v in order[1:]]
    mu = []
    nu = [math.nan]
    for k, v in enumerate(order):
        _, m, w = info[v]
        mu.append(_weight(m, "mu", v, allow_none=(k == 0)))
        if k:
            nu.append(_weight(w, "nu", v))
    return WeightedTree(order, parent, mu, nu)


def _weight(value, name, vid, allow_none=False) -> float:
    if value is None:
        if allow_none:
            return 1.0
        raise TreeError(f"missing {name} on vertex {vid!r}")
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise TreeError(f"non-numeric {name} on vertex {vid!r}") from None
    if not math.isfinite(x) or x <= 0:
        raise TreeError(f"nonpositive weight {name}={value!r} on vertex {vid!r}")
    return x


def derive_weights(tree: WeightedTree, p) -> DerivedWeights:
    exp = as_exponent(p)
    nu_hat = np.zeros(tree.vertex_count)
    with np.errstate(over="raise", under="ignore"):
        try:
            nu_hat[1:] = tree.nu[1:] ** (1.0 - exp.p_hat)
            path = tree.path_sum(nu_hat)
            phi = path ** (exp.p - 1.0)
        except FloatingPointError:
            raise OverflowError("overflow while deriving dual edge weights") from None
    for arr in (nu_hat, path, phi):
        if not np.all(np.isfinite(arr)):
            raise OverflowError("overflow while deriving dual edge weights")
    sub = tree.subtree_sum(tree.mu)
    for arr in (nu_hat, sub, path, phi):
        arr.setflags(write=False)
    return DerivedWeights(exp, nu_hat, sub, path, phi)


# -- structural queries ------------------------------------------------------


def subtree_vertices(tree: WeightedTree, i) -> list[int]:
    """``V_i`` in BFS order, ``i`` included."""
    i = tree.index(i)
    out = [i]
    frontier = [i]
    while frontier:
        nxt = []
        for v in frontier:
            nxt.extend(tree.children(v))
        out.extend(nxt)
        frontier = nxt
    return out


def path_to_root(tree: WeightedTree, i) -> list[int]:
    """``P(i)``: from the root's child down to ``i``; the root is excluded."""
    i = tree.index(i)
    if i == 0:
        raise TreeError("P(i) is defined for non-root vertices only")
    out = []
    while i != 0:
        out.append(i)
        i = int(tree.parent[i])
    return out[::-1]


def level_set(tree: WeightedTree, n: int) -> list[int]:
    if not 0 <= n <= tree.max_level:
        raise TreeError(f"level {n} out of range 0..{tree.max_level}")
    return list(range(int(tree.level_bounds[n]), int(tree.level_bounds[n + 1])))


def truncation_ball(tree: WeightedTree, n: int) -> list[int]:
    """``V(n)``, the union of levels ``0..n``."""
    if not 0 <= n <= tree.max_level:
        raise TreeError(f"level {n} out of range 0..{tree.max_level}")
    return list(range(int(tree.level_bounds[n + 1])))


def truncate(tree: WeightedTree, m: int) -> WeightedTree:
    """The local tree ``T(m)``: levels ``0..m`` with subtree masses lumped at level ``m``."""
    if not 1 <= m <= tree.max_level:
        raise TreeError(f"truncation level {m} out of range 1..{tree.max_level}")
    if m == tree.max_level:
        return tree
    stop = int(tree.level_bounds[m + 1])
    mu = np.array(tree.mu[:stop])
    sl = tree.level_slice(m)
    mu[sl] = tree.subtree_sum(tree.mu)[sl]
    return WeightedTree(tree.ids[:stop], tree.parent[:stop], mu, tree.nu[:stop])


# -- generators --------------------------------------------------------------


def generate_homogeneous(r: int, N: int, t: float, a: float) -> WeightedTree:
    """Homogeneous tree of order ``r``: the root has one child, every other
    non-leaf vertex has ``r`` children, ``mu_k = t**|k|`` and
    ``nu_k = a * t**|k|``.
    """
    if int(r) != r or r < 1:
        raise TreeError("r must be an integer >= 1")
    if int(N) != N or N < 1:
        raise TreeError("N must be an integer >= 1")
    r, N = int(r), int(N)
    if not 0.0 < t < 1.0 / r:
        raise TreeError("t must lie in (0, 1/r)")
    if not (a > 0 and math.isfinite(a)):
        raise TreeError("a must be positive")
    counts = [1] + [r ** (lv - 1) for lv in range(1, N + 1)]
    n = sum(counts)
    if n > 5_000_000:
        raise TreeError(f"homogeneous tree too large ({n} vertices)")
    parent = np.empty(n, dtype=np.int64)
    level = np.empty(n, dtype=np.int64)
    parent[0], level[0] = -1, 0
    parent[1], level[1] = 0, 1
    start = 1
    for lv in range(2, N + 1):
        prev, cnt = start, counts[lv - 1]
        start = prev + cnt
        parent[start:start + counts[lv]] = np.repeat(np.arange(prev, prev + cnt), r)
        level[start:start + counts[lv]] = lv
    level[1] = 1
    tl = t ** level.astype(float)
    mu = tl.copy()
    nu = a * tl
    ids = ["o"] + [str(k) for k in range(1, n)]
    return WeightedTree(ids, parent, mu, nu)


def random_tree(n: int, rng: np.random.Generator, *, max_level: int | None = None,
                weight_range=(0.1, 10.0), root_children: int = 1) -> WeightedTree:
    """Random recursive tree with log-uniform weights.

    Each new vertex attaches to a uniformly chosen earlier non-root vertex
    below ``max_level``.  The first ``root_children`` vertices hang
    off the root.
    """
    if n < root_children + 1:
        raise TreeError("n too small for the requested number of root children")
    if max_level is not None and max_level < 1:
        raise TreeError("max_level must be at least 1")
    par = [-1] + [0] * root_children
    lev = [0] + [1] * root_children
    # vertices that may still take a child
    open_ = [v for v in range(1, root_children + 1) if max_level is None or max_level > 1]
    for v in range(root_children + 1, n):
        if not open_:
            raise TreeError(f"cannot place {n} vertices within max_level={max_level}")
        u = open_[int(rng.integers(0, len(open_)))]
        par.append(u)
        lev.append(lev[u] + 1)
        if max_level is None or lev[v] < max_level:
            open_.append(v)
    lo, hi = np.log(weight_range[0]), np.log(weight_range[1])
    mu = np.exp(rng.uniform(lo, hi, n))
    nu = np.exp(rng.uniform(lo, hi, n))
    entries = [(str(v), None if v == 0 else str(par[v]), mu[v], None if v == 0 else nu[v])
               for v in range(n)]
    # build_tree re-sorts into BFS order
    return build_tree(sorted(entries, key=lambda e: (lev[int(e[0])], par[int(e[0])], int(e[0]))))
