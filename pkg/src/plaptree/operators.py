"""
Single-summation (I), double-summation (II) and difference-form (R)
operators, their test-function domains, and the bounds they certify.

Untilded domains certify lower bounds only and tilded domains upper bounds
only.  ``bounds_from_test_function`` dispatches on the domain tag so that an
inf-sup value can never be reported as a lower bound.

Ratio functions ``w`` are indexed like vertex functions; ``w[0]`` is never
read.  A level-1 entry may be ``math.inf``: it stands for ``g_1 / g_o`` with
``g_o = 0`` and only ever enters through ``1 - 1/w``, which is then exactly 1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .tree import DerivedWeights, WeightedTree, as_exponent, derive_weights


class DomainError(ValueError):
    """A test function is not a member of its declared domain."""

    def __init__(self, verdict: "DomainVerdict"):
        super().__init__(verdict.describe())
        self.verdict = verdict


class Domain(str, enum.Enum):
    F_I = "F_I"
    F_II = "F_II"
    W = "W"
    F_I_TILDE = "F_I_tilde"
    F_II_TILDE = "F_II_tilde"
    W_TILDE = "W_tilde"
    F_II_STAR = "F_II_star"

    @property
    def is_tilde(self) -> bool:
        return self in (Domain.F_I_TILDE, Domain.F_II_TILDE, Domain.W_TILDE, Domain.F_II_STAR)

    @property
    def is_ratio(self) -> bool:
        return self in (Domain.W, Domain.W_TILDE)


@dataclass(frozen=True)
class DomainTag:
    """A domain plus, for tilded domains, the cutoff level (``None`` = detect)."""

    domain: Domain
    cutoff: int | None = None

    @classmethod
    def parse(cls, text: str) -> "DomainTag":
        """Parse ``"F_I"``, ``"W_tilde"`` or ``"F_II_tilde:3"``."""
        name, _, cut = str(text).partition(":")
        return cls(Domain(name), int(cut) if cut else None)

    def __str__(self):
        return self.domain.value if self.cutoff is None else f"{self.domain.value}:{self.cutoff}"


@dataclass(frozen=True)
class DomainVerdict:
    ok: bool
    tag: DomainTag
    vertex: int | None = None
    reason: str | None = None
    vertex_id: str | None = None

    def __bool__(self):
        return self.ok

    def describe(self) -> str:
        if self.ok:
            return f"member of {self.tag}"
        where = f" at vertex {self.vertex_id!r}" if self.vertex_id is not None else ""
        return f"not in {self.tag.domain.value}{where}: {self.reason}"


@dataclass(frozen=True)
class BoundInterval:
    """Two-sided enclosure of the principal eigenvalue with provenance labels."""

    lower: float = 0.0
    upper: float = math.inf
    lower_source: str | None = None
    upper_source: str | None = None

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def relative_width(self) -> float:
        return self.width / self.lower if self.lower > 0 else math.inf

    def contains(self, value: float, rel: float = 0.0) -> bool:
        return self.lower - rel * abs(value) <= value <= self.upper + rel * abs(value)

    def intersect(self, other: "BoundInterval") -> "BoundInterval":
        lo, lo_src = (self.lower, self.lower_source) if self.lower >= other.lower else (other.lower, other.lower_source)
        hi, hi_src = (self.upper, self.upper_source) if self.upper <= other.upper else (other.upper, other.upper_source)
        return BoundInterval(lo, hi, lo_src, hi_src)


def _weights(tree, p, weights):
    if weights is None or weights.exponent != as_exponent(p):
        return derive_weights(tree, p)
    return weights


def _pick(values: np.ndarray, i):
    return values if i is None else float(values[i])


# -- operators -----------------------------------------------------------------


def op_I(tree: WeightedTree, p, f, i=None) -> np.ndarray | float:
    """``I_i(f) = sum_{j in V_i} mu_j f_j^(p-1) / (nu_i (f_i - f_{i*})^(p-1))``.

    Vertices with a zero increment get ``inf``.  With ``i=None`` the whole
    array is returned (root entry NaN).
    """
    exp = as_exponent(p)
    f = np.asarray(f, dtype=float)
    mass = tree.subtree_sum(tree.mu * np.power(np.maximum(f, 0.0), exp.p - 1.0))
    d = tree.increments(f)
    out = np.full(tree.vertex_count, np.nan)
    with np.errstate(divide="ignore"):
        out[1:] = mass[1:] / (tree.nu[1:] * np.power(d[1:], exp.p - 1.0))
    return _pick(out, None if i is None else tree.index(i))


def ii_image(tree: WeightedTree, p, f, *, weights: DerivedWeights | None = None):
    """Image of ``f`` under the double-summation map.

    Returns ``(g, d)`` with ``d_k = (sum_{j in V_k} mu_j f_j^(p-1) / nu_k)^(p_hat-1)``
    and ``g_i = sum_{k in P(i)} d_k``, so that ``g_i = f_i II_i(f)^(p_hat-1)``.
    """
    exp = as_exponent(p)
    w = _weights(tree, exp, weights)
    f = np.asarray(f, dtype=float)
    mass = tree.subtree_sum(tree.mu * np.power(np.maximum(f, 0.0), exp.p - 1.0))
    d = np.zeros(tree.vertex_count)
    d[1:] = w.nu_hat[1:] * np.power(mass[1:], exp.p_hat - 1.0)
    return tree.path_sum(d), d


def op_II(tree: WeightedTree, p, f, i=None, *, weights: DerivedWeights | None = None):
    """``II_i(f) = f_i^(1-p) [sum_{k in P(i)} nu_hat_k (sum_{j in V_k} mu_j f_j^(p-1))^(p_hat-1)]^(p-1)``.

    All vertices share one subtree sweep and one path sweep.  ``f_i = 0``
    gives ``inf`` (``nan`` when the bracket vanishes as well).
    """
    exp = as_exponent(p)
    g, _ = ii_image(tree, exp, f, weights=weights)
    f = np.asarray(f, dtype=float)
    out = np.full(tree.vertex_count, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        out[1:] = np.power(g[1:] / f[1:], exp.p - 1.0)
    return _pick(out, None if i is None else tree.index(i))


def _one_minus_inverse(w: np.ndarray) -> np.ndarray:
    # inf -> exactly 1; never forms inf - inf
    return np.where(np.isinf(w), 1.0, 1.0 - 1.0 / np.where(np.isinf(w), 1.0, w))


def _r_numerator(tree: WeightedTree, p: float, w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    own = np.zeros(tree.vertex_count)
    own[1:] = tree.nu[1:] * np.power(_one_minus_inverse(w[1:]), p - 1.0)
    # (w_j - 1) only for j at level >= 2, where w is finite
    kid = np.zeros(tree.vertex_count)
    deep = slice(int(tree.level_bounds[2]), tree.vertex_count) if tree.max_level >= 2 else slice(0, 0)
    kid[deep] = tree.nu[deep] * np.power(w[deep] - 1.0, p - 1.0)
    down = np.bincount(tree.parent[1:], weights=kid[1:], minlength=tree.vertex_count)
    return own - down


def op_R(tree: WeightedTree, p, w, i=None):
    """``R_i(w) = mu_i^-1 [nu_i (1 - 1/w_i)^(p-1) - sum_{j in J(i)} nu_j (w_j - 1)^(p-1)]``."""
    exp = as_exponent(p)
    out = np.full(tree.vertex_count, np.nan)
    out[1:] = _r_numerator(tree, exp.p, w)[1:] / tree.mu[1:]
    return _pick(out, None if i is None else tree.index(i))


def op_R_tilde(tree: WeightedTree, p, w, m: int, i=None, *, weights: DerivedWeights | None = None):
    """``R`` with ``mu_i`` replaced by ``mu(V_i)`` at level ``m`` and 0 below it."""
    exp = as_exponent(p)
    if not 1 <= m <= tree.max_level:
        raise ValueError(f"cutoff m={m} out of range 1..{tree.max_level}")
    sub = _weights(tree, exp, weights).subtree_mu
    denom = np.array(tree.mu, dtype=float)
    sl = tree.level_slice(m)
    denom[sl] = sub[sl]
    out = np.full(tree.vertex_count, np.nan)
    out[1:] = _r_numerator(tree, exp.p, w)[1:] / denom[1:]
    out[int(tree.level_bounds[m + 1]):] = 0.0
    return _pick(out, None if i is None else tree.index(i))


def ratio_function(tree: WeightedTree, g) -> np.ndarray:
    """``w_i = g_i / g_{i*}``; ``inf`` on level 1 (``g_o = 0``), NaN at the root."""
    g = np.asarray(g, dtype=float)
    w = np.full(tree.vertex_count, np.nan)
    w[tree.level_slice(1)] = math.inf
    deep = slice(int(tree.level_bounds[2]), tree.vertex_count) if tree.max_level >= 2 else slice(0, 0)
    w[deep] = g[deep] / g[tree.parent[deep]]
    return w


# -- domains -------------------------------------------------------------------


def _first(mask: np.ndarray) -> int | None:
    idx = np.flatnonzero(mask)
    return int(idx[0]) if idx.size else None


def plateau_level(tree: WeightedTree, values, ratio: bool = False) -> int:
    """Largest level carrying a nonzero increment (``w != 1`` for ratios)."""
    v = np.asarray(values, dtype=float)
    moving = (v != 1.0) if ratio else (tree.increments(v) != 0.0)
    moving[0] = False
    idx = np.flatnonzero(moving)
    return int(tree.level[idx[-1]]) if idx.size else 0


def validate_domain(tree: WeightedTree, p, values, tag: DomainTag | str) -> DomainVerdict:
    """Check membership of ``values`` in the tagged domain.

    Strict inequalities are tested exactly.  For tilded domains with
    ``tag.cutoff`` unset the cutoff is detected as the plateau level, and the
    returned verdict carries the resolved tag.  On a finite tree the starred
    double-summation domain coincides with ``F_II_tilde``.
    """
    exp = as_exponent(p)
    if not isinstance(tag, DomainTag):
        tag = DomainTag.parse(tag)
    dom = tag.domain
    v = np.asarray(values, dtype=float)
    n = tree.vertex_count

    def fail(vertex, reason, resolved=tag):
        vid = tree.ids[vertex] if vertex is not None else None
        return DomainVerdict(False, resolved, vertex, reason, vid)

    if v.shape != (n,):
        return fail(None, f"expected {n} values, got shape {v.shape}")

    if dom is Domain.W:
        bad = _first(~(v[1:] > 1.0))
        if bad is not None:
            return fail(bad + 1, "ratio must exceed 1")
        bad = _first(np.isinf(v) & (tree.level >= 2))
        if bad is not None:
            return fail(bad, "ratio must be finite below level 1")
        return DomainVerdict(True, tag)
    if dom is Domain.W_TILDE:
        return _w_tilde(tree, exp, v, tag, fail)

    if v[0] != 0.0:
        return fail(0, "value at the root must be 0")
    bad = _first(~np.isfinite(v))
    if bad is not None:
        return fail(bad, "non-finite value")
    d = tree.increments(v)

    if dom is Domain.F_I:
        bad = _first(d[1:] <= 0.0)
        return fail(bad + 1, "f must strictly increase away from the root") if bad is not None else DomainVerdict(True, tag)
    if dom is Domain.F_II:
        bad = _first(v[1:] <= 0.0)
        return fail(bad + 1, "f must be positive") if bad is not None else DomainVerdict(True, tag)

    # tilded function domains
    bad = _first(v < 0.0)
    if bad is not None:
        return fail(bad, "f must be nonnegative")
    if not np.any(v[1:] != 0.0):
        return fail(None, "f must not vanish identically")
    cut = tag.cutoff if tag.cutoff is not None else max(plateau_level(tree, v), 1)
    resolved = DomainTag(dom, cut)
    if not 1 <= cut <= tree.max_level:
        return fail(None, f"cutoff {cut} out of range 1..{tree.max_level}", resolved)
    beyond = tree.level > cut
    bad = _first(beyond & (d != 0.0))
    if bad is not None:
        return fail(bad, f"f must be constant along edges below level {cut}", resolved)
    if dom is Domain.F_I_TILDE:
        bad = _first((tree.level >= 1) & ~beyond & (d <= 0.0))
        if bad is not None:
            return fail(bad, f"f must strictly increase up to level {cut}", resolved)
    return DomainVerdict(True, resolved)


def _w_tilde(tree: WeightedTree, exp, v: np.ndarray, tag: DomainTag, fail) -> DomainVerdict:
    cut = tag.cutoff
    if cut is None:
        cut = max(plateau_level(tree, np.where(np.isnan(v), 1.0, v), ratio=True), 1)
    resolved = DomainTag(tag.domain, cut)
    if not 1 <= cut <= tree.max_level:
        return fail(None, f"cutoff {cut} out of range 1..{tree.max_level}", resolved)
    lv1 = tree.level_slice(1)
    bad = _first(~np.isinf(v[lv1]))
    if bad is not None:
        return fail(bad + lv1.start, "level-1 ratios must be the root sentinel inf", resolved)
    within = (tree.level >= 1) & (tree.level <= cut)
    bad = _first(within & ~(v > 1.0))
    if bad is not None:
        return fail(bad, f"ratio must exceed 1 up to level {cut}", resolved)
    bad = _first((tree.level >= 2) & within & np.isinf(v))
    if bad is not None:
        return fail(bad, "ratio must be finite below level 1", resolved)
    bad = _first((tree.level > cut) & (v != 1.0))
    if bad is not None:
        return fail(bad, f"ratio must equal 1 below level {cut}", resolved)
    # sum_{j in J(i)} nu_j (w_j - 1)^(p-1) < nu_i (1 - 1/w_i)^(p-1) for |i| <= m
    own = np.zeros(tree.vertex_count)
    own[1:] = tree.nu[1:] * np.power(_one_minus_inverse(v[1:]), exp.p - 1.0)
    kid = np.zeros(tree.vertex_count)
    deep = slice(int(tree.level_bounds[2]), tree.vertex_count) if tree.max_level >= 2 else slice(0, 0)
    kid[deep] = tree.nu[deep] * np.power(v[deep] - 1.0, exp.p - 1.0)
    down = np.bincount(tree.parent[1:], weights=kid[1:], minlength=tree.vertex_count)
    bad = _first(within & ~(down < own))
    if bad is not None:
        return fail(bad, "children outweigh the parent edge (W_tilde inequality)", resolved)
    return DomainVerdict(True, resolved)


# -- bounds ----------------------------------------------------------------------

_DEFAULT_OPERATOR = {
    Domain.F_I: "I",
    Domain.F_I_TILDE: "I",
    Domain.F_II: "II",
    Domain.F_II_TILDE: "II",
    Domain.F_II_STAR: "II",
    Domain.W: "R",
    Domain.W_TILDE: "R",
}


def _ii_inverse(tree, exp, f, weights):
    """``II_i(f)^-1`` for all vertices, and a mask of vertices where it is defined."""
    g, _ = ii_image(tree, exp, f, weights=weights)
    f = np.asarray(f, dtype=float)
    live = g > 0.0
    live[0] = False
    r = np.zeros(tree.vertex_count)
    r[live] = np.power(f[live] / g[live], exp.p - 1.0)
    return r, live, g


def bounds_from_test_function(tree: WeightedTree, p, values, tag: DomainTag | str, *,
                              operator: str | None = None, label: str = "f",
                              weights: DerivedWeights | None = None) -> BoundInterval:
    """Certified one-sided bound from a single test function.

    Parameters
    ----------
    values : array
        Vertex function (or ratio function for ``W``/``W_tilde``).
    tag : DomainTag or str
        Declared domain; membership is validated first.
    operator : {"I", "II", "R"}, optional
        ``I`` and ``II`` both accept ``F_I``/``F_I_tilde`` members; the
        default follows the domain.

    Raises
    ------
    DomainError
        If ``values`` is not a member of the declared domain.
    """
    exp = as_exponent(p)
    if not isinstance(tag, DomainTag):
        tag = DomainTag.parse(tag)
    verdict = validate_domain(tree, exp, values, tag)
    if not verdict:
        raise DomainError(verdict)
    tag = verdict.tag
    dom = tag.domain
    op = operator or _DEFAULT_OPERATOR[dom]
    allowed = {"I": (Domain.F_I, Domain.F_I_TILDE),
               "II": (Domain.F_I, Domain.F_I_TILDE, Domain.F_II, Domain.F_II_TILDE, Domain.F_II_STAR),
               "R": (Domain.W, Domain.W_TILDE)}
    if dom not in allowed.get(op, ()):
        raise ValueError(f"operator {op!r} does not act on domain {dom.value}")
    v = np.asarray(values, dtype=float)
    weights = _weights(tree, exp, weights)
    body = slice(1, tree.vertex_count)

    if op == "I":
        inv = 1.0 / op_I(tree, exp, v)
        if dom.is_tilde:
            keep = (tree.level >= 1) & (tree.level <= tag.cutoff)
            return BoundInterval(upper=float(inv[keep].max()),
                                 upper_source=f"sup_i I_i({label})^-1, {label} in {tag}")
        return BoundInterval(lower=float(inv[body].min()),
                             lower_source=f"inf_i I_i({label})^-1, {label} in {tag}")
    if op == "II":
        r, live, _ = _ii_inverse(tree, exp, v, weights)
        if dom.is_tilde:
            keep = live & (tree.level <= tag.cutoff)
            return BoundInterval(upper=float(r[keep].max()),
                                 upper_source=f"sup_i II_i({label})^-1, {label} in {tag}")
        return BoundInterval(lower=float(r[body].min()),
                             lower_source=f"inf_i II_i({label})^-1, {label} in {tag}")
    if dom is Domain.W_TILDE:
        rt = op_R_tilde(tree, exp, v, tag.cutoff, weights=weights)
        keep = (tree.level >= 1) & (tree.level <= tag.cutoff)
        return BoundInterval(upper=float(rt[keep].max()),
                             upper_source=f"sup_i R~_i({label}), {label} in {tag}")
    rr = op_R(tree, exp, v)
    return BoundInterval(lower=float(rr[body].min()),
                         lower_source=f"inf_i R_i({label}), {label} in {tag}")


# -- iteration ---------------------------------------------------------------------


@dataclass(frozen=True)
class IIStep:
    iteration: int
    interval: BoundInterval
    f: np.ndarray
    extrapolated: bool = False


@dataclass
class IIRun:
    """Outcome of the double-summation iteration.

    ``f`` is the last test function, ``image`` its normalized image under the
    map (the eigenfunction estimate), and ``intervals`` the certified
    enclosure emitted at every step.
    """

    intervals: list
    f: np.ndarray
    image: np.ndarray
    converged: bool
    iterations: int

    @property
    def interval(self) -> BoundInterval:
        return self.intervals[-1]


def _normalize(tree, g):
    scale = g[1] if g[1] > 0 else g.max()
    return g / scale


def _branch_interval(tree, exp, f, weights, branch, n_branch, k):
    r, live, g = _ii_inverse(tree, exp, f, weights)
    positive = np.all(f[1:] > 0.0)
    lower = float(r[1:].min()) if positive else 0.0
    # each root branch is an independent problem; restricting f to one branch
    # keeps it in F_II_tilde, so the smallest branch-wise sup is still certified
    tops = np.full(n_branch, -np.inf)
    np.maximum.at(tops, branch[live], r[live])
    tops = tops[np.isfinite(tops)]
    upper = float(tops.min()) if tops.size else math.inf
    src = f"II map step {k}"
    interval = BoundInterval(lower, upper,
                             f"inf_i II_i(f_{k})^-1 ({src})" if positive else None,
                             f"min over root branches of sup_i II_i(f_{k})^-1 ({src})")
    return interval, g


def ii_steps(tree: WeightedTree, p, f0=None, *, max_iters: int = 10_000, tol: float = 1e-10,
             extrapolate: bool = True, weights: DerivedWeights | None = None) -> Iterator[IIStep]:
    """Yield ``(interval, f_n)`` along ``f_{n+1} = T(f_n) / T(f_n)[first child]``.

    ``f0`` defaults to 1 on every non-root vertex.  With ``extrapolate`` a
    geometric (Aitken-type) extrapolation of the iterates is tried whenever
    successive step lengths shrink at a stable rate; it is accepted only if
    its certified interval nests inside that of the plain step, so the
    emitted bounds stay monotone.  Iteration stops once
    ``upper - lower <= tol * lower`` or after ``max_iters`` map applications.
    """
    exp = as_exponent(p)
    weights = _weights(tree, exp, weights)
    if f0 is None:
        f = np.ones(tree.vertex_count)
        f[0] = 0.0
    else:
        f = np.array(f0, dtype=float)
        verdict = validate_domain(tree, exp, f, DomainTag(Domain.F_II_TILDE))
        if not verdict:
            raise DomainError(verdict)
    branch = tree.branch()
    n_branch = int(tree.level_bounds[2])
    f = _normalize(tree, f)
    interval, g = _branch_interval(tree, exp, f, weights, branch, n_branch, 0)
    yield IIStep(0, interval, f)

    rates: list[float] = []
    prev_len = None
    for k in range(1, max_iters + 1):
        if interval.upper - interval.lower <= tol * interval.lower:
            return
        g = _normalize(tree, g)
        step = g - f
        length = float(np.linalg.norm(step))
        if prev_len:
            rates.append(length / prev_len)
        prev_len = length

        nxt, g_next = _branch_interval(tree, exp, g, weights, branch, n_branch, k)
        chosen, chosen_f, chosen_g, used = nxt, g, g_next, False
        if extrapolate and len(rates) >= 3:
            rho = rates[-1]
            if 0.3 < rho < 1.0 and abs(rho - rates[-2]) < 1e-2 * rho:
                cand = g + step * (rho / (1.0 - rho))
                if np.all(cand[1:] > 0.0):
                    cand = _normalize(tree, cand)
                    c_int, c_g = _branch_interval(tree, exp, cand, weights, branch, n_branch, k)
                    if c_int.lower >= nxt.lower and c_int.upper <= nxt.upper:
                        chosen, chosen_f, chosen_g, used = c_int, cand, c_g, True
                        rates.clear()
                        prev_len = None
        interval, f, g = chosen, chosen_f, chosen_g
        yield IIStep(k, interval, f, used)


def ii_iteration(tree: WeightedTree, p, f0=None, *, max_iters: int = 10_000, tol: float = 1e-10,
                 extrapolate: bool = True, weights: DerivedWeights | None = None) -> IIRun:
    """Run :func:`ii_steps` to completion and collect the intervals."""
    exp = as_exponent(p)
    weights = _weights(tree, exp, weights)
    intervals = []
    last = None
    for step in ii_steps(tree, exp, f0, max_iters=max_iters, tol=tol,
                         extrapolate=extrapolate, weights=weights):
        intervals.append(step.interval)
        last = step
    iv = last.interval
    converged = iv.upper - iv.lower <= tol * iv.lower
    image, _ = ii_image(tree, exp, last.f, weights=weights)
    return IIRun(intervals, last.f, _normalize(tree, image), converged, last.iteration)
