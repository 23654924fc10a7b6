"""
Explicit two-sided estimate from the path/subtree weight profile
(``sigma`` and the branching corrections ``C_i``), and closed forms for
homogeneous trees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dirichlet import rayleigh_quotient
from .operators import op_I
from .tree import WeightedTree, as_exponent, derive_weights


@dataclass(frozen=True)
class BasicEstimate:
    """``upper = 1/sigma``; ``lower = 1/(p_hat^(p-1) c_sup sigma)`` when ``c_sup > 0``.

    ``test_function_lower`` is ``inf_i I_i(phi^(1/p))^-1``, the single-summation
    bound evaluated at the test function behind ``lower``.  Unlike ``lower``
    it is a certified bound on every tree.
    """

    sigma: float
    argmax_vertex: int
    c_sup: float
    lower: float | None
    upper: float
    applicable: bool
    test_function_lower: float

    @property
    def factor(self) -> float:
        return self.upper / self.lower if self.lower else math.inf


def compute_C(tree: WeightedTree, i=None, *, open_boundary: bool = False):
    """``C_i = #J(i) + sum_{s in J(i)} sum_{k in V_s} (#J(k) - 1)``.

    Computed for all vertices with one subtree sweep.  On a finite tree every
    value is 0, since each finite subtree has one fewer edge than vertices.
    With ``open_boundary`` the vertices on the last level are treated as cut
    points of an infinite tree and their ``#J(k) - 1 = -1`` terms are dropped.
    """
    terms = tree.n_children.astype(np.int64) - 1
    if open_boundary:
        terms = np.where(tree.level == tree.max_level, 0, terms)
    sub = np.array(terms)
    bounds = tree.level_bounds
    for lv in range(tree.max_level, 0, -1):
        lo, hi = int(bounds[lv]), int(bounds[lv + 1])
        plo, phi = int(bounds[lv - 1]), int(bounds[lv])
        sub[plo:phi] += np.bincount(tree.parent[lo:hi] - plo, weights=sub[lo:hi],
                                    minlength=phi - plo).astype(np.int64)
    # sum over children's subtrees = own subtree minus own term
    c = tree.n_children + (sub - terms)
    return c if i is None else int(c[tree.index(i)])


def compute_sigma(tree: WeightedTree, p, weights=None) -> tuple[float, int]:
    """``sigma = sup_i mu(V_i) nu_hat(P(i))^(p-1)``; ties go to the smallest index."""
    w = weights if weights is not None else derive_weights(tree, p)
    prod = w.subtree_mu[1:] * w.phi[1:]
    k = int(np.argmax(prod))
    return float(prod[k]), k + 1


def sigma_test_function(tree: WeightedTree, p, weights=None) -> np.ndarray:
    """``phi^(1/p)``, the single-summation test function behind the lower estimate."""
    exp = as_exponent(p)
    w = weights if weights is not None else derive_weights(tree, exp)
    f = np.power(w.phi, 1.0 / exp.p)
    f[0] = 0.0
    return f


def step_test_function(tree: WeightedTree, p, i0, weights=None, *, side_branches: str = "zero") -> np.ndarray:
    """``phi^(p_hat-1)`` along ``P(i0)``, frozen on ``V_i0``.

    ``side_branches="zero"`` sets every other vertex to 0, which is the
    literal construction; the jumps onto those zeros add energy, so the
    claimed ``1 / Rayleigh(f) >= mu(V_i0) phi_i0`` can fail.  With
    ``"frozen"`` each side branch keeps the value where it leaves the path,
    the energy is exactly ``nu_hat(P(i0))`` and the inequality always holds.
    """
    if side_branches not in ("zero", "frozen"):
        raise ValueError("side_branches must be 'zero' or 'frozen'")
    exp = as_exponent(p)
    w = weights if weights is not None else derive_weights(tree, exp)
    i0 = tree.index(i0)
    ramp = np.power(w.phi, exp.p_hat - 1.0)
    on_path = np.zeros(tree.vertex_count, dtype=bool)
    v = i0
    while v:
        on_path[v] = True
        v = int(tree.parent[v])
    inside = np.zeros(tree.vertex_count, dtype=bool)
    inside[i0] = True
    f = np.where(on_path, ramp, 0.0)
    for lv in range(1, tree.max_level + 1):
        sl = tree.level_slice(lv)
        par = tree.parent[sl]
        inside[sl] |= inside[par]
        inherit = f[par]
        if side_branches == "zero":
            inherit = np.where(inside[par], inherit, 0.0)
        f[sl] = np.where(on_path[sl], f[sl], inherit)
    return f


def basic_bounds(tree: WeightedTree, p) -> BasicEstimate:
    exp = as_exponent(p)
    w = derive_weights(tree, exp)
    sigma, arg = compute_sigma(tree, exp, w)
    c = compute_C(tree)
    c_sup = float(np.max(1.0 + (exp.p - 1.0) * c[1:]))
    applicable = c_sup > 0
    lower = 1.0 / (exp.p_hat ** (exp.p - 1.0) * c_sup * sigma) if applicable else None
    f = sigma_test_function(tree, exp, w)
    tf_lower = float(np.min(1.0 / op_I(tree, exp, f)[1:]))
    return BasicEstimate(sigma, arg, c_sup, lower, 1.0 / sigma, applicable, tf_lower)


def upper_witness_ratio(tree: WeightedTree, p, i0=None, *, side_branches: str = "zero") -> tuple[float, float]:
    """``(1 / Rayleigh(f_step), mu(V_i0) phi_i0)`` at ``i0`` (default: the sigma argmax)."""
    exp = as_exponent(p)
    w = derive_weights(tree, exp)
    if i0 is None:
        _, i0 = compute_sigma(tree, exp, w)
    i0 = tree.index(i0)
    f = step_test_function(tree, exp, i0, w, side_branches=side_branches)
    return 1.0 / rayleigh_quotient(tree, exp, f), float(w.subtree_mu[i0] * w.phi[i0])


def homogeneous_sigma(r: int, N, t: float, a: float, p) -> float:
    """Closed-form ``sigma`` for the homogeneous tree; ``N = math.inf`` gives the limit.

    ``sigma = sup_n (1 - (rt)^(N-n+1)) (1 - t^(n(p_hat-1)))^(p-1) / (a (1-rt) (1-t^(p_hat-1))^(p-1))``
    with the supremum scanned over ``n = 1..N``.
    """
    exp = as_exponent(p)
    if int(r) != r or r < 1:
        raise ValueError("r must be an integer >= 1")
    if not 0.0 < t < 1.0 / r:
        raise ValueError("t must lie in (0, 1/r)")
    if not a > 0:
        raise ValueError("a must be positive")
    q = t ** (exp.p_hat - 1.0)
    scale = 1.0 / (a * (1.0 - r * t) * (1.0 - q) ** (exp.p - 1.0))
    if N == math.inf:
        return scale
    if int(N) != N or N < 1:
        raise ValueError("N must be a positive integer or math.inf")
    n = np.arange(1, int(N) + 1, dtype=float)
    profile = -np.expm1((int(N) - n + 1) * math.log(r * t)) * (-np.expm1(n * math.log(q))) ** (exp.p - 1.0)
    return scale * float(profile.max())


def homogeneous_Bp_printed(r: int, N, p) -> float:
    """The printed constant for homogeneous trees: ``p_hat^(p-1) [1 + (p-1)(r^N + r - 2)]``
    for ``r >= 2`` and ``p p_hat^(p-1)`` for ``r = 1``.

    Reported next to the computed ``p_hat^(p-1) c_sup``; the two differ on
    finite trees.
    """
    exp = as_exponent(p)
    base = exp.p_hat ** (exp.p - 1.0)
    if r == 1:
        return exp.p * base
    if N == math.inf:
        return math.inf
    return base * (1.0 + (exp.p - 1.0) * (r ** int(N) + r - 2))
