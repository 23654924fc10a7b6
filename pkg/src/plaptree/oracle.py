"""
Reference eigensolvers for the principal Dirichlet eigenpair.

``solve_principal`` runs the double-summation map as a nonlinear inverse
power iteration; every step carries a certified enclosure, and the final
estimate is the geometric mean of the last one.  A gradient minimization of
the Rayleigh quotient from pseudo-random starts serves as an independent
cross-check, and ``dense_p2_solve`` assembles the linear case explicitly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import linalg
from .dirichlet import apply_omega_p, dirichlet_energy, lp_mass, signed_power
from .operators import BoundInterval, ii_image, ii_iteration
from .tree import WeightedTree, as_exponent, derive_weights, truncate

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITERS = 10_000
DENSE_MAX_VERTICES = 2000


class ConvergenceError(RuntimeError):
    """The iteration did not certify the requested precision.

    ``interval`` holds the best enclosure reached.
    """

    def __init__(self, message, interval: BoundInterval, pair: "EigenPair | None" = None):
        super().__init__(message)
        self.interval = interval
        self.pair = pair


class LCG:
    """64-bit linear congruential generator (Knuth's MMIX constants).

    ``x <- (6364136223846793005 x + 1442695040888963407) mod 2^64``; the top
    53 bits give a double in [0, 1).  Kept explicit so that cross-check
    starts are reproducible from the seed alone.
    """

    A = 6364136223846793005
    C = 1442695040888963407
    MASK = (1 << 64) - 1

    def __init__(self, seed: int = 0):
        self.state = seed & self.MASK

    def random(self) -> float:
        self.state = (self.A * self.state + self.C) & self.MASK
        return (self.state >> 11) / float(1 << 53)

    def uniform(self, lo: float, hi: float, size: int) -> np.ndarray:
        return np.array([lo + (hi - lo) * self.random() for _ in range(size)])


@dataclass
class CrossCheck:
    values: list
    best: float
    relative_gap: float
    agrees: bool
    iterations: list = field(default_factory=list)


@dataclass
class EigenPair:
    """Principal eigenvalue ``lam`` with eigenfunction ``g`` (``g[first child] = 1``).

    ``residual`` is ``max_i |Omega_p g(i) + lam mu_i psi(g_i)| / (lam mu_i |g_i|^(p-1))``
    over vertices where ``g`` is nonzero.
    """

    lam: float
    g: np.ndarray
    residual: float
    iterations: int
    method: str
    interval: BoundInterval | None = None
    cross_check: CrossCheck | None = None
    branch: int | None = None


def eigen_residual(tree: WeightedTree, p, lam: float, g, *, increments=None) -> float:
    """Largest relative eigen-equation defect over vertices where ``g`` is nonzero.

    ``increments`` (``g_i - g_{i*}``, when known more accurately than the
    difference of two path sums) replaces the edge differences of ``g``.
    """
    exp = as_exponent(p)
    g = np.asarray(g, dtype=float)
    if increments is None:
        lhs = apply_omega_p(tree, exp, g)
    else:
        flux = np.zeros(tree.vertex_count)
        flux[1:] = tree.nu[1:] * signed_power(np.asarray(increments, dtype=float)[1:], exp.p)
        lhs = np.bincount(tree.parent[1:], weights=flux[1:], minlength=tree.vertex_count) - flux
    scale = lam * tree.mu * np.abs(g) ** (exp.p - 1.0)
    live = scale > 0
    live[0] = False
    res = np.abs(lhs + lam * tree.mu * signed_power(g, exp.p))
    if np.any(res[~live][1:] > 0):
        return math.inf
    return float(np.max(res[live] / scale[live])) if np.any(live) else math.inf


def solve_principal(tree: WeightedTree, p, tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS,
                    *, cross_check: bool = True, seed: int = 0, extrapolate: bool = True) -> EigenPair:
    """Principal Dirichlet eigenpair by the double-summation inverse iteration.

    Parameters
    ----------
    tol : float
        Target relative width of the certified interval.
    cross_check : bool
        Also minimize the Rayleigh quotient from three pseudo-random starts
        and record whether it agrees with the iteration to ``10 * tol``.

    Raises
    ------
    ConvergenceError
        If the interval is still wider than ``tol`` after ``max_iters`` steps.

    Notes
    -----
    When the root has several children the problem splits into independent
    branches; the eigenfunction returned is supported on the branch that
    attains the minimum and vanishes elsewhere.
    """
    exp = as_exponent(p)
    weights = derive_weights(tree, exp)
    run = ii_iteration(tree, exp, max_iters=max_iters, tol=tol, extrapolate=extrapolate, weights=weights)
    iv = run.interval
    lam = math.sqrt(iv.lower * iv.upper)
    g, d = ii_image(tree, exp, run.f, weights=weights)
    home = None
    if tree.n_children[0] > 1:
        g, home = _principal_branch(tree, exp, g, weights)
        d = np.where(tree.branch() == home, d, 0.0)
    scale = g[1] if home is None else g[home]
    g, d = g / scale, d / scale
    pair = EigenPair(lam, g, eigen_residual(tree, exp, lam, g, increments=d), run.iterations, "ii-map", iv,
                     None, home)
    if not run.converged:
        raise ConvergenceError(
            f"interval [{iv.lower:.12g}, {iv.upper:.12g}] not within relative width {tol:g} "
            f"after {run.iterations} iterations", iv, pair)
    if cross_check:
        pair.cross_check = rayleigh_cross_check(tree, exp, lam, tol, seed=seed)
        if not pair.cross_check.agrees:
            log.warning("gradient cross-check disagrees: relative gap %.3g", pair.cross_check.relative_gap)
    return pair


def _principal_branch(tree, exp, g, weights):
    from .operators import _ii_inverse

    branch = tree.branch()
    r, live, _ = _ii_inverse(tree, exp, g, weights)
    n_branch = int(tree.level_bounds[2])
    uppers = np.full(n_branch, np.inf)
    uppers[1:] = -np.inf
    np.maximum.at(uppers, branch[live], r[live])
    # the branch with the lowest certified upper bound carries the eigenfunction
    home = int(np.argmin(uppers))
    g = np.where(branch == home, g, 0.0)
    g[0] = 0.0
    return g, home


def rayleigh_cross_check(tree: WeightedTree, p, lam: float, tol: float, *, seed: int = 0,
                         starts: int = 3) -> CrossCheck:
    """Minimize the Rayleigh quotient independently of the iteration.

    The variables are the edge increments ``d`` scaled to ``y = nu^(1/p) d``
    (``f`` is the root-path sum of ``d``), which turns the energy into
    ``sum |y|^p``; L-BFGS runs from ``starts`` pseudo-random positive
    starting points.  Agreement means ``|best - lam| <= 10 * tol * lam``.
    """
    exp = as_exponent(p)
    pw = exp.p
    nu = tree.nu[1:]
    mu = tree.mu[1:]
    n = tree.vertex_count
    unscale = nu ** (-1.0 / pw)

    def increments(y):
        d = np.zeros(n)
        d[1:] = y * unscale
        return d

    def objective(y):
        f = tree.path_sum(increments(y))
        energy = np.sum(np.abs(y) ** pw)
        mass = np.sum(mu * np.abs(f[1:]) ** pw)
        q = energy / mass
        grad_e = pw * signed_power(y, pw)
        gm = np.zeros(n)
        gm[1:] = pw * mu * signed_power(f[1:], pw)
        grad_m = tree.subtree_sum(gm)[1:] * unscale
        return q, (grad_e - q * grad_m) / mass

    rng = LCG(seed)
    values, iters = [], []
    for _ in range(starts):
        x0 = rng.uniform(0.1, 1.0, n - 1)
        res = minimize(objective, x0, jac=True, method="L-BFGS-B",
                       options={"maxiter": 50_000, "maxfun": 100_000, "ftol": 1e-16, "gtol": 1e-14, "maxcor": 30})
        f = tree.path_sum(increments(res.x))
        values.append(dirichlet_energy(tree, exp, f) / lp_mass(tree, exp, f))
        iters.append(int(res.nit))
    best = min(values)
    gap = abs(best - lam) / lam
    return CrossCheck(values, best, gap, gap <= 10.0 * tol, iters)


def dense_p2_solve(tree: WeightedTree) -> EigenPair:
    """Linear reference solve: ``L g = lam M g`` with explicit dense matrices.

    ``L`` is the Dirichlet Laplacian with the root row and column removed and
    ``M = diag(mu)``.  The symmetric matrix ``M^-1/2 L M^-1/2`` is reduced
    to tridiagonal form, its smallest eigenvalue found by Sturm bisection,
    the eigenvector by inverse iteration, and the eigenvalue finally
    re-evaluated as the Rayleigh quotient of that vector.
    """
    n = tree.vertex_count
    if n - 1 > DENSE_MAX_VERTICES:
        raise ValueError(f"dense solve limited to {DENSE_MAX_VERTICES} non-root vertices, got {n - 1}")
    m = n - 1
    lap = np.zeros((m, m))
    for i in range(1, n):
        a = i - 1
        lap[a, a] += tree.nu[i]
        par = int(tree.parent[i])
        if par:
            b = par - 1
            lap[b, b] += tree.nu[i]
            lap[a, b] -= tree.nu[i]
            lap[b, a] -= tree.nu[i]
    s = 1.0 / np.sqrt(tree.mu[1:])
    sym = lap * s[:, None] * s[None, :]
    d, e = linalg.householder_tridiagonal(sym)
    lam0 = linalg.smallest_eigenvalue(d, e)
    v = linalg.inverse_iteration(sym, lam0)
    g = np.zeros(n)
    g[1:] = v * s
    # pick the sign positive on the vertex carrying the largest |g|
    g *= math.copysign(1.0, g[np.argmax(np.abs(g))])
    lam = dirichlet_energy(tree, 2.0, g) / lp_mass(tree, 2.0, g)
    if g[1] != 0.0:
        g /= g[1]
    else:
        g /= np.abs(g).max()
    return EigenPair(lam, g, eigen_residual(tree, 2.0, lam, g), 0, "dense-p2")


def approximation_sequence(tree: WeightedTree, p, tol: float = DEFAULT_TOL,
                           max_iters: int = DEFAULT_MAX_ITERS) -> list[tuple[int, float]]:
    """``(m, lam^(m))`` for ``m = 1..N``: eigenvalues of the level-``m`` local trees."""
    exp = as_exponent(p)
    out = []
    for m in range(1, tree.max_level + 1):
        pair = solve_principal(truncate(tree, m), exp, tol, max_iters, cross_check=False)
        out.append((m, pair.lam))
    return out


@dataclass
class MonotonicityVerdict:
    """``status`` is ``"pass"``, ``"fail"`` or ``"observed"`` (p < 2: reported, never asserted)."""

    status: str
    violations: list
    min_increment: float
    weak: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status != "fail"


def monotonicity_check(pair: EigenPair, tree: WeightedTree, p, slack: float = 1e-12) -> MonotonicityVerdict:
    """Check that ``g`` strictly increases along every root path.

    An increment below ``-slack * max|g|`` is a violation; increments in
    ``[-slack * max|g|, 0]`` are listed as weak.  For ``p < 2`` the outcome
    is only observed.
    """
    exp = as_exponent(p)
    g = np.asarray(pair.g, dtype=float)
    if pair.branch is not None:
        keep = tree.branch() == pair.branch
    else:
        keep = np.ones(tree.vertex_count, dtype=bool)
    keep[0] = False
    inc = tree.increments(g)
    thresh = slack * float(np.abs(g).max())
    idx = np.flatnonzero(keep)
    violations = [tree.ids[i] for i in idx if inc[i] < -thresh]
    weak = [tree.ids[i] for i in idx if -thresh <= inc[i] <= 0.0]
    status = "observed" if exp.p < 2 else ("fail" if violations else "pass")
    return MonotonicityVerdict(status, violations, float(inc[idx].min()) if idx.size else math.nan, weak)
