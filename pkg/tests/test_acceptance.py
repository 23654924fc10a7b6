"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

Tree sets are drawn from fixed seeds so reruns see the same trees.
"""

import itertools
import math
import time

import numpy as np

from plaptree.dirichlet import dirichlet_energy, lp_mass, pairing
from plaptree.estimates import basic_bounds, compute_sigma, homogeneous_sigma
from plaptree.operators import ii_steps, op_I, op_II, op_R, ratio_function
from plaptree.oracle import approximation_sequence, dense_p2_solve, monotonicity_check, solve_principal
from plaptree.tree import build_tree, generate_homogeneous, random_tree


def seeded_trees(base, count, low, high, **kw):
    for k in range(count):
        rng = np.random.default_rng(base + k)
        yield k, random_tree(int(rng.integers(low, high + 1)), rng, **kw)


def sandwich_set():
    # 20 trees of at most 6 levels, shared by the sandwich and equality criteria
    return list(seeded_trees(3000, 20, 3, 60, max_level=6))


def test_ac01_single_edge(record):
    tree = build_tree([("o", None, 1.0, None), ("a", "o", 3.0, 2.0)])
    worst, slowest = 0.0, 0.0
    for p in (1.5, 2.0, 3.0, 4.0):
        start = time.perf_counter()
        lam = solve_principal(tree, p).lam
        slowest = max(slowest, time.perf_counter() - start)
        worst = max(worst, abs(lam - 2 / 3))
    est = basic_bounds(tree, 2.0)
    bounds_ok = math.isclose(est.lower, 1 / 3, rel_tol=1e-15) and math.isclose(est.upper, 2 / 3, rel_tol=1e-15)
    passed = worst <= 1e-12 and bounds_ok and slowest < 0.01
    record(1, "single edge exact value", passed,
           f"max error {worst:.2e}, bounds [{est.lower:.12g}, {est.upper:.12g}], slowest solve {slowest * 1e3:.2f} ms")
    assert passed


def test_ac02_dense_cross_oracle(record):
    start = time.perf_counter()
    worst, where = 0.0, None
    for k, tree in seeded_trees(2000, 50, 2, 500):
        a = solve_principal(tree, 2.0).lam
        b = dense_p2_solve(tree).lam
        gap = abs(a - b) / b
        if gap > worst:
            worst, where = gap, k
    elapsed = time.perf_counter() - start
    passed = worst <= 1e-8 and elapsed < 30
    record(2, "p=2 iteration vs dense solver", passed,
           f"max relative gap {worst:.2e} (tree {where}), {elapsed:.1f} s for 50 trees")
    assert passed


def test_ac03_profile_sandwich(record):
    failures, cases = [], 0
    for k, tree in sandwich_set():
        for p in (2.0, 2.5, 3.0):
            lam = solve_principal(tree, p, 1e-12, cross_check=False).lam
            est = basic_bounds(tree, p)
            if not est.applicable:
                continue
            cases += 1
            slack = 1e-8 * lam
            if lam > est.upper + slack:
                failures.append(f"tree {k} p={p}: lambda {lam:.6g} > 1/sigma {est.upper:.6g}")
            if est.lower > lam + slack:
                failures.append(f"tree {k} (n={tree.vertex_count}) p={p}: lower/lambda = {est.lower / lam:.4f}")
    passed = not failures
    record(3, "profile lower <= lambda <= 1/sigma", passed,
           f"{cases} cases, {len(failures)} violations" + (f"; {'; '.join(failures)}" if failures else ""))
    assert passed, failures


def test_ac04_operator_equalities(record):
    worst, where = 0.0, None
    for k, tree in sandwich_set():
        for p in (2.0, 2.5, 3.0):
            pair = solve_principal(tree, p, 1e-12, cross_check=False)
            lam, g = pair.lam, pair.g
            vals = {"I": 1.0 / op_I(tree, p, g), "II": 1.0 / op_II(tree, p, g),
                    "R": op_R(tree, p, ratio_function(tree, g))}
            for name, v in vals.items():
                dev = float(np.max(np.abs(np.asarray(v)[1:] - lam))) / lam
                if dev > worst:
                    worst, where = dev, f"{name} on tree {k}, p={p}"
    passed = worst <= 1e-6
    record(4, "I, II and R equal lambda at the eigenfunction", passed,
           f"max relative deviation {worst:.2e} ({where})")
    assert passed


def test_ac05_eigenfunction_monotone(record):
    violations, cases, smallest = [], 0, math.inf
    for k, tree in seeded_trees(5000, 50, 2, 200):
        for p in (2.0, 2.5, 3.0, 4.0):
            pair = solve_principal(tree, p, cross_check=False)
            verdict = monotonicity_check(pair, tree, p, slack=0.0)
            cases += 1
            smallest = min(smallest, verdict.min_increment)
            if verdict.status != "pass" or verdict.weak:
                violations.append(f"tree {k} p={p}: {verdict.violations + verdict.weak}")
    passed = not violations
    record(5, "eigenfunction strictly increases from the root", passed,
           f"{cases} cases, {len(violations)} violations, smallest increment {smallest:.3g}")
    assert passed, violations


def test_ac06_truncation_sequence(record):
    problems, worst_gap = [], 0.0
    for k, tree in seeded_trees(6000, 20, 2, 150):
        for p in (2.0, 3.0):
            seq = [v for _, v in approximation_sequence(tree, p, 1e-12)]
            if any(b > a * (1 + 1e-12) for a, b in zip(seq, seq[1:])):
                problems.append(f"tree {k} p={p} increases")
            lam = solve_principal(tree, p, 1e-12, cross_check=False).lam
            gap = abs(seq[-1] - lam) / lam
            worst_gap = max(worst_gap, gap)
            if gap > 1e-10:
                problems.append(f"tree {k} p={p} last entry off by {gap:.2e}")
    passed = not problems
    record(6, "truncated eigenvalues nonincreasing to lambda", passed,
           f"40 sequences, max last-entry gap {worst_gap:.2e}" + (f"; {problems}" if problems else ""))
    assert passed, problems


def test_ac07_homogeneous_sigma(record):
    worst, count = 0.0, 0
    for r, N, a, p in itertools.product((1, 2, 3), range(1, 7), (0.5, 1.0, 2.0), (2.0, 2.5, 3.0)):
        for t in (0.05, 0.1, 0.2, 0.9 / (r + 1)):
            got = compute_sigma(generate_homogeneous(r, N, t, a), p)[0]
            want = homogeneous_sigma(r, N, t, a, p)
            worst = max(worst, abs(got - want) / want)
            count += 1
    limit = 8 / 3
    generated = [compute_sigma(generate_homogeneous(2, n, 0.25, 1.0), 2.0)[0] for n in range(1, 11)]
    closed = [homogeneous_sigma(2, n, 0.25, 1.0, 2.0) for n in range(1, 61)]
    increasing = all(b >= a for a, b in zip(closed, closed[1:])) and all(
        math.isclose(x, y, rel_tol=1e-12) for x, y in zip(generated, closed))
    near = abs(closed[-1] - limit) <= 1e-9 * limit
    passed = worst <= 1e-12 and increasing and near and all(v < limit for v in closed)
    record(7, "homogeneous sigma closed form", passed,
           f"{count} grid points, max relative error {worst:.2e}; N=60 gap to 8/3 {limit - closed[-1]:.2e}")
    assert passed


def test_ac08_identities_large_tree(record):
    start = time.perf_counter()
    rng = np.random.default_rng(8000)
    tree = random_tree(10_000, rng)
    worst_sbp = worst_energy = 0.0
    for k in range(200):
        p = (1.5, 2.0, 2.5, 3.0, 4.0)[k % 5]
        f, g = rng.normal(size=(2, tree.vertex_count))
        f[0] = g[0] = 0.0
        pr = pairing(tree, p, f, g)
        worst_sbp = max(worst_sbp, abs(pr.vertex_form - pr.edge_form) / abs(pr.edge_form))
        d = dirichlet_energy(tree, p, f)
        worst_energy = max(worst_energy, abs(pairing(tree, p, f, f).vertex_form - d) / d)
    elapsed = time.perf_counter() - start
    passed = worst_sbp <= 1e-10 and worst_energy <= 1e-10 and elapsed < 5
    record(8, "summation by parts and energy identity", passed,
           f"200 pairs on 10^4 vertices, gaps {worst_sbp:.2e} / {worst_energy:.2e}, {elapsed:.2f} s")
    assert passed


def test_ac09_hardy_optimality(record):
    worst_eq, worst_ineq = 0.0, -math.inf
    for k, tree in seeded_trees(9000, 10, 2, 200):
        rng = np.random.default_rng(90_000 + k)
        for p in (1.5, 2.0, 3.0):
            pair = solve_principal(tree, p, 1e-12, cross_check=False)
            a = 1.0 / pair.lam
            mass = lp_mass(tree, p, pair.g)
            worst_eq = max(worst_eq, abs(mass - a * dirichlet_energy(tree, p, pair.g)) / mass)
            for j in range(100):
                f = rng.normal(size=tree.vertex_count)
                if j % 2:
                    # near-optimal functions probe the inequality close to equality
                    f = pair.g * (1.0 + 10.0 ** rng.uniform(-6, -1) * f)
                f[0] = 0.0
                ratio = lp_mass(tree, p, f) / (a * dirichlet_energy(tree, p, f))
                worst_ineq = max(worst_ineq, ratio - 1.0)
    passed = worst_eq <= 1e-8 and worst_ineq <= 1e-9
    record(9, "Hardy constant attained by the eigenfunction", passed,
           f"equality gap {worst_eq:.2e}, max mass/(A D) - 1 over random f {worst_ineq:.2e}")
    assert passed


def test_ac10_certified_iteration(record):
    problems, most = [], 0
    for k, tree in seeded_trees(10_000, 10, 100, 100):
        for p in (2.0, 3.0):
            steps = list(ii_steps(tree, p, max_iters=200, tol=1e-8))
            lows = [s.interval.lower for s in steps]
            ups = [s.interval.upper for s in steps]
            last = steps[-1]
            most = max(most, last.iteration)
            if last.interval.upper - last.interval.lower > 1e-8 * last.interval.lower:
                problems.append(f"tree {k} p={p}: not converged")
            if any(b < a for a, b in zip(lows, lows[1:])) or any(b > a for a, b in zip(ups, ups[1:])):
                problems.append(f"tree {k} p={p}: bounds not monotone")
    passed = not problems
    record(10, "II-map interval width within 200 steps", passed,
           f"20 runs, at most {most} iterations" + (f"; {problems}" if problems else ""))
    assert passed, problems
