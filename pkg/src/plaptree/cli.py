"""Command-line interface and the JSON tree document format.

Exit codes: 0 success, 1 property failure, 2 input error, 3 non-convergence.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import estimates, oracle
from .dirichlet import dirichlet_energy, pairing
from .operators import (DomainError, DomainTag, bounds_from_test_function, op_I, op_II, op_R,
                        ratio_function)
from .tree import TreeError, WeightedTree, as_exponent, build_tree, generate_homogeneous

FORMAT_VERSION = 1
EXIT_OK, EXIT_PROPERTY, EXIT_INPUT, EXIT_CONVERGENCE = 0, 1, 2, 3
SUITES = ("identities", "sandwich", "equalities", "monotone", "truncation")
SUITE_ALIASES = {"lemma21": "monotone", "lemma31": "truncation"}


class InputError(ValueError):
    pass


def real(x):
    """Round to 12 significant digits for reports; infinities become strings."""
    if x is None:
        return None
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return float(f"{x:.12g}")


# -- documents --------------------------------------------------------------------


def parse_document(data) -> tuple[WeightedTree, float | None, dict]:
    """Validate a decoded tree document and build the tree."""
    if not isinstance(data, dict):
        raise InputError("document must be a JSON object")
    if "format_version" not in data:
        raise InputError("missing format_version")
    if data["format_version"] != FORMAT_VERSION:
        raise InputError(f"unsupported format_version {data['format_version']!r}")
    verts = data.get("vertices")
    if not isinstance(verts, list) or not verts:
        raise InputError("vertices must be a non-empty list")
    entries = []
    for k, v in enumerate(verts):
        if not isinstance(v, dict) or "id" not in v:
            raise InputError(f"vertex entry #{k} has no id")
        vid = str(v["id"])
        for key in ("parent", "mu"):
            if key not in v:
                raise InputError(f"vertex {vid!r}: missing {key}")
        par = v["parent"]
        entries.append((vid, None if par is None else str(par), v["mu"], v.get("nu")))
    try:
        tree = build_tree(entries)
    except TreeError as exc:
        raise InputError(str(exc)) from None
    p = data.get("p")
    if p is not None and not isinstance(p, (int, float)):
        raise InputError(f"p must be a number, got {p!r}")
    return tree, p, dict(data.get("meta") or {})


def load_document(path) -> tuple[WeightedTree, float | None, dict]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {path}: {exc}") from None
    return parse_document(data)


def tree_document(tree: WeightedTree, p: float, meta: dict | None = None) -> dict:
    verts = []
    for i in range(tree.vertex_count):
        par = int(tree.parent[i])
        verts.append({"id": tree.ids[i],
                      "parent": None if i == 0 else tree.ids[par],
                      "mu": float(tree.mu[i]),
                      "nu": None if i == 0 else float(tree.nu[i])})
    doc = {"format_version": FORMAT_VERSION, "p": float(p), "vertices": verts}
    if meta:
        doc["meta"] = meta
    return doc


def load_test_function(path, tree: WeightedTree) -> tuple[np.ndarray, DomainTag, str]:
    """Read ``{"domain": ..., "cutoff": ..., "values": {id: value}}``.

    The root may be omitted.  For ratio domains ``"inf"`` (or null) stands for
    an infinite ratio, which is required on the root's children.
    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        tag = DomainTag.parse(data["domain"])
        if data.get("cutoff") is not None:
            tag = DomainTag(tag.domain, int(data["cutoff"]))
        values = data["values"]
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"bad test-function file {path}: {exc}") from None
    if not isinstance(values, dict):
        raise InputError("test-function values must map vertex ids to numbers")
    unknown = sorted(set(map(str, values)) - set(tree.ids))
    if unknown:
        raise InputError(f"test function names unknown vertex {unknown[0]!r}")
    out = np.zeros(tree.vertex_count)
    for i in range(1, tree.vertex_count):
        vid = tree.ids[i]
        if vid not in values:
            raise InputError(f"test function has no value at vertex {vid!r}")
        raw = values[vid]
        try:
            out[i] = math.inf if raw is None else float(raw)
        except (TypeError, ValueError):
            raise InputError(f"non-numeric test-function value at vertex {vid!r}") from None
    out[0] = math.inf if tag.domain.is_ratio else float(values.get(tree.ids[0], 0.0) or 0.0)
    return out, tag, str(data.get("label", "f"))


# -- reports -------------------------------------------------------------------


def _summary(tree, p):
    return {"vertices": tree.vertex_count, "max_level": tree.max_level, "p": real(p)}


def _interval(lower, upper, lower_source, upper_source):
    return {"lower": real(lower), "upper": real(upper),
            "lower_source": lower_source, "upper_source": upper_source}


def bounds_report(tree, p, meta=None, test_function=None) -> dict:
    exp = as_exponent(p)
    est = estimates.basic_bounds(tree, exp)
    rep = {"command": "bounds", "tree": _summary(tree, exp.p),
           "sigma": real(est.sigma), "sigma_vertex": tree.ids[est.argmax_vertex],
           "c_sup": real(est.c_sup),
           "profile_bounds": _interval(
               est.lower, est.upper,
               "lower = 1/(p_hat^(p-1) c_sup sigma)" if est.applicable else None,
               "upper = 1/sigma"),
           "profile_test_function_lower": {
               "lower": real(est.test_function_lower),
               "source": "inf_i I_i(phi^(1/p))^-1, phi = nu_hat(P(i))^(p-1)"}}
    if not est.applicable:
        rep["profile_bounds"]["note"] = "lower bound not applicable: c_sup <= 0"
    hom = (meta or {}).get("homogeneous")
    if hom:
        rep["homogeneous_constant"] = {
            "printed": real(estimates.homogeneous_Bp_printed(int(hom["r"]), int(hom["N"]), exp.p)),
            "computed": real(exp.p_hat ** (exp.p - 1.0) * est.c_sup),
            "note": "printed closed form reported for comparison only"}
    if test_function is not None:
        values, tag, label = test_function
        iv = bounds_from_test_function(tree, exp, values, tag, label=label)
        side = {"lower": real(iv.lower), "source": iv.lower_source} if iv.lower_source else \
            {"upper": real(iv.upper), "source": iv.upper_source}
        rep["test_function"] = {"domain": str(tag), **side}
    return rep


def solve_report(tree, p, tol, max_iters, sequence=False) -> tuple[dict, int]:
    exp = as_exponent(p)
    code = EXIT_OK
    try:
        pair = oracle.solve_principal(tree, exp, tol, max_iters)
    except oracle.ConvergenceError as exc:
        pair, code = exc.pair, EXIT_CONVERGENCE
    iv = pair.interval
    rep = {"command": "solve", "tree": _summary(tree, exp.p),
           "lambda": real(pair.lam),
           "interval": _interval(iv.lower, iv.upper, iv.lower_source, iv.upper_source),
           "lambda_source": "geometric mean of the final II-map enclosure",
           "converged": code == EXIT_OK,
           "residual": real(pair.residual), "iterations": pair.iterations, "method": pair.method,
           "eigenfunction": {tree.ids[i]: real(pair.g[i]) for i in range(1, tree.vertex_count)}}
    if pair.cross_check is not None:
        cc = pair.cross_check
        rep["cross_check"] = {"method": "L-BFGS on the Rayleigh quotient, 3 LCG starts",
                              "best": real(cc.best), "relative_gap": real(cc.relative_gap),
                              "agrees": cc.agrees}
    if sequence and code == EXIT_OK:
        try:
            seq = oracle.approximation_sequence(tree, exp, tol, max_iters)
        except oracle.ConvergenceError:
            code = EXIT_CONVERGENCE
        else:
            rep["sequence"] = [[m, real(v)] for m, v in seq]
    return rep, code


def _check(name, passed, detail, witness=None):
    out = {"property": name, "status": "pass" if passed else "fail", "detail": detail}
    if witness is not None and not passed:
        out["witness"] = witness
    return out


def _skip(name):
    return {"property": name, "status": "skipped", "detail": "skipped: open for p<2"}


def _suite_identities(tree, exp, ctx):
    rng = np.random.default_rng(ctx["seed"])
    worst_sbp, worst_d, who_sbp, who_d = 0.0, 0.0, None, None
    for k in range(ctx["pairs"]):
        f = rng.normal(size=tree.vertex_count)
        g = rng.normal(size=tree.vertex_count)
        f[0] = g[0] = 0.0
        pr = pairing(tree, exp, f, g)
        gap = abs(pr.vertex_form - pr.edge_form) / max(abs(pr.edge_form), 1e-300)
        if gap > worst_sbp:
            worst_sbp, who_sbp = gap, f"pair #{k}"
        d = dirichlet_energy(tree, exp, f)
        gap = abs(pairing(tree, exp, f, f).vertex_form - d) / d
        if gap > worst_d:
            worst_d, who_d = gap, f"function #{k}"
    return [_check("summation by parts", worst_sbp <= 1e-10, f"max relative gap {worst_sbp:.3g}", who_sbp),
            _check("energy equals pairing", worst_d <= 1e-10, f"max relative gap {worst_d:.3g}", who_d)]


def _suite_sandwich(tree, exp, ctx):
    pair = ctx["pair"]()
    lam = pair.lam
    est = estimates.basic_bounds(tree, exp)
    slack = 1e-8 * lam
    out = [_check("lambda <= 1/sigma", lam <= est.upper + slack,
                  f"lambda={lam:.12g}, upper={est.upper:.12g}", tree.ids[est.argmax_vertex])]
    if est.applicable:
        out.append(_check("profile lower <= lambda", est.lower <= lam + slack,
                          f"lower={est.lower:.12g}, lambda={lam:.12g}", tree.ids[est.argmax_vertex]))
    out.append(_check("phi^(1/p) lower <= lambda", est.test_function_lower <= lam + slack,
                      f"lower={est.test_function_lower:.12g}, lambda={lam:.12g}"))
    iv = pair.interval
    out.append(_check("II-map enclosure contains lambda", iv.contains(lam, 1e-12),
                      f"[{iv.lower:.12g}, {iv.upper:.12g}]"))
    return out


def _worst(tree, values, lam):
    dev = np.abs(values[1:] - lam) / lam
    k = int(np.argmax(dev))
    return float(dev[k]), tree.ids[k + 1]


def _suite_equalities(tree, exp, ctx):
    names = ("I_i(g)^-1 = lambda", "II_i(g)^-1 = lambda", "R_i(g/g_parent) = lambda")
    if exp.p < 2:
        return [_skip(n) for n in names]
    pair = ctx["pair"]()
    lam, g = pair.lam, pair.g
    if pair.branch is not None:
        keep = tree.branch() == pair.branch
        g = np.where(keep, g, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = (1.0 / op_I(tree, exp, g), 1.0 / op_II(tree, exp, g), op_R(tree, exp, ratio_function(tree, g)))
    out = []
    for name, v in zip(names, vals):
        v = np.array(v, dtype=float)
        if pair.branch is not None:
            v = np.where(tree.branch() == pair.branch, v, lam)
        dev, who = _worst(tree, v, lam)
        out.append(_check(name, dev <= 1e-6, f"max relative deviation {dev:.3g}", who))
    return out


def _suite_monotone(tree, exp, ctx):
    name = "eigenfunction increases along root paths"
    if exp.p < 2:
        return [_skip(name)]
    verdict = oracle.monotonicity_check(ctx["pair"](), tree, exp)
    return [_check(name, verdict.ok, f"min increment {verdict.min_increment:.3g}",
                   verdict.violations[0] if verdict.violations else None)]


def _suite_truncation(tree, exp, ctx):
    seq = oracle.approximation_sequence(tree, exp, ctx["tol"], ctx["max_iters"])
    vals = [v for _, v in seq]
    bad = [m for (m, v), (_, w) in zip(seq[1:], seq) if v > w * (1 + 1e-12)]
    lam = ctx["pair"]().lam
    gap = abs(vals[-1] - lam) / lam
    return [_check("level-m eigenvalues nonincreasing", not bad,
                   ", ".join(f"m={m}: {real(v)}" for m, v in seq), f"m={bad[0]}" if bad else None),
            _check("last level-m eigenvalue equals lambda", gap <= 1e-10, f"relative gap {gap:.3g}")]


_SUITE_RUNNERS = {"identities": _suite_identities, "sandwich": _suite_sandwich,
                  "equalities": _suite_equalities, "monotone": _suite_monotone,
                  "truncation": _suite_truncation}


def verify_report(tree, p, suites, tol, max_iters, seed=0) -> tuple[dict, int]:
    exp = as_exponent(p)
    cache = {}

    def pair():
        if "pair" not in cache:
            cache["pair"] = oracle.solve_principal(tree, exp, min(tol, 1e-12), max_iters, cross_check=False)
        return cache["pair"]

    ctx = {"pair": pair, "tol": tol, "max_iters": max_iters, "seed": seed, "pairs": 20}
    results = {}
    for s in suites:
        results[s] = _SUITE_RUNNERS[s](tree, exp, ctx)
    failed = any(c["status"] == "fail" for cs in results.values() for c in cs)
    rep = {"command": "verify", "tree": _summary(tree, exp.p), "suites": results,
           "status": "fail" if failed else "pass"}
    return rep, EXIT_PROPERTY if failed else EXIT_OK


# -- rendering -----------------------------------------------------------------


def render_text(rep: dict) -> str:
    t = rep.get("tree", {})
    lines = [f"{rep['command']}: {t.get('vertices')} vertices, N={t.get('max_level')}, p={t.get('p')}"]
    if rep["command"] == "bounds":
        b = rep["profile_bounds"]
        lines.append(f"sigma = {rep['sigma']} (at vertex {rep['sigma_vertex']!r}), c_sup = {rep['c_sup']}")
        lines.append(f"profile interval: [{b['lower']}, {b['upper']}]")
        lines.append(f"  lower: {b['lower_source'] or b.get('note')}")
        lines.append(f"  upper: {b['upper_source']}")
        tf = rep["profile_test_function_lower"]
        lines.append(f"certified lower {tf['lower']}: {tf['source']}")
        if "homogeneous_constant" in rep:
            h = rep["homogeneous_constant"]
            lines.append(f"homogeneous constant: printed {h['printed']}, computed {h['computed']}")
        if "test_function" in rep:
            tf = rep["test_function"]
            side = "lower" if "lower" in tf else "upper"
            lines.append(f"test function ({tf['domain']}) {side} {tf[side]}: {tf['source']}")
    elif rep["command"] == "solve":
        iv = rep["interval"]
        lines.append(f"lambda = {rep['lambda']}  ({rep['lambda_source']})")
        lines.append(f"interval: [{iv['lower']}, {iv['upper']}]")
        lines.append(f"residual = {rep['residual']}, iterations = {rep['iterations']}, "
                     f"converged = {rep['converged']}")
        if "cross_check" in rep:
            cc = rep["cross_check"]
            lines.append(f"cross-check: best {cc['best']}, gap {cc['relative_gap']}, agrees = {cc['agrees']}")
        for m, v in rep.get("sequence", []):
            lines.append(f"  m={m}: {v}")
    elif rep["command"] == "verify":
        for suite, checks in rep["suites"].items():
            for c in checks:
                wit = f" [witness: {c['witness']}]" if "witness" in c else ""
                lines.append(f"{c['status'].upper():7} {suite}: {c['property']} ({c['detail']}){wit}")
    return "\n".join(lines)


def emit(rep: dict, as_json: bool, out=None):
    text = json.dumps(rep, indent=2) if as_json else render_text(rep)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


# -- entry point ---------------------------------------------------------------


def _exponent(args, doc_p):
    p = args.p if args.p is not None else doc_p
    if p is None:
        raise InputError("no p in the document and none given with --p")
    try:
        return as_exponent(float(p)).p
    except ValueError as exc:
        raise InputError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="plaptree",
                                 description="Principal Dirichlet eigenvalue of the p-Laplacian on weighted trees.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, solver=True):
        sp.add_argument("input", help="tree document (JSON)")
        sp.add_argument("--p", type=float, help="override the exponent stored in the document")
        if solver:
            sp.add_argument("--tol", type=float, default=oracle.DEFAULT_TOL,
                            help="relative width of the certified interval (default %(default)g)")
            sp.add_argument("--max-iters", type=int, default=oracle.DEFAULT_MAX_ITERS,
                            help="iteration cap (default %(default)d)")
        sp.add_argument("--json", action="store_true", help="machine-readable report")
        sp.add_argument("--out", help="write the report to a file")

    b = sub.add_parser("bounds", help="two-sided estimates without solving")
    common(b, solver=False)
    b.add_argument("--test-function", metavar="FILE", help="add the bound from a user test function")

    s = sub.add_parser("solve", help="principal eigenpair")
    common(s)
    s.add_argument("--sequence", action="store_true", help="also list the level-m truncated eigenvalues")

    v = sub.add_parser("verify", help="run property suites on a tree")
    common(v)
    v.add_argument("--suite", action="append", choices=SUITES + tuple(SUITE_ALIASES),
                   help="suite to run (repeatable; default all)")

    g = sub.add_parser("generate", help="write a homogeneous tree document")
    g.add_argument("--homogeneous", nargs=4, metavar=("r", "N", "t", "a"), required=True,
                   help="branching r, depth N, decay t in (0, 1/r), scale a")
    g.add_argument("--p", type=float, default=2.0, help="exponent stored in the document")
    g.add_argument("--out", help="output path (default stdout)")
    return ap


def _generate(args):
    try:
        r, n = int(args.homogeneous[0]), int(args.homogeneous[1])
        t, a = float(args.homogeneous[2]), float(args.homogeneous[3])
    except ValueError:
        raise InputError("--homogeneous expects integers r N and reals t a") from None
    try:
        p = as_exponent(args.p).p
        tree = generate_homogeneous(r, n, t, a)
        sigma = estimates.homogeneous_sigma(r, n, t, a, p)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    meta = {"homogeneous": {"r": r, "N": n, "t": t, "a": a},
            "sigma_closed_form": real(sigma),
            "comment": f"sigma = {real(sigma)} from the closed form at p = {real(p)}"}
    text = json.dumps(tree_document(tree, p, meta), indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "generate":
            return _generate(args)
        tree, doc_p, meta = load_document(args.input)
        p = _exponent(args, doc_p)
        if args.command == "bounds":
            tf = load_test_function(args.test_function, tree) if args.test_function else None
            try:
                rep = bounds_report(tree, p, meta, tf)
            except DomainError as exc:
                raise InputError(str(exc)) from None
            code = EXIT_OK
        elif args.command == "solve":
            rep, code = solve_report(tree, p, args.tol, args.max_iters, args.sequence)
        else:
            suites = [SUITE_ALIASES.get(s, s) for s in (args.suite or SUITES)]
            rep, code = verify_report(tree, p, list(dict.fromkeys(suites)), args.tol, args.max_iters)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except oracle.ConvergenceError as exc:
        iv = exc.interval
        print(f"error: {exc}; best interval [{iv.lower:.12g}, {iv.upper:.12g}]", file=sys.stderr)
        return EXIT_CONVERGENCE
    emit(rep, args.json, args.out)
    if code == EXIT_CONVERGENCE:
        print("error: iteration did not converge; best interval reported", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
