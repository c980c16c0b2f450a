"""Command-line front end.  Every run prints one canonical JSON document.

Exit codes: 0 success, 1 usage or validation error, 2 not found or bound not
satisfied (the report is still complete), 3 resource ceiling hit.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

from spherical_recurrence import config
from spherical_recurrence import density_search as ds
from spherical_recurrence import exponential_sums as es
from spherical_recurrence import finite_ergodic as fe
from spherical_recurrence import lattice_spheres as ls
from spherical_recurrence import tree_model as tm
from spherical_recurrence.errors import (
    EmptySphereError,
    ModulusExhaustedError,
    ResourceLimitError,
    ValidationError,
)
from spherical_recurrence.jsonfmt import dumps

EXIT_OK, EXIT_USAGE, EXIT_UNSATISFIED, EXIT_RESOURCE = 0, 1, 2, 3

# flags that never influence the result and are kept out of the echo
_NOT_ECHOED = {"threads", "output", "handler", "command", "op"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _json_arg(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"invalid JSON: {exc}")


def _file_digest(path):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
    return {"path": str(path), "sha256": hashlib.sha256(data).hexdigest()}


# ---------------------------------------------------------------------------
# handlers: each returns (exit code, result dict)


def cmd_sphere(a):
    if a.profile:
        if a.m is None:
            raise UsageError("--profile needs --m")
        prof = ls.residue_profile(a.d, a.n, a.m, max_work=a.max_work)
        counts = [{"residue": list(r), "count": c} for r, c in sorted(prof.counts.items())]
        return EXIT_OK, {"modulus": a.m, "total": prof.total, "counts": counts}
    if a.enumerate:
        sphere = ls.enumerate_sphere(a.d, a.n, max_points=a.max_points, threads=a.threads)
        return EXIT_OK, {"count": len(sphere), "points": sphere.points.tolist()}
    return EXIT_OK, {"count": ls.sphere_size(a.d, a.n)}


def cmd_qeta(a):
    cap = math.floor(es._exact(a.c) / es._exact(a.eta) ** 2)
    return EXIT_OK, {"cap": cap, "q": es.q_eta_c(a.eta, a.c), "min_N": es.min_N(a.eta, a.c)}


def cmd_expsum(a):
    if a.op == "evaluate":
        if len(a.theta) != a.d:
            raise ValidationError(f"--theta needs {a.d} coordinates")
        sphere = ls.enumerate_sphere(a.d, a.n, max_points=a.max_points, threads=a.threads)
        value = es.exp_sum(sphere, a.theta)
        out = {"sphere_size": len(sphere), "value": value, "modulus": abs(value)}
        if a.eta is not None and a.c is not None:
            out["arc"] = es.classify_arc(a.theta, es.ArcParameters(a.eta, a.c, a.n)).value
        return EXIT_OK, out
    if a.op == "scan":
        rep = es.scan_minor_arcs(a.d, a.eta, a.c, a.n, a.samples, a.seed)
        return (EXIT_OK if rep.passed else EXIT_UNSATISFIED), rep.to_dict()
    # estimate-c
    n_range = None
    if a.n_lo is not None or a.n_hi is not None:
        if a.n_lo is None or a.n_hi is None or a.n_lo > a.n_hi:
            raise UsageError("--n-lo and --n-hi must be given together with n-lo <= n-hi")
        n_range = range(a.n_lo, a.n_hi + 1)
    est = es.estimate_constant(a.d, a.eta, n_range, a.grid, a.samples, a.seed, span=a.span)
    return (EXIT_OK if est.found else EXIT_UNSATISFIED), est.to_dict()


def cmd_tree(a):
    tree = tm.RootedTree.load(a.tree)
    out = {"tree": tree.to_dict(), "leaf_order": [list(e) for e in tm.leaf_order(tree)]}
    if a.op == "count":
        out["immersions"] = tm.count_immersions(tree, a.d)
        out["embedding_lower_bound"] = tm.embedding_lower_bound(tree, a.d)
        out["embeddings"] = tm.count_embeddings(tree, a.d, max_rows=a.max_points)
        return EXIT_OK, out
    if a.op == "bounds":
        N0 = min(w for _, w in tree.tree.labels)
        m = tree.m
        out["immersions"] = tm.count_immersions(tree, a.d)
        out["embedding_lower_bound"] = tm.embedding_lower_bound(tree, a.d)
        out["min_label"] = N0
        out["fraction_bound"] = max(0.0, 1 - m / math.sqrt(N0)) ** m
        return EXIT_OK, out
    items = []
    for imm in tm.enumerate_immersions(tree, a.d, a.limit, max_count=a.max_points):
        items.append({"placement": imm.to_dict(), "embedding": tm.is_embedding(imm)})
    out["immersions"] = items
    return EXIT_OK, out


def _need(a, *names):
    missing = [n for n in names if getattr(a, n) is None]
    if missing:
        raise UsageError(f"ergodic {a.op} needs " + ", ".join("--" + n.replace("_", "-") for n in missing))


def cmd_ergodic(a):
    B = fe.MeasurableSet.load(a.set)
    S = B.system
    out = {"measure": B.measure}
    op = a.op
    if op == "project":
        _need(a, "q")
        P = fe.invariant_projection(S, B, a.q)
        h, hn = fe.q_torsion_projection(S, B, a.q)
        resid = float(abs(P - (B.measure + h)).max())
        out.update({"projection": P.ravel().tolist(), "h_norm": hn,
                    "identity_residual": resid, "identity_ok": resid <= fe.IDENTITY_TOL})
        return EXIT_OK, out
    if op == "equidistribution":
        _need(a, "q", "delta")
        res = fe.is_equidistributed(S, B, a.q, a.delta)
        out.update(res.to_dict())
        _, hn = fe.q_torsion_projection(S, B, a.q)
        out["h_norm"] = hn
        out["h_bound"] = math.sqrt(2 * a.delta + a.delta ** 2) * B.measure
        return (EXIT_OK if res.equidistributed else EXIT_UNSATISFIED), out
    if op == "increment":
        _need(a, "q", "delta", "epsilon")
        try:
            res = fe.measure_increment(S, B, a.q, a.delta, a.epsilon)
        except ModulusExhaustedError as exc:
            out.update({"error": str(exc), "certificate": exc.certificate})
            return EXIT_UNSATISFIED, out
        out.update({"Q": res.Q, "J": res.J, "component": res.component.to_dict(),
                    "certificate": res.certificate})
        return EXIT_OK, out
    if op == "components":
        _need(a, "q")
        comps = fe.ergodic_components(S, a.q)
        out["components"] = [c.to_dict() | {"density": c.density(B)} for c in comps]
        out["checks"] = fe.verify_components(S, a.q, B)
        ok = all(v for k, v in out["checks"].items() if isinstance(v, bool))
        return (EXIT_OK if ok else EXIT_UNSATISFIED), out
    q = a.q if a.q is not None else 1
    if op == "mean-deviation":
        _need(a, "n")
        out["deviation"] = fe.spherical_mean_deviation(S, B, a.n, q)
        return EXIT_OK, out
    if op == "decomposition":
        _need(a, "n", "q")
        out.update(fe.mean_ergodic_decomposition(S, B, a.n, a.q))
        return (EXIT_OK if out["deviation"] <= out["bound"] + 1e-9 else EXIT_UNSATISFIED), out
    if op == "correlation":
        _need(a, "n")
        corr = fe.spherical_correlation(S, B, a.n, q)
        dev = fe.spherical_mean_deviation(S, B, a.n, q)
        out.update({"correlation": corr, "deviation": dev,
                    "cauchy_schwarz_ok": abs(corr - B.measure ** 2) <= math.sqrt(B.measure) * dev + 1e-9})
        return EXIT_OK, out
    if op == "tree-expectation":
        _need(a, "tree")
        tree = tm.RootedTree.load(a.tree)
        val = fe.tree_correlation_expectation(S, B, tree, q)
        out.update({"tree": tree.to_dict(), "expectation": val,
                    "independent_value": B.measure ** tree.m})
        return EXIT_OK, out
    if op == "recurrent-embedding":
        _need(a, "tree", "threshold")
        tree = tm.RootedTree.load(a.tree)
        res = fe.find_recurrent_embedding(S, B, tree, q, a.threshold, max_iter=a.max_iter)
        out.update(res.to_dict())
        return (EXIT_OK if res.found else EXIT_UNSATISFIED), out
    if op == "pointwise":
        _need(a, "n", "epsilon")
        rep = fe.pointwise_exception_set(S, B, a.n, a.epsilon, q)
        out.update(rep.to_dict())
        out["exception_points"] = [list(p) for p in rep.exception_set.points()]
        return (EXIT_OK if rep.markov_ok else EXIT_UNSATISFIED), out
    # multi-pointwise
    _need(a, "epsilon")
    rep = fe.multi_pointwise_check(S, B, a.ns or [], a.epsilon, q)
    out.update(rep.to_dict())
    return (EXIT_OK if rep.witness_mass > 0 else EXIT_UNSATISFIED), out


def _load_window(path) -> ds.WindowSet:
    # accepts a bare window file or the document written by `gen`
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    if isinstance(data, dict) and "window" in data and "command" in data:
        data = data["window"]
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: expected a JSON object")
    return ds.WindowSet.from_dict(data)


def cmd_search(a):
    B = _load_window(a.window)
    out = {"size": len(B), "density": B.density}
    if a.op == "distset":
        out["distances"] = sorted(ds.squared_distance_set(B))
        return EXIT_OK, out
    if a.op == "coverage":
        if a.lo is None or a.hi is None:
            raise UsageError("search coverage needs --lo and --hi")
        out.update(ds.ap_coverage(B, a.q, a.lo, a.hi).to_dict())
        return EXIT_OK, out
    if a.op == "chain":
        if not a.gaps:
            raise UsageError("search chain needs --gaps")
        rep = ds.find_chain(B, ds.ChainQuery(a.q, tuple(a.gaps)), a.budget)
    else:
        if a.tree is None:
            raise UsageError("search embed needs --tree")
        rep = ds.find_tree_embedding(B, tm.RootedTree.load(a.tree), a.q, a.budget)
    out.update(rep.to_dict())
    return (EXIT_OK if rep.found else EXIT_UNSATISFIED), out


def cmd_gen(a):
    if a.op == "uniform":
        if a.density is None:
            raise UsageError("gen uniform needs --density")
        kind = {"kind": "uniform_random", "density": a.density, "seed": a.seed}
    elif a.op == "congruence":
        if a.g is None or a.residues is None:
            raise UsageError("gen congruence needs --g and --residues")
        kind = {"kind": "congruence", "g": a.g, "residues": a.residues}
    else:
        if a.witness is None:
            raise UsageError("gen planted needs --witness")
        kind = {"kind": "planted", "witness": a.witness, "noise": a.density or 0.0,
                "seed": a.seed}
    B, witness = ds.generate_window(kind, a.d, a.l)
    out = {"window": B.to_dict()}
    if witness is not None:
        out["witness"] = [list(p) for p in witness]
    return EXIT_OK, out


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--threads", type=int, default=None,
                        help=f"worker threads (default ${config.ENV_THREADS} or 1); never changes output")
    common.add_argument("--output", "-o", default=None, help="write JSON here instead of stdout")
    common.add_argument("--max-points", type=int, default=None,
                        help=f"point ceiling (default ${config.ENV_MAX_POINTS})")
    common.add_argument("--max-work", type=int, default=None,
                        help=f"DP cell ceiling (default ${config.ENV_MAX_WORK})")

    p = _Parser(prog="spherical-recurrence", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("sphere", parents=[common], help="count, enumerate or profile S_N")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)
    mode = sp.add_mutually_exclusive_group()
    mode.add_argument("--count", action="store_true")
    mode.add_argument("--enumerate", action="store_true")
    mode.add_argument("--profile", action="store_true")
    sp.add_argument("--m", type=int, help="modulus for --profile")
    sp.set_defaults(handler=cmd_sphere)

    qp = sub.add_parser("qeta", parents=[common], help="lcm of 1..floor(C/eta^2)")
    qp.add_argument("--eta", type=float, required=True)
    qp.add_argument("--c", type=float, required=True)
    qp.set_defaults(handler=cmd_qeta)

    ep = sub.add_parser("expsum", help="exponential sums over spheres")
    esub = ep.add_subparsers(dest="op", required=True, parser_class=_Parser)
    ev = esub.add_parser("evaluate", parents=[common])
    ev.add_argument("--d", type=int, required=True)
    ev.add_argument("--n", type=int, required=True)
    ev.add_argument("--theta", type=_floats, required=True)
    ev.add_argument("--eta", type=float)
    ev.add_argument("--c", type=float)
    sc = esub.add_parser("scan", parents=[common])
    sc.add_argument("--d", type=int, required=True)
    sc.add_argument("--eta", type=float, required=True)
    sc.add_argument("--c", type=float, required=True)
    sc.add_argument("--n", type=int, required=True)
    sc.add_argument("--samples", type=int, default=500)
    sc.add_argument("--seed", type=int, default=0)
    ec = esub.add_parser("estimate-c", parents=[common])
    ec.add_argument("--d", type=int, required=True)
    ec.add_argument("--eta", type=float, required=True)
    ec.add_argument("--grid", type=_floats, required=True)
    ec.add_argument("--n-lo", type=int)
    ec.add_argument("--n-hi", type=int)
    ec.add_argument("--span", type=int, default=200)
    ec.add_argument("--samples", type=int, default=500)
    ec.add_argument("--seed", type=int, default=0)
    ep.set_defaults(handler=cmd_expsum)

    tp = sub.add_parser("tree", help="immersion counts, bounds and enumeration")
    tsub = tp.add_subparsers(dest="op", required=True, parser_class=_Parser)
    for name in ("count", "enumerate", "bounds"):
        t = tsub.add_parser(name, parents=[common])
        t.add_argument("--tree", required=True, help="tree JSON file")
        t.add_argument("--d", type=int, required=True)
        if name == "enumerate":
            t.add_argument("--limit", type=int)
    tp.set_defaults(handler=cmd_tree)

    gp = sub.add_parser("ergodic", help="finite torus verifiers")
    gsub = gp.add_subparsers(dest="op", required=True, parser_class=_Parser)
    for name in ("project", "equidistribution", "increment", "components", "mean-deviation",
                 "decomposition", "correlation", "tree-expectation", "recurrent-embedding",
                 "pointwise", "multi-pointwise"):
        g = gsub.add_parser(name, parents=[common])
        g.add_argument("--set", required=True, help="measurable set JSON file")
        g.add_argument("--q", type=int)
        g.add_argument("--delta", type=float)
        g.add_argument("--epsilon", type=float)
        g.add_argument("--n", type=int)
        g.add_argument("--ns", type=_ints)
        g.add_argument("--tree")
        g.add_argument("--threshold", type=float)
        g.add_argument("--max-iter", type=int, default=100_000)
    gp.set_defaults(handler=cmd_ergodic)

    rp = sub.add_parser("search", help="searches inside a window set")
    rsub = rp.add_subparsers(dest="op", required=True, parser_class=_Parser)
    for name in ("chain", "embed", "distset", "coverage"):
        r = rsub.add_parser(name, parents=[common])
        r.add_argument("--window", required=True, help="window JSON file")
        r.add_argument("--q", type=int, default=1)
        if name == "chain":
            r.add_argument("--gaps", type=_ints)
        if name == "embed":
            r.add_argument("--tree")
        if name in ("chain", "embed"):
            r.add_argument("--budget", type=int)
        if name == "coverage":
            r.add_argument("--lo", type=int)
            r.add_argument("--hi", type=int)
    rp.set_defaults(handler=cmd_search)

    wp = sub.add_parser("gen", help="generate window sets")
    wsub = wp.add_subparsers(dest="op", required=True, parser_class=_Parser)
    for name in ("uniform", "congruence", "planted"):
        w = wsub.add_parser(name, parents=[common])
        w.add_argument("--d", type=int, required=True)
        w.add_argument("--l", type=int, required=True)
        w.add_argument("--seed", type=int, default=0)
        w.add_argument("--density", type=float)
        if name == "congruence":
            w.add_argument("--g", type=int)
            w.add_argument("--residues", type=_json_arg)
        if name == "planted":
            w.add_argument("--witness", type=_json_arg)
    wp.set_defaults(handler=cmd_gen)
    return p


def _echo(a) -> dict:
    params = {}
    for k, v in sorted(vars(a).items()):
        if k in _NOT_ECHOED:
            continue
        params[k] = v
        if k in ("set", "tree", "window") and v is not None and Path(v).exists():
            params[k] = _file_digest(v)
    return params


def run(argv=None) -> tuple[int, str, str | None]:
    """Execute one invocation; returns (exit code, JSON text, output path or None)."""
    parser = build_parser()
    command = out_path = None
    doc: dict = {}
    try:
        a = parser.parse_args(argv)
        command = a.command + ("" if getattr(a, "op", None) is None else " " + a.op)
        out_path = a.output
        if a.threads is None:
            a.threads = config.default_threads()
        if a.threads < 1:
            raise UsageError("--threads must be at least 1")
        doc = {"command": command, "params": _echo(a)}
        code, result = a.handler(a)
        doc.update(result)
    except UsageError as exc:
        code = EXIT_USAGE
        doc = {"command": command, "error": {"type": "usage", "message": str(exc)}}
    except (ValidationError, EmptySphereError) as exc:
        code = EXIT_USAGE
        doc["command"] = command
        doc["error"] = {"type": "validation", "message": str(exc)}
    except OSError as exc:
        code = EXIT_USAGE
        doc["command"] = command
        doc["error"] = {"type": "io", "message": f"{exc.filename}: {exc.strerror}"}
    except ResourceLimitError as exc:
        code = EXIT_RESOURCE
        doc["command"] = command
        doc["error"] = {"type": "resource_limit", "message": str(exc)}
    doc["exit_code"] = code
    return code, dumps(doc) + "\n", out_path


def main(argv=None) -> int:
    code, text, path = run(argv)
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
