"""Command-line front end.

Exit statuses: 0 ok, 1 verification violations, 2 input error,
3 capacity, precision, sampling or invariant failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import random
import secrets
import statistics
import sys
import time

from . import derand, gadget as gadget_mod
from .certified import DEFAULT_MAX_BITS
from .errors import InputError, RpcError
from .forest import (
    build_flat_baseline,
    build_randomized,
    deserialize,
    distance_estimate,
    query,
    serialize,
)
from .graph import Graph, read_graph, write_graph
from .params import DEFAULT_DELTA, derive_params
from .verify import verify_exhaustive, verify_statistical

BENCH_HEADER = [
    "mode", "n", "m", "f", "L", "h", "alpha", "K", "covering_value",
    "mean_selected", "max_selected", "query_us", "build_us", "violations",
    "pairs", "trees_used", "K_max", "seed",
]


def _ids(text: str) -> list[int]:
    text = text.strip()
    if not text:
        return []
    try:
        return [int(tok) for tok in text.split(",")]
    except ValueError as exc:
        raise InputError(f"edge ids must be comma-separated integers, got {text!r}") from exc


def _seed(args, out) -> int:
    if args.seed is None:
        args.seed = secrets.randbelow(2 ** 32)
    print(f"seed {args.seed}", file=out)
    return args.seed


def _require(args, name):
    val = getattr(args, name, None)
    if val is None:
        raise InputError(f"--{name.replace('_', '-')} is required")
    return val


def random_graph(n: int, m: int, lo: int, hi: int, directed: bool, seed: int) -> Graph:
    """Uniform simple graph with ``m`` distinct vertex pairs and integer weights in ``[lo, hi]``."""
    if n < 1 or m < 0:
        raise InputError("need n >= 1 and m >= 0")
    if lo < 1 or hi < lo:
        raise InputError("weight range must satisfy 1 <= lo <= hi")
    cap = n * (n - 1) if directed else n * (n - 1) // 2
    if m > cap:
        raise InputError(f"m = {m} exceeds {cap} possible vertex pairs")
    rng = random.Random(seed)
    if directed:
        slots = [(u, v) for u in range(n) for v in range(n) if u != v]
    else:
        slots = [(u, v) for u in range(n) for v in range(u + 1, n)]
    chosen = rng.sample(slots, m)
    return Graph(n, [(u, v, rng.randint(lo, hi)) for u, v in chosen], directed=directed)


def _weights(text):
    try:
        lo, hi = (int(x) for x in text.split(":"))
    except ValueError as exc:
        raise InputError("--weights expects lo:hi") from exc
    return lo, hi


def cmd_gen(args, out):
    lo, hi = _weights(args.weights)
    seed = _seed(args, out)
    g = random_graph(args.n, args.m, lo, hi, not args.undirected, seed)
    write_graph(g, _require(args, "out"))
    print(f"wrote graph n={g.n} m={g.m} to {args.out}", file=out)
    return 0


def _load_graph(args, allow_zero=False) -> Graph:
    return read_graph(_require(args, "graph"), allow_zero=allow_zero)


def build_forest(g, mode, f, L, seed=None, delta=DEFAULT_DELTA, c=1.0,
                 budget=derand.DEFAULT_BUDGET, max_bits=DEFAULT_MAX_BITS):
    """Dispatch to the builder for ``mode``; returns ``(forest, extra info lines)``."""
    if mode == "det":
        params = derive_params(f, L, g.n, "det")
        pairs = derand.enumerate_pairs(g, f, L, budget)
        forest = derand.derandomize_forest(g, pairs, params, max_bits=max_bits)
        a = forest.audit
        info = [f"pairs {a.pairs}", f"trees_used {a.trees_used}", f"K_max {a.K_max}",
                f"retention {'ok' if a.retention_ok else 'FAIL'}",
                f"progress {'ok' if a.progress_ok else 'FAIL'}",
                f"precision_escalations {len(a.escalations)}"]
        return forest, info
    if mode == "rand-improved":
        params = derive_params(f, L, g.n, mode, delta=delta)
        return build_randomized(g, params, seed), []
    if mode == "flat-baseline":
        return build_flat_baseline(g, f, L, g.n, c, seed), []
    raise InputError(f"unknown mode {mode!r}")


def cmd_build(args, out):
    g = _load_graph(args, allow_zero=args.allow_zero)
    seed = None if args.mode == "det" else _seed(args, out)
    forest, info = build_forest(g, args.mode, args.f, args.L, seed, args.delta, args.c,
                                args.budget, args.precision_cap)
    p = forest.params
    print(f"mode {p.mode}", file=out)
    print(f"f {p.f} L {p.L} h {p.h} alpha {p.alpha} K {p.K} p {p.p_descr}", file=out)
    print(f"covering_value {forest.covering_value}", file=out)
    for line in info:
        print(line, file=out)
    with open(_require(args, "out"), "wb") as fh:
        fh.write(serialize(forest))
    if args.audit and forest.audit is not None:
        with open(args.audit, "w") as fh:
            fh.write("\n".join(forest.audit.lines()) + "\n")
    return 0


def _load_forest(args, g):
    with open(_require(args, "forest"), "rb") as fh:
        return deserialize(fh.read(), g)


def cmd_query(args, out):
    g = _load_graph(args, allow_zero=args.allow_zero)
    forest = _load_forest(args, g)
    F = _ids(args.fail)
    res = query(forest, F)
    print(f"selected {len(res)}", file=out)
    for tree, leaf in res:
        print(f"tree {tree} leaf {leaf}", file=out)
    if args.s is not None or args.t is not None:
        s, t = _require(args, "s"), _require(args, "t")
        est = distance_estimate(forest, g, s, t, F)
        print(f"estimate {'unreachable' if est == float('inf') else est}", file=out)
    return 0


def cmd_verify(args, out):
    g = _load_graph(args, allow_zero=args.allow_zero)
    forest = _load_forest(args, g)
    f = forest.params.f if args.f is None else args.f
    L = forest.params.L if args.L is None else args.L
    if args.exhaustive:
        rep = verify_exhaustive(g, forest, f, L)
    else:
        seed = _seed(args, out)
        rep = verify_statistical(g, forest, f, L, args.samples, seed)
    print(rep.records() if args.records else rep.text(), file=out)
    return 0 if rep.ok else 1


def cmd_gadget(args, out):
    gd = gadget_mod.build_gadget(args.L, args.f)
    gadget_mod.write_gadget(gd, _require(args, "out"))
    print(f"gadget L={gd.L} f={gd.f} n={gd.graph.n} m={gd.graph.m} leaves={len(gd.leaves)} "
          f"bound={gadget_mod.leaf_count_bound(gd.L, gd.f)}", file=out)
    return 0


def cmd_certify(args, out):
    gd = gadget_mod.read_gadget(_require(args, "gadget"))
    with open(_require(args, "forest"), "rb") as fh:
        forest = deserialize(fh.read(), gd.graph)
    rep = gadget_mod.certify_rpc_against_gadget(gd, forest, args.cutoff, args.f)
    print(rep.text(), file=out)
    return 0 if rep.ok else 1


def _bench_graph(spec, base):
    if isinstance(spec, str):
        path = spec if os.path.isabs(spec) else os.path.join(base, spec)
        return read_graph(path)
    return random_graph(spec["n"], spec["m"], spec.get("lo", 1), spec.get("hi", 10),
                        spec.get("directed", True), spec.get("seed", 0))


def bench_row(g, run) -> dict:
    """One benchmark record; timings are medians over repetitions in microseconds."""
    mode, f, L = run["mode"], run["f"], run["L"]
    reps = max(1, int(run.get("repetitions", 1)))
    seed = int(run.get("seed", 0))
    builds, forest, info = [], None, {}
    for _ in range(reps):
        t0 = time.perf_counter()
        forest, _lines = build_forest(g, mode, f, L, seed, run.get("delta", DEFAULT_DELTA),
                                      run.get("c", 1.0), run.get("budget", derand.DEFAULT_BUDGET))
        builds.append(time.perf_counter() - t0)
    if forest.audit is not None:
        info = {"pairs": forest.audit.pairs, "trees_used": forest.audit.trees_used,
                "K_max": forest.audit.K_max}
    rng = random.Random(seed)
    nq = int(run.get("queries", 200))
    sizes, times = [], []
    for _ in range(nq):
        k = rng.randint(0, min(f, g.m))
        F = rng.sample(range(g.m), k)
        per = []
        for _ in range(reps):
            t0 = time.perf_counter()
            res = query(forest, F)
            per.append(time.perf_counter() - t0)
        times.append(statistics.median(per))
        sizes.append(len(res))
    check = run.get("verify", "statistical")
    if check == "exhaustive":
        violations = len(verify_exhaustive(g, forest, f, L).violations)
    elif check == "statistical":
        violations = len(verify_statistical(g, forest, f, L, int(run.get("samples", 200)), seed).violations)
    else:
        violations = ""
    p = forest.params
    return {
        "mode": mode, "n": g.n, "m": g.m, "f": f, "L": L, "h": p.h, "alpha": p.alpha, "K": p.K,
        "covering_value": forest.covering_value,
        "mean_selected": f"{statistics.fmean(sizes):.3f}" if sizes else "",
        "max_selected": max(sizes) if sizes else "",
        "query_us": f"{1e6 * statistics.fmean(times):.1f}" if times else "",
        "build_us": f"{1e6 * statistics.median(builds):.1f}",
        "violations": violations,
        "pairs": info.get("pairs", ""), "trees_used": info.get("trees_used", ""),
        "K_max": info.get("K_max", ""), "seed": seed,
    }


def cmd_bench(args, out):
    path = _require(args, "config")
    with open(path) as fh:
        try:
            config = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"bad bench config: {exc}") from exc
    runs = config["runs"] if isinstance(config, dict) else config
    base = os.path.dirname(os.path.abspath(path))
    rows = []
    for run in runs:
        g = _bench_graph(run["graph"], base)
        rows.append(bench_row(g, run))
    target = open(args.out, "w", newline="") if args.out else out
    try:
        w = csv.DictWriter(target, fieldnames=BENCH_HEADER)
        w.writeheader()
        w.writerows(rows)
    finally:
        if args.out:
            target.close()
    return 0


def _globals(parser, suppress):
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--graph", default=d, help="graph file")
    parser.add_argument("--out", default=d, help="output file or directory")
    parser.add_argument("--seed", type=int, default=d, help="random seed")
    parser.add_argument("--budget", type=int, default=argparse.SUPPRESS if suppress else derand.DEFAULT_BUDGET,
                        help="cap on (F, s, t) queries for pair enumeration")
    parser.add_argument("--precision-cap", type=int,
                        default=argparse.SUPPRESS if suppress else DEFAULT_MAX_BITS,
                        help="maximum bits for certified comparisons")
    parser.add_argument("--allow-zero", action="store_true",
                        default=argparse.SUPPRESS if suppress else False,
                        help="accept zero-weight edges (gadget graphs)")
    parser.add_argument("-v", "--verbose", action="store_true",
                        default=argparse.SUPPRESS if suppress else False)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rpcover", description="Replacement path coverings.")
    _globals(parser, False)
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    _globals(common, True)

    p = sub.add_parser("gen", parents=[common], help="random graph")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--weights", default="1:10", help="integer weight range lo:hi")
    p.add_argument("--undirected", action="store_true")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("build", parents=[common], help="build a covering")
    p.add_argument("--f", type=int, required=True)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--mode", choices=["det", "rand-improved", "flat-baseline"], required=True)
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--audit", help="write the derandomization audit log here")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", parents=[common], help="subfamily for a failure set")
    p.add_argument("--forest", required=True)
    p.add_argument("--fail", default="", help="comma-separated failed edge ids")
    p.add_argument("--s", type=int)
    p.add_argument("--t", type=int)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("verify", parents=[common], help="check the covering properties")
    p.add_argument("--forest", required=True)
    mx = p.add_mutually_exclusive_group(required=True)
    mx.add_argument("--exhaustive", action="store_true")
    mx.add_argument("--samples", type=int)
    p.add_argument("--f", type=int)
    p.add_argument("--L", type=int)
    p.add_argument("--records", action="store_true", help="key=value output")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gadget", parents=[common], help="lower-bound instance")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--f", type=int, required=True)
    p.set_defaults(func=cmd_gadget)

    p = sub.add_parser("certify", parents=[common], help="certify a covering on a gadget")
    p.add_argument("--gadget", required=True, help="directory written by 'gadget'")
    p.add_argument("--forest", required=True)
    p.add_argument("--cutoff", type=int)
    p.add_argument("--f", type=int)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("bench", parents=[common], help="benchmark runs to CSV")
    p.add_argument("--config", required=True, help="JSON list of runs")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, out)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RpcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
