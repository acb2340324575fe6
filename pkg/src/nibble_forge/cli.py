"""Command line entry point: ``nibble-forge gen | run | verify``."""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .chomp import ChompParams, check_chomp_hypotheses, run_chomp
from .errors import (
    HypergraphError,
    InadmissibleNibbleError,
    InstanceError,
    LedgerError,
    ObservationViolation,
    RetryExhausted,
)
from .hypergraph import (
    DEFAULT_CODEGREE_CAP,
    covered_vertices,
    fit_regularity,
    load_hypergraph,
    verify_matching,
)
from .instances import (
    Instance,
    extract_partial_steiner,
    extract_triangle_factor,
    gen_complete_uniform,
    gen_cyclic_coloring,
    gen_design_hypergraph,
    gen_sts,
    gen_triangle_aux,
    load_roles,
)
from .ledger import Trajectory, check_observations, replay
from .mcwa import MCWAParams, run_mcwa
from .nibble import NibbleParams, check_nibble_hypotheses, nibble_with_retry
from .report import build_id, dumps, write_report
from .weights import WeightFamily

EXIT_OK, EXIT_FAIL, EXIT_HYPOTHESIS, EXIT_RETRIES = 0, 1, 2, 3
SEED_ENV = "NIBBLE_FORGE_SEED"


def _parse_dj(text):
    """``2=40,3=5`` -> {2: 40.0, 3: 5.0}"""
    out = {}
    for part in filter(None, (text or "").split(",")):
        j, v = part.split("=")
        out[int(j)] = float(v)
    return out


def _parse_jstar(text):
    return frozenset(int(j) for j in filter(None, (text or "").split(",")))


# gen

def cmd_gen(args):
    kind = args.kind
    if kind == "cyclic-coloring":
        G = gen_cyclic_coloring(args.n)
        Path(args.out).write_text(json.dumps(G.to_json()))
        print(f"wrote cyclic colouring of order {args.n} to {args.out}")
        return EXIT_OK
    if kind == "complete":
        inst = gen_complete_uniform(args.n, args.u)
    elif kind == "design":
        inst = gen_design_hypergraph(args.n, args.t, args.r)
    elif kind == "sts":
        inst = gen_sts(args.n)
    elif kind == "triangle-aux":
        G = gen_cyclic_coloring(args.n)
        if args.coloring:
            from .instances import ColoredDigraph
            G = ColoredDigraph.from_json(json.loads(Path(args.coloring).read_text()))
        inst = gen_triangle_aux(G)
    else:
        raise SystemExit(f"unknown kind {kind}")
    inst.save(args.out)
    H = inst.hypergraph
    prof = fit_regularity(H)
    print(f"{kind}: n={H.n} m={H.m} u={H.uniformity_bound} D={prof.D:g} eps={prof.eps:.4g}")
    for j in range(2, min(H.uniformity_bound, args.j_cap) + 1):
        print(f"  C_{j} = {H.max_codegree(j, args.codegree_cap)}")
    return EXIT_OK


# run

def _load_config(path):
    if not path:
        return {}
    return json.loads(Path(path).read_text())


def _resolve(args):
    """CLI flags beat the config file, which beats the environment and defaults."""
    cfg = _load_config(args.config)
    opts = {}
    for key in ("seed", "mode", "theta", "x", "gamma", "jstar", "dj", "eps", "weights",
                "retries", "trials", "jobs", "codegree_cap", "exec_mode", "T", "max_steps"):
        val = getattr(args, key, None)
        opts[key] = val if val is not None else cfg.get(key)
    if opts["seed"] is None:
        opts["seed"] = int(os.environ.get(SEED_ENV, 0))
    # --mode takes either vocabulary; empirical/theoretical pick the mcwa execution mode
    if opts["mode"] in ("empirical", "theoretical"):
        opts["exec_mode"], opts["mode"] = opts["mode"], None
    defaults = {"mode": "lenient", "retries": 1, "trials": 1, "jobs": 1,
                "codegree_cap": DEFAULT_CODEGREE_CAP, "exec_mode": "empirical", "gamma": 0.2}
    for k, v in defaults.items():
        if opts[k] is None:
            opts[k] = v
    if isinstance(opts["jstar"], str) or opts["jstar"] is None:
        opts["jstar"] = _parse_jstar(opts["jstar"])
    if isinstance(opts["dj"], str) or opts["dj"] is None:
        opts["dj"] = _parse_dj(opts["dj"])
    return opts


def _one_run(algo, inst_path, opts, seed):
    """Run one seed; returns (exit_code, report_dict, extra_files)."""
    H = load_hypergraph(inst_path)
    weights = WeightFamily.load(H.n, opts["weights"]) if opts["weights"] else None
    strict = opts["mode"] == "strict"
    base = {"build_id": build_id(), "algorithm": algo, "instance": str(inst_path), "seed": seed,
            "params": {k: (sorted(v) if isinstance(v, frozenset) else v) for k, v in opts.items()}}
    try:
        if algo == "nibble":
            if opts["theta"] is None:
                raise SystemExit("--theta is required for a nibble")
            p = NibbleParams(theta=opts["theta"], jstar=opts["jstar"], codegree_bounds=opts["dj"],
                             eps=opts["eps"], mode=opts["mode"], max_retries=opts["retries"],
                             seed=seed, codegree_cap=opts["codegree_cap"])
            hyp = check_nibble_hypotheses(H, p, weights=weights)
            base["hypotheses"] = hyp.to_dict()
            if strict and not hyp.holds:
                return EXIT_HYPOTHESIS, base, {}
            out = nibble_with_retry(H, p, weights=weights)
            base.update(out.to_dict())
            base["leftover"] = H.n - len(covered_vertices(H, out.matching))
            return EXIT_OK, base, {}
        if algo == "chomp":
            if opts["x"] is None:
                raise SystemExit("--x is required for a chomp")
            p = ChompParams(x=opts["x"], jstar=opts["jstar"], codegree_bounds=opts["dj"], eps=opts["eps"],
                            mode=opts["mode"], max_retries=opts["retries"], seed=seed,
                            theta_override=opts["theta"], T_override=opts["T"],
                            codegree_cap=opts["codegree_cap"])
            hyp = check_chomp_hypotheses(H, p, weights=weights)
            base["hypotheses"] = hyp.to_dict()
            if strict and not hyp.holds:
                return EXIT_HYPOTHESIS, base, {}
            res = run_chomp(H, p, weights=weights)
            base.update({
                "matching": res.matching, "waste": res.waste,
                "matched_vertices": int(len(covered_vertices(H, res.matching))),
                "survivors": res.survivor.n, "stop_reason": res.stop_reason,
                "report": res.report.to_dict(), "theta": res.trace.theta, "T": res.trace.T,
            })
            base["leftover"] = H.n - base["matched_vertices"]
            return EXIT_OK, base, {"trace": res.trace}
        if algo == "mcwa":
            p = MCWAParams(gamma=opts["gamma"], codegree_bounds=opts["dj"], eps=opts["eps"],
                           mode=opts["exec_mode"], strictness=opts["mode"], seed=seed,
                           max_retries=opts["retries"], max_steps=opts["max_steps"],
                           codegree_cap=opts["codegree_cap"])
            try:
                res = run_mcwa(H, p, weights=weights)
            except ObservationViolation as exc:
                # strict runs refuse a reference schedule outside the admissible regime
                base["hypotheses"] = {"holds": False, "failed": [str(exc)]}
                return EXIT_HYPOTHESIS, base, {}
            base.update(res.report)
            return EXIT_OK, base, {}
    except RetryExhausted as exc:
        base["error"] = str(exc)
        if exc.best is not None and hasattr(exc.best, "report"):
            base["best_report"] = exc.best.report.to_dict()
        return EXIT_RETRIES, base, {}
    raise SystemExit(f"unknown algorithm {algo}")


def _trial(payload):
    algo, inst, opts, seed = payload
    code, rep, _ = _one_run(algo, inst, opts, seed)
    return seed, code, json.loads(dumps(rep))


def cmd_run(args):
    opts = _resolve(args)
    out = Path(args.out)
    if out.suffix == ".json":
        out = out.with_suffix("")
    out.parent.mkdir(parents=True, exist_ok=True)
    seeds = [opts["seed"] + i for i in range(int(opts["trials"]))]
    if len(seeds) == 1:
        code, rep, files = _one_run(args.algorithm, args.instance, opts, seeds[0])
        write_report(rep, f"{out}.json")
        if "trace" in files:
            files["trace"].save_csv(f"{out}.trace.csv")
            files["trace"].save_json(f"{out}.trace.json")
        _summarise(rep, code)
        return code
    payloads = [(args.algorithm, args.instance, opts, s) for s in seeds]
    if int(opts["jobs"]) > 1:
        with ProcessPoolExecutor(max_workers=int(opts["jobs"])) as pool:
            results = list(pool.map(_trial, payloads))
    else:
        results = [_trial(p) for p in payloads]
    results.sort(key=lambda r: r[0])
    agg = {"build_id": build_id(), "algorithm": args.algorithm, "trials": {str(s): rep for s, _, rep in results},
           "exit_codes": {str(s): c for s, c, _ in results}}
    left = [rep.get("leftover") for _, _, rep in results if rep.get("leftover") is not None]
    if left:
        agg["median_leftover"] = float(np.median(left))
    write_report(agg, f"{out}.json")
    print(f"{len(results)} trials written to {out}.json")
    return max(c for _, c, _ in results)


def _summarise(rep, code):
    bits = [f"exit={code}"]
    for key in ("leftover", "matched_vertices", "survivors", "stop_reason", "t_reached"):
        if key in rep:
            bits.append(f"{key}={rep[key]}")
    print(" ".join(bits))


# verify

def _verify_instance(path, cap):
    H = load_hypergraph(path)
    ok = True
    deg = H.degrees()
    hand = int(deg.sum()) == int(H.sizes.sum())
    print(f"handshake identity: {'ok' if hand else 'FAIL'}")
    ok &= hand
    sample = range(min(H.n, 50))
    single = all(H.codegree([v]) == deg[v] for v in sample)
    print(f"degree equals singleton codegree: {'ok' if single else 'FAIL'}")
    ok &= single
    cods = [H.max_codegree(j, cap) for j in range(1, H.uniformity_bound + 1)]
    mono = all(a >= b for a, b in zip(cods, cods[1:]))
    print(f"codegrees non-increasing {cods}: {'ok' if mono else 'FAIL'}")
    ok &= mono
    side = load_roles(path)
    if side and side.get("kind") == "triangle-aux":
        n = side["params"]["n"]
        checks = {
            "vertex count": abs(H.n - 2 * n) <= 2 * n / math.sqrt(n),
            "max degree": H.max_degree() <= (1 + 10 / math.sqrt(n)) * n * n,
            "C_2 <= 3n": cods[1] <= 3 * n, "C_3 <= 3n": cods[2] <= 3 * n,
            "C_4 <= 6": cods[3] <= 6, "C_5 <= 6": cods[4] <= 6, "C_6 <= 2": cods[5] <= 2,
        }
        for name, good in checks.items():
            print(f"{name}: {'ok' if good else 'FAIL'}")
            ok &= good
    return ok


def _verify_report(path, instance, cap):
    data = json.loads(Path(path).read_text())
    if "rows" in data and "start" in data:
        traj = Trajectory.from_json(data)
        bad = check_observations(traj)
        final = replay(traj.start, traj.jstar_masks)
        same = all(abs(a - b) <= 1e-9 * max(1.0, abs(b)) for a, b in zip(final, traj.rows[-1]))
        print(f"replay matches recorded final state: {'ok' if same else 'FAIL'}")
        for v in bad[:10]:
            print(f"  {v}")
        print(f"observation violations: {len(bad)}")
        return same and not bad
    if not instance:
        raise SystemExit("verifying a run report needs --instance")
    H = load_hypergraph(instance)
    runs = data["trials"].values() if "trials" in data else [data]
    ok = True
    for rep in runs:
        M = rep.get("matching", [])
        chk = verify_matching(H, M)
        print(f"seed {rep.get('seed')}: matching of {len(M)} edges "
              f"{'is disjoint' if chk.valid else 'has clashes'}, uncovered={chk.uncovered}")
        ok &= chk.valid
        side = load_roles(instance)
        if side and side.get("kind") in ("triangle-aux", "design"):
            roles = [(side["roles"][str(v)]["kind"], side["roles"][str(v)]["value"]) for v in range(H.n)]
            inst = Instance(side["kind"], H, roles, side["params"], {k: v for k, v in side.items()
                                                                     if k not in ("roles", "params", "kind")})
            if side["kind"] == "triangle-aux":
                fac = extract_triangle_factor(inst, M)
                print(f"  {len(fac.triangles)} rainbow triangles, valid={fac.valid}")
                ok &= fac.valid
            else:
                ps = extract_partial_steiner(inst, M)
                print(f"  {ps.size} blocks, valid={ps.valid}")
                ok &= ps.valid
    return ok


def cmd_verify(args):
    path = Path(args.path)
    if path.suffix == ".json":
        ok = _verify_report(path, args.instance, args.codegree_cap)
    else:
        ok = _verify_instance(path, args.codegree_cap)
    print("verified" if ok else "verification FAILED")
    return EXIT_OK if ok else EXIT_FAIL


def build_parser():
    ap = argparse.ArgumentParser(prog="nibble-forge", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate an instance")
    g.add_argument("--kind", required=True,
                   choices=["complete", "design", "sts", "triangle-aux", "cyclic-coloring"])
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--u", type=int, default=3, help="edge size for complete hypergraphs")
    g.add_argument("--t", type=int, default=2)
    g.add_argument("--r", type=int, default=3)
    g.add_argument("--coloring", help="JSON colouring for triangle-aux (default: cyclic)")
    g.add_argument("--out", required=True)
    g.add_argument("--j-cap", type=int, default=6, help="largest j whose codegree is printed")
    g.add_argument("--codegree-cap", type=int, default=DEFAULT_CODEGREE_CAP)
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="run a nibble, chomp or full matching schedule")
    r.add_argument("algorithm", choices=["nibble", "chomp", "mcwa"])
    r.add_argument("--instance", required=True)
    r.add_argument("--out", required=True, help="output prefix; writes PREFIX.json")
    r.add_argument("--config", help="JSON file with default options")
    r.add_argument("--seed", type=int)
    r.add_argument("--mode", choices=["strict", "lenient", "empirical", "theoretical"])
    r.add_argument("--exec-mode", dest="exec_mode", choices=["empirical", "theoretical"])
    r.add_argument("--theta", type=float)
    r.add_argument("--T", type=int, help="number of nibbles in a chomp")
    r.add_argument("--x", type=float)
    r.add_argument("--gamma", type=float)
    r.add_argument("--jstar", help="comma separated codegree indices to track, e.g. 2,3")
    r.add_argument("--dj", help="codegree bounds, e.g. 2=40,3=5")
    r.add_argument("--eps", type=float)
    r.add_argument("--weights", help="weight family JSON")
    r.add_argument("--retries", type=int)
    r.add_argument("--trials", type=int)
    r.add_argument("--jobs", type=int)
    r.add_argument("--max-steps", dest="max_steps", type=int)
    r.add_argument("--codegree-cap", dest="codegree_cap", type=int)
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="check an instance, run report or ledger trajectory")
    v.add_argument("path")
    v.add_argument("--instance")
    v.add_argument("--codegree-cap", type=int, default=DEFAULT_CODEGREE_CAP)
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (HypergraphError, InadmissibleNibbleError, InstanceError, LedgerError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
