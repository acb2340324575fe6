"""Matching with small weighted leftover: a sequence of chomps steered by the
codegree ledger.

Each step picks which codegree bounds are still worth tracking, runs one chomp
with factor ``x = B^(gamma^4)`` and updates the ledger.  In ``theoretical``
mode the chomps are fed the scheduled bounds; in ``empirical`` mode they are
fed codegrees measured on the current survivor, with the schedule kept
alongside for comparison.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chomp import ChompParams, run_chomp
from .errors import CodegreeCapError, EmptyHypergraphError, ObservationViolation, RetryExhausted, ZeroDegreeError
from .hypergraph import DEFAULT_CODEGREE_CAP, Hypergraph, covered_vertices
from .ledger import CodegreeLedger, classify_logs, log_target_leftover, run_schedule
from .nibble import derive_seed, profile_for
from .report import build_id

E2 = math.e ** 2


@dataclass
class MCWAParams:
    gamma: float
    # analytic codegree bounds for j = 2..k+1; measured on the input when missing
    codegree_bounds: dict = field(default_factory=dict)
    eps: float | None = None
    mode: str = "empirical"         # or "theoretical"
    strictness: str = "lenient"     # or "strict"
    seed: int = 0
    max_retries: int = 1
    max_steps: int | None = None
    # desk-scale adaptations, applied only in lenient mode
    min_nibbles: int = 1
    theta_cap: float | None = None
    codegree_cap: int = DEFAULT_CODEGREE_CAP

    def __post_init__(self):
        if self.mode not in ("empirical", "theoretical"):
            raise ValueError(f"mode must be 'empirical' or 'theoretical', got {self.mode!r}")
        if self.strictness not in ("strict", "lenient"):
            raise ValueError(f"strictness must be 'strict' or 'lenient', got {self.strictness!r}")
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        self.codegree_bounds = {int(j): float(v) for j, v in self.codegree_bounds.items()}


@dataclass
class MCWAResult:
    matching: np.ndarray
    waste: np.ndarray
    survivor: Hypergraph
    report: dict

    @property
    def leftover(self):
        return self.report["leftover"]


def _measure(H, k, cap):
    out = {}
    for j in range(2, k + 2):
        try:
            out[j] = float(H.max_codegree(j, cap))
        except CodegreeCapError:
            out[j] = None
    return out


def _logs(bounds, k):
    # codegree bounds of 0 mean no such sets; log 0 is replaced by 0 (bound 1)
    return [math.log(max(bounds[j], 1.0)) for j in range(2, k + 2)]


def run_mcwa(H: Hypergraph, params: MCWAParams, weights=None) -> MCWAResult:
    lenient = params.strictness == "lenient"
    k, n, gamma = H.k, H.n, params.gamma
    notes = []
    profile = profile_for(H, inert_isolated=lenient)
    D = profile.D
    eps_in = profile.eps if params.eps is None else float(params.eps)
    measured0 = _measure(H, k, params.codegree_cap)
    analytic = {j: params.codegree_bounds.get(j, measured0[j]) for j in range(2, k + 2)}
    if any(v is None for v in analytic.values()):
        raise CodegreeCapError(0, 0, params.codegree_cap)
    for j, v in measured0.items():
        if v is not None and v > analytic[j]:
            notes.append(f"measured {j}-codegree {v:g} exceeds the supplied bound {analytic[j]:g}")

    ledger = CodegreeLedger.create(k, math.log(D), _logs(analytic, k), math.log(eps_in), gamma)
    measured_ledger_B = CodegreeLedger.create(
        k, math.log(D), _logs(measured0, k), math.log(profile.eps), gamma).logB
    logB = ledger.logB
    try:
        schedule = run_schedule(ledger.copy(), assert_observations=False)
    except ObservationViolation as exc:
        # happens when log x < 2: the e^2 gain outruns the x^-(k-j+1) shrink
        if not lenient:
            raise
        notes.append(f"reference schedule stops being non-increasing in j at t={exc.t} "
                     f"(log x = {ledger.log_x:.3g}); kept unchecked")
        schedule = run_schedule(ledger.copy(), assert_observations=False, check_monotone=False)
    t_star = ledger.t_star
    steps = t_star if params.max_steps is None else min(t_star, int(params.max_steps))
    log_x = ledger.log_x if k >= 2 else (1 - gamma**2) * logB
    x = math.exp(log_x)

    desk = {}
    if lenient:
        desk = {"min_nibbles": params.min_nibbles, "inert_isolated": True,
                "theta_cap": params.theta_cap if params.theta_cap is not None else 1 / (2 * (k + 1))}
        notes.append("lenient run: at least %d nibble(s) per chomp, nibble size capped at %.4g, "
                     "degree-0 vertices kept aside" % (desk["min_nibbles"], desk["theta_cap"]))

    cur = H
    cur_w = weights
    root_vertex = np.arange(n, dtype=np.int64)
    root_edge = np.arange(H.m, dtype=np.int64)
    matched, wasted, per_step = [], [], []
    stop_reason = "reached stop time"
    t = 0
    while t < (1 if k == 1 else steps):
        if cur.m == 0:
            stop_reason = "no edges left"
            break
        try:
            prof = profile_for(cur, inert_isolated=lenient)
        except (ZeroDegreeError, EmptyHypergraphError):
            stop_reason = "vertex of degree 0"
            break
        row = schedule.rows[t] if t < len(schedule.rows) else None
        if k == 1:
            J = frozenset()
            bounds = {}
            eps_t = math.exp(ledger.log_eps_star)
            ct1 = None
        elif params.mode == "theoretical":
            if row is None:
                stop_reason = "schedule ended"
                break
            J = schedule.jstar_at(t) if t < len(schedule.jstar_masks) else frozenset()
            bounds = {j: math.exp(row[j - 2]) for j in range(2, k + 2)}
            eps_t = math.exp(ledger.log_eps_at(t))
            ct1 = schedule.ct1_margins[t] if t < len(schedule.ct1_margins) else -math.inf
        else:
            meas = _measure(cur, k, params.codegree_cap)
            bounds = {j: max(v, 1.0) for j, v in meas.items() if v is not None}
            logs = _logs(bounds, k)
            J = frozenset(range(2, k + 1)) - classify_logs(logs, logB, gamma).super_stuck
            eps_t = prof.eps
            ct1 = 2 * math.log(eps_t) + math.log(prof.D) - logs[0] - ledger.thr_super
            if row is not None:
                over = [j for j in range(2, k + 2) if bounds[j] > E2 * math.exp(row[j - 2])]
                if over:
                    notes.append(f"t={t}: measured codegrees {over} exceed the schedule by more than e^2")
                    if not lenient:
                        stop_reason = "measured codegrees above schedule"
                        break
        if ct1 is not None and ct1 < 0:
            if not lenient:
                stop_reason = "codegree-to-degree ratio too small"
                break
            if not any(s.get("ct1_failed") for s in per_step):
                notes.append(f"t={t}: codegree-to-degree ratio below target (logged, run continues)")

        cp = ChompParams(
            x=x, jstar=J, codegree_bounds=bounds, eps=eps_t, D=prof.D,
            mode=params.strictness, max_retries=params.max_retries,
            seed=derive_seed(params.seed, t), codegree_cap=params.codegree_cap, **desk,
        )
        try:
            res = run_chomp(cur, cp, weights=cur_w, profile=prof)
        except RetryExhausted:
            stop_reason = f"retries exhausted in step {t}"
            raise
        matched.append(root_edge[res.matching])
        wasted.append(root_vertex[res.waste])
        root_vertex = root_vertex[res.survivor.vertex_map]
        root_edge = root_edge[res.survivor.edge_map]
        per_step.append({
            "t": t, "n": cur.n, "m": cur.m, "D": prof.D, "eps": eps_t,
            "jstar": sorted(J), "ct1_margin": ct1, "ct1_failed": bool(ct1 is not None and ct1 < 0),
            "codegrees": {str(j): v for j, v in bounds.items()},
            "scheduled_log_codegrees": None if row is None else [float(v) for v in row],
            "nibbles": len(res.trace.records), "theta": res.trace.theta,
            "matched_edges": int(len(res.matching)), "wasted": int(len(res.waste)),
            "survivors": res.survivor.n, "chomp_stop": res.stop_reason,
        })
        cur = res.survivor
        cur_w = res.survivor_weights
        t += 1
    if k == 1 and t == 1:
        stop_reason = "single chomp done"

    matching = np.concatenate(matched) if matched else np.zeros(0, dtype=np.int64)
    waste = np.concatenate(wasted) if wasted else np.zeros(0, dtype=np.int64)
    survivor = cur.with_maps(root_vertex, root_edge)
    covered = covered_vertices(H, matching)
    cover_mask = np.zeros(n, dtype=bool)
    cover_mask[covered] = True
    wasted_only = int(np.count_nonzero(~cover_mask[np.unique(waste)])) if len(waste) else 0

    logD = math.log(D)
    log_target = log_target_leftover(math.log(n), logB, gamma, logD)
    log_target_meas = log_target_leftover(math.log(n), measured_ledger_B, gamma, logD)
    per_tau = []
    if weights is not None:
        for wt in weights:
            tot = wt.total()
            unc = wt.total_on(~cover_mask)
            per_tau.append({
                "name": wt.name, "total": tot, "uncovered": unc,
                "fraction": unc / tot if tot > 0 else 0.0,
                "log_target": (math.log(tot) if tot > 0 else -math.inf)
                + (-1 + gamma) * logB + 10 / gamma**4 * math.log(logD),
            })
    report = {
        "build_id": build_id(),
        "seed": params.seed,
        "mode": params.mode,
        "strictness": params.strictness,
        "gamma": gamma,
        "k": k,
        "n": n,
        "D": D,
        "eps": eps_in,
        "logB": logB,
        "B": math.exp(logB) if logB < 700 else math.inf,
        "A": 10 / gamma**4,
        "x": x,
        "t_star": t_star,
        "t_reached": t,
        "stop_reason": stop_reason,
        "matched_vertices": int(len(covered)),
        "waste": wasted_only,
        "leftover": n - int(len(covered)),
        "survivors": survivor.n,
        "log_target_leftover": log_target,
        "target_leftover": math.exp(log_target) if log_target < 700 else math.inf,
        "log_target_leftover_measured": log_target_meas,
        "per_tau": per_tau,
        "per_step": per_step,
        "schedule": {"t_end": schedule.t_end, "stop_reason": schedule.stop_reason},
        "input_codegrees": {str(j): v for j, v in analytic.items()},
        "measured_codegrees": {str(j): v for j, v in measured0.items()},
        "notes": notes,
        "matching": matching,
    }
    return MCWAResult(matching, waste, survivor, report)
