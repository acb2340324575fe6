"""A chomp: a run of nibbles with one frozen nibble size, shrinking the vertex
count by roughly a factor ``x`` while tracking degree/codegree/weight schedules.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .checks import ConclusionReport, HypothesisReport
from .errors import CodegreeCapError, RetryExhausted, ZeroDegreeError
from .hypergraph import DEFAULT_CODEGREE_CAP, Hypergraph, covered_vertices
from .nibble import NibbleParams, derive_seed, nibble_with_retry, profile_for

E2 = math.e ** 2
E3 = math.e ** 3


@dataclass
class ChompParams:
    x: float
    jstar: frozenset = frozenset()
    codegree_bounds: dict = field(default_factory=dict)
    eps: float | None = None
    D: float | None = None
    mode: str = "lenient"
    max_retries: int = 1
    seed: int = 0
    theta_override: float | None = None
    T_override: int | None = None
    # desk-scale knobs, all off by default
    theta_cap: float | None = None
    min_nibbles: int = 0
    inert_isolated: bool = False
    power_slack: float | None = None  # exponent gap for x^k <= D^(1 - slack)
    codegree_cap: int = DEFAULT_CODEGREE_CAP

    def __post_init__(self):
        if self.x <= 1:
            raise ValueError("x must exceed 1")
        self.jstar = frozenset(int(j) for j in self.jstar)
        self.codegree_bounds = {int(j): float(v) for j, v in self.codegree_bounds.items()}
        if self.mode not in ("strict", "lenient"):
            raise ValueError(f"mode must be 'strict' or 'lenient', got {self.mode!r}")


def chomp_size(D, x, theta_override=None, T_override=None, theta_cap=None, min_nibbles=0):
    """Nibble size and count: ``theta = 1/log(D)^2`` and ``T = floor(log(x)/theta)``."""
    logD = math.log(D) if D > 1 else 0.0
    theta = theta_override if theta_override is not None else (1 / logD**2 if logD > 0 else math.inf)
    if theta_cap is not None:
        theta = min(theta, theta_cap)
    if T_override is not None:
        T = int(T_override)
    else:
        # tiny slack so that exact products like 4*log(x) with theta=1/4 floor correctly
        T = math.floor(math.log(x) / theta * (1 + 1e-12)) if math.isfinite(theta) else 0
    return theta, max(T, int(min_nibbles))


@dataclass
class ChompTrace:
    records: list = field(default_factory=list)
    theta: float = 0.0
    T: int = 0
    stop_reason: str = "completed"

    def to_json(self):
        return {"theta": self.theta, "T": self.T, "stop_reason": self.stop_reason, "records": self.records}

    def save_json(self, path):
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    def save_csv(self, path):
        if not self.records:
            Path(path).write_text("")
            return
        cols = [c for c in self.records[0] if not isinstance(self.records[0][c], (list, dict))]
        with open(path, "w", newline="") as fh:
            wr = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
            wr.writeheader()
            for rec in self.records:
                wr.writerow(rec)


@dataclass
class ChompResult:
    matching: np.ndarray   # edge ids of the input hypergraph
    waste: np.ndarray      # vertex ids of the input hypergraph
    survivor: Hypergraph   # vertex_map / edge_map point into the input
    trace: ChompTrace
    report: ConclusionReport
    hypotheses: HypothesisReport
    survivor_weights: object = None

    @property
    def stop_reason(self):
        return self.trace.stop_reason

    def __iter__(self):
        return iter((self.matching, self.waste, self.survivor, self.trace))


def _measured_bounds(H, js, given, cap):
    out = {}
    for j in js:
        if j in given:
            out[j] = given[j]
        else:
            try:
                out[j] = float(H.max_codegree(j, cap))
            except CodegreeCapError:
                out[j] = None
    return out


def check_chomp_hypotheses(H, params: ChompParams, profile=None, weights=None) -> HypothesisReport:
    """Preconditions of a single chomp, compared on a log scale."""
    if profile is None:
        profile = profile_for(H, params.inert_isolated)
    eps = profile.eps if params.eps is None else params.eps
    D = profile.D if params.D is None else params.D
    k, x, J = H.k, params.x, params.jstar
    logD = math.log(D) if D > 1 else 0.0
    llog = math.log(logD) if logD > 0 else -math.inf
    bounds = _measured_bounds(H, range(2, k + 2), params.codegree_bounds, params.codegree_cap)
    rep = HypothesisReport()
    D2 = bounds.get(2)
    if D2:
        if 2 in J or k == 1:
            rep.require("C1", math.log(eps**2 * D / D2), 8 * llog)
        else:
            rep.require("C2", math.log(eps**2 * D / D2) - (k - 2) * math.log(x), 8 * llog)
    for j in sorted(J):
        hi, lo = bounds.get(j), bounds.get(j + 1)
        if not (hi and lo):
            rep.require(f"C3/C4[{j}]", 0, 0, skipped=True, note="codegree unavailable")
        elif j + 1 in J:
            rep.require(f"C3[{j}]", math.log(hi / lo) - math.log(x), 10 * llog)
        else:
            rep.require(f"C4[{j}]", math.log(hi / lo) - (k - j + 1) * math.log(x), 9 * llog)
    rep.require("C5", eps, 1 / (x * logD**2) if logD > 0 else math.inf, at_most=True)
    if weights is not None and len(weights):
        tmax = weights.max_value()
        for wt in weights:
            tot = wt.total()
            lhs = math.log(eps * tot) if tot > 0 else -math.inf
            rhs = (math.log(tmax) if tmax > 0 else -math.inf) + 3 + 7 * llog
            rep.require(f"CP1[{wt.name}]", lhs, rhs)
        cap = logD ** 2.2 if logD > 0 else 0.0
        rep.require("CP2", math.log(max(weights.max_support(), 1)), cap, at_most=True)
        rep.require("CP3", math.log(max(weights.involvement(), 1)), cap, at_most=True)
    slack = params.power_slack
    rep.require("CP4", k * math.log(x), (1 - (slack or 0.0)) * logD, at_most=True,
                note="" if slack else "no slack exponent given; checked with slack 0")
    return rep


def run_chomp(H: Hypergraph, params: ChompParams, weights=None, profile=None) -> ChompResult:
    if profile is None:
        profile = profile_for(H, params.inert_isolated)
    D0 = profile.D if params.D is None else float(params.D)
    eps0 = profile.eps if params.eps is None else float(params.eps)
    k, n = H.k, H.n
    theta, T = chomp_size(D0, params.x, params.theta_override, params.T_override,
                          params.theta_cap, params.min_nibbles)
    hyp = check_chomp_hypotheses(H, params, profile, weights)
    J = sorted(params.jstar)
    Dj0 = _measured_bounds(H, J, params.codegree_bounds, params.codegree_cap)
    s = theta ** 1.5
    tau0 = weights.totals() if weights is not None else []

    trace = ChompTrace(theta=theta, T=T)
    cur = H
    root_vertex = np.arange(n, dtype=np.int64)
    root_edge = np.arange(H.m, dtype=np.int64)
    cur_w = weights
    matched, wasted = [], []
    D_i = D0
    for i in range(T):
        if cur.m == 0:
            trace.stop_reason = "no edges left"
            break
        if not params.inert_isolated and cur.min_degree() == 0:
            trace.stop_reason = "vertex of degree 0"
            break
        lo_n, hi_n = n * (1 - theta - 2 * s) ** (i + 1), n * (1 - theta + 2 * s) ** (i + 1)
        lo_D, hi_D = D0 * (1 - k * theta - s) ** (i + 1), D0 * (1 - k * theta + s) ** (i + 1)
        tau_lo = [t * (1 - theta - s) ** (i + 1) for t in tau0]
        tau_hi = [t * (1 - theta + s) ** (i + 1) for t in tau0]

        def in_bands(out):
            if not (lo_n <= out.survivor.n <= hi_n and lo_D <= out.D_prime <= hi_D):
                return False
            return all(lo <= row["survivor"] <= hi for row, lo, hi in zip(out.tau, tau_lo, tau_hi))

        eps_i = eps0 * (1 + theta) ** i
        sched = {j: Dj0[j] * (1 - (k - j + 1) * theta + s) ** i for j in J if Dj0[j] is not None}
        nparams = NibbleParams(
            theta=theta, jstar=frozenset(sched), codegree_bounds=sched, eps=eps_i, D=D_i,
            mode=params.mode, max_retries=params.max_retries, seed=derive_seed(params.seed, i),
            inert_isolated=params.inert_isolated, codegree_cap=params.codegree_cap,
        )
        try:
            out = nibble_with_retry(cur, nparams, profile=profile, weights=cur_w,
                                    accept=in_bands if params.mode == "strict" else None)
        except RetryExhausted as exc:
            trace.stop_reason = f"retries exhausted at nibble {i}"
            exc.trace = trace
            raise
        except ZeroDegreeError:
            trace.stop_reason = "vertex of degree 0"
            break

        matched.append(root_edge[out.matching])
        wasted.append(root_vertex[out.waste])
        surv = out.survivor
        sdeg = surv.degrees()
        rec = {
            "i": i, "theta": theta, "p": out.p, "p_star": out.p_star, "attempts": out.attempts,
            "n_i": cur.n, "m_i": cur.m, "D_i": D_i, "eps_i": eps_i,
            "n_next": surv.n, "n_lo": lo_n, "n_hi": hi_n,
            "D_next": out.D_prime, "D_lo": lo_D, "D_hi": hi_D,
            "deg_min": int(sdeg.min()) if surv.n else 0, "deg_max": int(sdeg.max()) if surv.n else 0,
            "matched_edges": int(len(out.matching)), "wasted": int(len(out.waste)),
            "max_waste_prob": out.max_waste_prob, "in_bands": in_bands(out),
            "failed_checks": out.report.failed,
            "codegree_schedule": {str(j): v for j, v in sched.items()},
            "tau": [dict(row, lo=lo, hi=hi) for row, lo, hi in zip(out.tau, tau_lo, tau_hi)],
        }
        trace.records.append(rec)

        root_vertex = root_vertex[surv.vertex_map]
        root_edge = root_edge[surv.edge_map]
        cur = surv
        cur_w = out.survivor_weights
        D_i = out.D_prime
        if cur.n == 0:
            trace.stop_reason = "survivor empty"
            break
        profile = _safe_profile(cur, params.inert_isolated) or profile

    survivor = cur.with_maps(root_vertex, root_edge)
    matching = np.concatenate(matched) if matched else np.zeros(0, dtype=np.int64)
    waste = np.concatenate(wasted) if wasted else np.zeros(0, dtype=np.int64)
    report = _final_report(H, survivor, cur_w, weights, params, eps0, D0, D_i, Dj0, waste, k)
    return ChompResult(matching, waste, survivor, trace, report, hyp, cur_w)


def _safe_profile(H, inert):
    try:
        return profile_for(H, inert)
    except (ZeroDegreeError, ValueError):
        return None


def _final_report(H, survivor, surv_w, weights, params, eps0, D0, D_T, Dj0, waste, k):
    x, n = params.x, H.n
    rep = ConclusionReport()
    rep.add("n_final", survivor.n, n / (E3 * x), E3 * n / x)
    rep.add("D_final", D_T, D0 / (E2 * x**k), E2 * D0 / x**k)
    if survivor.n and survivor.m:
        deg = survivor.degrees()
        rep.add("degree_min", deg.min(), lo=(1 - eps0 * x) * D_T)
        rep.add("degree_max", deg.max(), hi=(1 + eps0 * x) * D_T)
    rep.add("waste_size", len(waste), hi=10 * E2 * eps0 * n * math.log(x))
    for j, Dj in Dj0.items():
        if Dj is not None:
            rep.add(f"codegree_{j}", survivor.max_codegree(j, params.codegree_cap),
                    hi=E2 * Dj / x ** (k - j + 1))
    if weights is not None:
        wmask = np.zeros(n, dtype=bool)
        wmask[waste] = True
        for wt, wt_after in zip(weights, surv_w):
            tot = wt.total()
            rep.add(f"tau_survivor[{wt.name}]", wt_after.total(), tot / (E2 * x), E2 * tot / x)
            rep.add(f"tau_waste[{wt.name}]", wt.total_on(wmask), hi=10 * E2 * eps0 * tot * math.log(x))
    return rep


def leftover_count(H: Hypergraph, matching) -> int:
    return H.n - len(covered_vertices(H, matching))
