"""One round of the semi-random nibble with waste-equalised survival.

Every edge is kept with probability ``p = theta / min_degree``; kept edges that
meet no other kept edge form the matching.  Each vertex is then thrown away
with a vertex-specific probability chosen so that every vertex survives with
the same probability ``1 - p_star``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .checks import ConclusionReport, HypothesisReport
from .errors import (
    CodegreeCapError,
    EmptyHypergraphError,
    InadmissibleNibbleError,
    RetryExhausted,
    ZeroDegreeError,
)
from .hypergraph import DEFAULT_CODEGREE_CAP, Hypergraph, RegularityProfile, fit_regularity


def derive_seed(seed, *keys) -> int:
    """Deterministic 64-bit child seed for ``(seed, *keys)``."""
    ss = np.random.SeedSequence([int(seed), *[int(k) for k in keys]])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class NibbleParams:
    theta: float
    jstar: frozenset = frozenset()
    # j -> upper bound on the j-codegree; measured from the input when missing
    codegree_bounds: dict = field(default_factory=dict)
    eps: float | None = None
    D: float | None = None
    mode: str = "lenient"
    max_retries: int = 1
    seed: int = 0
    # treat degree-0 vertices as spectators: never wasted, always survive
    inert_isolated: bool = False
    codegree_cap: int = DEFAULT_CODEGREE_CAP

    def __post_init__(self):
        self.jstar = frozenset(int(j) for j in self.jstar)
        self.codegree_bounds = {int(j): float(v) for j, v in self.codegree_bounds.items()}
        if self.mode not in ("strict", "lenient"):
            raise ValueError(f"mode must be 'strict' or 'lenient', got {self.mode!r}")
        if int(self.seed) < 0:
            raise ValueError("seed must be non-negative")


@dataclass
class NibblePlan:
    """Everything about a nibble that does not depend on the random draw."""

    theta: float
    p: float
    min_degree: int
    conflicts: np.ndarray      # f(e): other edges meeting e
    match_prob: np.ndarray     # P(v is covered by the matching)
    p_star: float
    waste_prob: np.ndarray     # w(v)
    active: np.ndarray         # vertices that take part (all of them unless inert)

    @property
    def max_waste_prob(self) -> float:
        return float(self.waste_prob.max()) if len(self.waste_prob) else 0.0


def match_probability(H: Hypergraph, p, conflicts=None, active=None):
    """Exact per-vertex probability of being covered by the isolated kept edges.

    Returns ``(p_v, p_star)`` where ``p_star`` is the maximum over active vertices.
    """
    if conflicts is None:
        conflicts = H.conflict_counts()
    if p < 1:
        # conflict counts are small integers, so tabulate p(1-p)^f once
        table = p * np.exp(np.arange(int(conflicts.max()) + 1) * math.log1p(-p)) if len(conflicts) else np.zeros(1)
        edge_w = table[conflicts]
    else:
        edge_w = np.where(conflicts == 0, 1.0, 0.0)
    if H.is_uniform and H.m:
        p_v = np.zeros(H.n)
        for col in H.columns():
            p_v += np.bincount(col, weights=edge_w, minlength=H.n)
    else:
        p_v = np.bincount(H.flat, weights=np.repeat(edge_w, H.sizes), minlength=H.n)
    sel = p_v if active is None else p_v[active]
    p_star = float(sel.max()) if len(sel) else 0.0
    return p_v, p_star


def waste_probability(p_v, p_star):
    """``(p_star - p_v) / (1 - p_v)``; scalar or array."""
    arr = np.asarray(p_v, dtype=float)
    if np.any(arr > p_star):
        raise ValueError("p_v exceeds p_star")
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(arr < 1, (p_star - arr) / (1 - arr), 0.0)
    return float(w) if np.ndim(p_v) == 0 else w


def plan_nibble(H: Hypergraph, theta, inert_isolated=False, cap=DEFAULT_CODEGREE_CAP) -> NibblePlan:
    if H.m == 0:
        raise EmptyHypergraphError("nibble needs at least one edge")
    deg = H.degrees()
    active = deg > 0 if inert_isolated else np.ones(H.n, dtype=bool)
    delta = int(deg[active].min())
    if delta == 0:
        raise ZeroDegreeError("minimum degree is 0; nibble probability undefined")
    theta = float(theta)
    if not 0 < theta < delta:
        raise InadmissibleNibbleError(f"theta={theta} must lie in (0, min_degree={delta})")
    p = theta / delta
    f = H.conflict_counts(cap)
    p_v, p_star = match_probability(H, p, f, active)
    w = np.zeros(H.n)
    w[active] = waste_probability(p_v[active], p_star)
    return NibblePlan(theta, p, delta, f, p_v, p_star, w, active)


@dataclass
class Draw:
    kept: np.ndarray      # X
    matching: np.ndarray  # M
    waste: np.ndarray     # W
    alive: np.ndarray     # survivor mask


def draw_nibble(H: Hypergraph, plan: NibblePlan, rng) -> Draw:
    """Edges in ascending id order, then vertices in ascending id order."""
    X = np.flatnonzero(rng.random(H.m) < plan.p)
    if len(X):
        if H.is_uniform:
            vx = H.rows[X]
            hits = np.bincount(vx.reshape(-1), minlength=H.n)
            lonely = (hits[vx] == 1).all(axis=1)
            covered = vx[lonely].reshape(-1)
        else:
            idx = [np.arange(H.ptr[e], H.ptr[e + 1]) for e in X]
            sizes = H.sizes[X]
            ent = H.flat[np.concatenate(idx)]
            hits = np.bincount(ent, minlength=H.n)
            first = np.concatenate([[0], np.cumsum(sizes)[:-1]])
            lonely = np.minimum.reduceat((hits[ent] == 1).astype(np.int8), first) > 0
            covered = ent[np.repeat(lonely, sizes)]
        M = X[lonely]
    else:
        M = X
        covered = np.zeros(0, dtype=np.int64)
    W = np.flatnonzero(rng.random(H.n) < plan.waste_prob)
    alive = np.ones(H.n, dtype=bool)
    alive[covered] = False
    alive[W] = False
    return Draw(X, M, W, alive)


@dataclass
class NibbleOutcome:
    kept: np.ndarray
    matching: np.ndarray
    waste: np.ndarray
    survivor: Hypergraph
    theta: float
    p: float
    p_star: float
    max_waste_prob: float
    n: int
    n_prime: int
    D: float
    D_prime: float
    eps: float
    eps_prime: float
    seed: int
    report: ConclusionReport
    tau: list = field(default_factory=list)
    survivor_weights: object = None
    attempts: int = 1

    def to_dict(self):
        return {
            "seed": self.seed,
            "theta": self.theta,
            "p": self.p,
            "p_star": self.p_star,
            "max_waste_prob": self.max_waste_prob,
            "n": self.n,
            "n_prime": self.n_prime,
            "D": self.D,
            "D_prime": self.D_prime,
            "eps": self.eps,
            "eps_prime": self.eps_prime,
            "kept": int(len(self.kept)),
            "matching": [int(e) for e in self.matching],
            "waste": [int(v) for v in self.waste],
            "survivor_vertices": [int(v) for v in self.survivor.vertex_map],
            "tau": self.tau,
            "attempts": self.attempts,
            "report": self.report.to_dict(),
        }


def profile_for(H: Hypergraph, inert_isolated=False, eps_floor=None) -> RegularityProfile:
    """Regularity fit, ignoring degree-0 vertices when they are inert."""
    if not inert_isolated:
        return fit_regularity(H, eps_floor)
    if H.m == 0:
        raise EmptyHypergraphError("cannot fit regularity to a hypergraph with no edges")
    deg = H.degrees()
    live = deg[deg > 0]
    lo, hi = int(live.min()), int(live.max())
    floor = 1.0 / len(live) if eps_floor is None else float(eps_floor)
    return RegularityProfile(len(live), (lo + hi) / 2, max((hi - lo) / (hi + lo), floor), lo, hi)


def _codegree_bound(H, params, j):
    if j in params.codegree_bounds:
        return params.codegree_bounds[j]
    return float(H.max_codegree(j, params.codegree_cap))


def evaluate_nibble(H, params, plan, draw, survivor, eps, D, weights=None):
    """Band checks on one nibble. Returns ``(report, tau_rows)``."""
    theta, k = plan.theta, H.k
    rep = ConclusionReport()
    active = plan.active
    n = int(active.sum())
    n_prime = int((draw.alive & active).sum())
    s = theta ** 1.5
    rep.add("n_prime", n_prime, n * (1 - theta - 2 * s), n * (1 - theta + 2 * s))

    D_prime = D * (1 - plan.p_star) ** k
    eps_prime = eps * (1 + theta)
    surv_active = active[survivor.vertex_map]
    if surv_active.any():
        sdeg = survivor.degrees()[surv_active]
        rep.add("degree_min", sdeg.min(), lo=(1 - eps_prime) * D_prime)
        rep.add("degree_max", sdeg.max(), hi=(1 + eps_prime) * D_prime)
    for j in sorted(params.jstar):
        bound = _codegree_bound(H, params, j) * (1 - (k - j + 1) * theta + s)
        rep.add(f"codegree_{j}", survivor.max_codegree(j, params.codegree_cap), hi=bound)
    rep.add("waste_size", len(draw.waste), hi=10 * eps * theta * n)

    tau_rows = []
    if weights is not None:
        wmask = np.zeros(H.n, dtype=bool)
        wmask[draw.waste] = True
        for i, wt in enumerate(weights):
            total = wt.total()
            surv = wt.total_on(draw.alive)
            wasted = wt.total_on(wmask)
            rep.add(f"tau_survivor[{wt.name}]", surv, total * (1 - theta - s), total * (1 - theta + s))
            rep.add(f"tau_waste[{wt.name}]", wasted, hi=10 * eps * theta * total)
            tau_rows.append({"name": wt.name, "total": total, "survivor": surv, "waste": wasted})

    # analytic side facts; only meaningful in the small-theta regime
    if eps <= theta <= 1 / (10 * (k + 1)):
        rep.note("p_star_regime", plan.p_star, theta - theta ** 1.75, theta + theta ** 1.75)
        rep.note("waste_prob_bound", plan.max_waste_prob, hi=8 * eps * theta)
    return rep, tau_rows


def sample_nibble(H: Hypergraph, params: NibbleParams, profile=None, weights=None, plan=None) -> NibbleOutcome:
    if profile is None:
        profile = profile_for(H, params.inert_isolated)
    eps = profile.eps if params.eps is None else float(params.eps)
    D = profile.D if params.D is None else float(params.D)
    if plan is None:
        plan = plan_nibble(H, params.theta, params.inert_isolated, params.codegree_cap)
    rng = np.random.default_rng(int(params.seed))
    dr = draw_nibble(H, plan, rng)
    survivor = H.induce(dr.alive)
    report, tau_rows = evaluate_nibble(H, params, plan, dr, survivor, eps, D, weights)
    return NibbleOutcome(
        kept=dr.kept, matching=dr.matching, waste=dr.waste, survivor=survivor,
        theta=plan.theta, p=plan.p, p_star=plan.p_star, max_waste_prob=plan.max_waste_prob,
        n=int(plan.active.sum()), n_prime=int((dr.alive & plan.active).sum()),
        D=D, D_prime=D * (1 - plan.p_star) ** H.k, eps=eps, eps_prime=eps * (1 + plan.theta),
        seed=int(params.seed), report=report, tau=tau_rows,
        survivor_weights=weights.restrict(survivor.vertex_map) if weights is not None else None,
    )


def nibble_with_retry(H: Hypergraph, params: NibbleParams, profile=None, weights=None, accept=None):
    """Repeat the nibble with derived seeds.

    Strict mode returns the first outcome whose checks all pass (and which
    ``accept`` likes, if given) and raises :class:`RetryExhausted` otherwise.
    Lenient mode returns the outcome with the fewest failed checks, ties going
    to the smaller worst violation.
    """
    if profile is None:
        profile = profile_for(H, params.inert_isolated)
    plan = plan_nibble(H, params.theta, params.inert_isolated, params.codegree_cap)
    best, best_key = None, None
    tries = max(1, int(params.max_retries))
    for a in range(tries):
        seed = params.seed if a == 0 else derive_seed(params.seed, a)
        out = sample_nibble(H, replace(params, seed=seed), profile, weights, plan)
        out.attempts = a + 1
        extra = 0 if accept is None or accept(out) else 1
        key = (out.report.n_failed + extra, out.report.max_violation)
        if best_key is None or key < best_key:
            best, best_key = out, key
        if key[0] == 0:
            if params.mode == "strict" or key[1] == 0:
                return out
    if params.mode == "strict":
        raise RetryExhausted(f"no acceptable nibble in {tries} attempts", best=best, attempts=tries)
    return best


def check_nibble_hypotheses(H: Hypergraph, params: NibbleParams, profile=None, weights=None) -> HypothesisReport:
    """Quantitative preconditions of the single-nibble analysis, compared in logs."""
    if profile is None:
        profile = profile_for(H, params.inert_isolated)
    eps = profile.eps if params.eps is None else params.eps
    D = profile.D if params.D is None else params.D
    theta = params.theta
    logD = math.log(D) if D > 1 else 0.0
    polylog = 5 * math.log(logD) if logD > 0 else -math.inf
    rep = HypothesisReport()

    def bound(j):
        try:
            return _codegree_bound(H, params, j)
        except CodegreeCapError:
            return None

    D2 = bound(2) if H.k >= 1 else None
    if D2:
        rep.require("N1", math.log(eps**2 * theta * D / D2), polylog)
    else:
        rep.require("N1", 0, 0, skipped=True, note="2-codegree unavailable")
    for j in sorted(params.jstar):
        hi, lo = bound(j), bound(j + 1)
        if hi and lo:
            rep.require(f"N2[{j}]", math.log(theta**2 * hi / lo), polylog)
        else:
            rep.require(f"N2[{j}]", 0, 0, skipped=True, note="codegree unavailable")
    rep.require("N3", eps, theta, at_most=True)
    if weights is not None and len(weights):
        cap = logD ** 2.25 if logD > 0 else 0.0
        for wt in weights:
            tot = wt.total()
            lhs = math.log(eps * theta * tot) if tot > 0 else -math.inf
            rhs = math.log(weights.max_value()) + polylog if weights.max_value() > 0 else -math.inf
            rep.require(f"NP1[{wt.name}]", lhs, rhs)
        rep.require("NP2", math.log(max(weights.max_support(), 1)), cap, at_most=True)
        rep.require("NP3", math.log(max(weights.involvement(), 1)), cap, at_most=True)
    return rep
