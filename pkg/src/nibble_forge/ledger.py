"""Log-space codegree ledger driving the sequence of chomps.

All quantities are natural logs so that astronomically large degrees stay
representable.  Index ``i`` of ``logDj`` stores the bound for ``j = i + 2``,
so ``logDj`` covers ``j = 2..k+1``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import LedgerError, ObservationViolation

TIE_TOL = 1e-12
EXACT_TOL = 1e-9
BURST = 64  # single steps taken at once when a threshold is close


def _tol(*xs):
    return TIE_TOL * max(1.0, *(abs(x) for x in xs))


def compute_log_B(logD, logDj, log_eps) -> float:
    """Largest admissible ``log B``, clamped at 0 (``B >= 1``).

    ``B`` is capped by ``sqrt(D/D_2)``, by ``(D/D_j)^(1/(j-1))`` for ``j >= 4``
    and by ``1/eps``.
    """
    if not logDj:
        raise LedgerError("need at least the 2-codegree bound")
    terms = [(logD - logDj[0]) / 2, -log_eps]
    for i in range(2, len(logDj)):
        j = i + 2
        terms.append((logD - logDj[i]) / (j - 1))
    return max(0.0, min(terms))


def stop_time(gamma) -> int:
    """``floor(1/gamma^4 - 1/gamma^2)`` with gamma read as its shortest decimal."""
    g = Fraction(repr(float(gamma)))
    return math.floor(1 / g**4 - 1 / g**2)


def log_target_leftover(log_n, logB, gamma, logD) -> float:
    """Log of ``n * B^(-1+gamma) * log(D)^(10/gamma^4)``."""
    A = 10 / gamma**4
    return log_n + (-1 + gamma) * logB + A * math.log(max(logD, 1e-300))


@dataclass(frozen=True)
class IndexClassification:
    super_stuck: frozenset
    semi_stuck: frozenset
    clusters: tuple          # tuples of consecutive indices, covering 2..k+1
    slowpokes: frozenset     # largest index of each cluster
    dormant: tuple           # the cluster containing k+1

    def slowpoke_of(self, j):
        for c in self.clusters:
            if j in c:
                return c[-1]
        raise KeyError(j)


def _stuck_masks(logDj, thr_super, thr_semi):
    """Bitmasks over i = j-2 (bit i set: j stuck). Ties count as not stuck."""
    sup = semi = 0
    for i in range(len(logDj) - 1):
        a, b = logDj[i], logDj[i + 1]
        gap = a - b
        if gap < thr_super - _tol(a, b, thr_super):
            sup |= 1 << i
        if gap < thr_semi - _tol(a, b, thr_semi):
            semi |= 1 << i
    return sup, semi


def classify_logs(logDj, logB, gamma) -> IndexClassification:
    k = len(logDj)
    thr_super = 2 * k * gamma**4 * logB
    thr_semi = gamma**3 * logB
    sup, semi = _stuck_masks(logDj, thr_super, thr_semi)
    clusters, cur = [], []
    for i in range(k):
        cur.append(i + 2)
        if not semi >> i & 1:
            clusters.append(tuple(cur))
            cur = []
    return IndexClassification(
        super_stuck=frozenset(i + 2 for i in range(k) if sup >> i & 1),
        semi_stuck=frozenset(i + 2 for i in range(k) if semi >> i & 1),
        clusters=tuple(clusters),
        slowpokes=frozenset(c[-1] for c in clusters),
        dormant=clusters[-1],
    )


@dataclass
class StepRecord:
    t: int
    terminated: bool
    reason: str
    jstar: frozenset
    ct1_margin: float


@dataclass
class CodegreeLedger:
    k: int
    gamma: float
    logD: float
    logB: float
    log_eps_star: float
    logDj: list
    logDj0: list = field(default_factory=list)
    t: int = 0
    terminated: bool = False
    stop_reason: str = ""

    @classmethod
    def create(cls, k, logD, logDj, log_eps, gamma, logB=None):
        logDj = [float(v) for v in logDj]
        if len(logDj) != k:
            raise LedgerError(f"expected {k} codegree bounds (j=2..{k + 1}), got {len(logDj)}")
        if not 0 < gamma < 1:
            raise LedgerError("gamma must lie in (0, 1)")
        for i in range(k - 1):
            if logDj[i] < logDj[i + 1] - _tol(logDj[i], logDj[i + 1]):
                raise LedgerError(f"codegree bounds must be non-increasing in j (j={i + 2})")
        best = compute_log_B(logD, logDj, log_eps)
        if logB is None:
            logB = best
        elif logB > best + _tol(best, logB):
            raise LedgerError(f"log B={logB} exceeds the admissible maximum {best}")
        elif logB < 0:
            raise LedgerError("B must be at least 1")
        log_eps_star = (-1 + 10 * k * gamma**3) * logB
        return cls(k, float(gamma), float(logD), float(logB), log_eps_star, list(logDj), list(logDj))

    @property
    def eta(self):
        return self.gamma**4

    @property
    def log_x(self):
        return self.eta * self.logB

    @property
    def A(self):
        return 10 / self.gamma**4

    @property
    def t_star(self):
        return stop_time(self.gamma)

    @property
    def thr_super(self):
        return 2 * self.k * self.gamma**4 * self.logB

    @property
    def thr_semi(self):
        return self.gamma**3 * self.logB

    def log_eps_at(self, t):
        return self.log_eps_star + t * self.log_x

    def logD_lower(self, t):
        return self.logD - t * (2 + self.k * self.log_x)

    def logD_upper(self, t):
        return self.logD + t * (2 - self.k * self.log_x)

    def classify(self) -> IndexClassification:
        return classify_logs(self.logDj, self.logB, self.gamma)

    def select_jstar(self) -> frozenset:
        return frozenset(range(2, self.k + 1)) - self.classify().super_stuck

    def ct1_margin(self, t=None):
        t = self.t if t is None else t
        lhs = 2 * self.log_eps_at(t) + self.logD_lower(t) - self.logDj[0]
        return lhs - self.thr_super

    def copy(self):
        return CodegreeLedger(self.k, self.gamma, self.logD, self.logB, self.log_eps_star,
                              list(self.logDj), list(self.logDj0), self.t, self.terminated, self.stop_reason)

    def advance(self, enforce_ct1=True, jstar=None) -> StepRecord:
        """One ledger step. Returns the set used for the codegree update."""
        if self.terminated:
            return StepRecord(self.t, True, self.stop_reason, frozenset(), math.nan)
        if self.t >= self.t_star:
            self.terminated, self.stop_reason = True, "reached stop time"
            return StepRecord(self.t, True, self.stop_reason, frozenset(), math.nan)
        J = self.select_jstar() if jstar is None else frozenset(jstar)
        margin = self.ct1_margin()
        if margin < -_tol(margin, self.thr_super, self.logD) and enforce_ct1:
            self.terminated, self.stop_reason = True, "codegree-to-degree ratio too small"
            return StepRecord(self.t, True, self.stop_reason, J, margin)
        self._update(J)
        return StepRecord(self.t - 1, False, "", J, margin)

    def _update(self, J):
        k, lx = self.k, self.log_x
        for j in J:
            self.logDj[j - 2] += 2 - (k - j + 1) * lx
        for i in range(k - 1):
            a, b = self.logDj[i], self.logDj[i + 1]
            if a < b - _tol(a, b):
                raise LedgerError(f"codegree bounds stopped being non-increasing at t={self.t}, j={i + 2}")
        self.t += 1

    def to_json(self):
        return {
            "k": self.k, "gamma": repr(self.gamma), "logD": repr(self.logD), "logB": repr(self.logB),
            "log_eps_star": repr(self.log_eps_star),
            "logDj": [repr(v) for v in self.logDj], "logDj0": [repr(v) for v in self.logDj0],
            "t": self.t, "terminated": self.terminated, "stop_reason": self.stop_reason,
        }

    @classmethod
    def from_json(cls, data):
        return cls(int(data["k"]), float(data["gamma"]), float(data["logD"]), float(data["logB"]),
                   float(data["log_eps_star"]), [float(v) for v in data["logDj"]],
                   [float(v) for v in data["logDj0"]], int(data["t"]), bool(data["terminated"]),
                   data.get("stop_reason", ""))


@dataclass
class Trajectory:
    start: CodegreeLedger          # ledger at t = 0
    rows: list                     # rows[t] = logDj at time t
    jstar_masks: list              # bit j-2 set when j was updated at step t
    ct1_margins: list
    t_end: int
    stop_reason: str

    def jstar_at(self, t):
        m = self.jstar_masks[t]
        return frozenset(i + 2 for i in range(self.start.k) if m >> i & 1)

    def to_json(self):
        return {
            "start": self.start.to_json(),
            "rows": [[repr(v) for v in r] for r in self.rows],
            "jstar_masks": self.jstar_masks,
            "ct1_margins": [repr(v) for v in self.ct1_margins],
            "t_end": self.t_end,
            "stop_reason": self.stop_reason,
        }

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def from_json(cls, data):
        return cls(CodegreeLedger.from_json(data["start"]),
                   [[float(v) for v in r] for r in data["rows"]],
                   [int(m) for m in data["jstar_masks"]],
                   [float(v) for v in data["ct1_margins"]],
                   int(data["t_end"]), data["stop_reason"])

    @classmethod
    def load(cls, path):
        return cls.from_json(json.loads(Path(path).read_text()))


def run_schedule(ledger: CodegreeLedger, assert_observations=True, enforce_ct1=True,
                 check_monotone=True) -> Trajectory:
    """Advance ``ledger`` until it stops, recording every state.

    While the set of updated indices stays fixed every bound moves linearly,
    so stretches where no gap can reach a threshold (and Ct1 cannot turn
    negative) are filled in one numpy operation.  Steps close to a threshold
    go one at a time with the same tie rule as :meth:`CodegreeLedger.advance`.
    With ``check_monotone`` off, bounds that stop being non-increasing in j
    are recorded as they are instead of raising.
    """
    start = ledger.copy()
    k, lx = ledger.k, ledger.log_x
    thr_super = ledger.thr_super
    drops = np.array([2 - (k - (i + 2) + 1) * lx for i in range(k)])
    L = np.array(ledger.logDj, dtype=float)
    chunks, masks, margins = [L[None, :].copy()], [], []
    t_star = ledger.t_star
    base = 2 * ledger.log_eps_star + ledger.logD
    slope = 2 * lx - 2 - k * lx  # per-step change of the ratio's log, before D_2
    reason = "reached stop time"
    t = ledger.t
    full = (1 << (k - 1)) - 1
    while t < t_star:
        gaps = L[:-1] - L[1:]
        tol = TIE_TOL * np.maximum(np.maximum(1.0, np.abs(L[:-1])), np.maximum(np.abs(L[1:]), thr_super))
        stuck = gaps < thr_super - tol
        sup = int(sum(1 << i for i in np.flatnonzero(stuck)))
        margin = base + t * slope - L[0] - thr_super
        mtol = TIE_TOL * max(1.0, abs(margin), thr_super, abs(ledger.logD))
        if enforce_ct1 and margin < -mtol:
            reason = "codegree-to-degree ratio too small"
            margins.append(margin)
            break
        mask = ~sup & full
        d = np.where([mask >> i & 1 for i in range(k)], drops, 0.0)

        # how many states from t on are guaranteed to classify the same way
        rate = d[:-1] - d[1:]
        dist = np.abs(gaps - thr_super)
        buf = 1e-9 * np.maximum(1.0, np.maximum(np.abs(L[:-1]), np.abs(L[1:])) + thr_super) + 4 * np.abs(rate)
        toward = (~stuck & (rate < 0)) | (stuck & (rate > 0))
        n = t_star - t
        for i in np.flatnonzero(toward):
            n = min(n, int((dist[i] - buf[i]) // abs(rate[i])) + 1 if dist[i] >= buf[i] else 0)
        mrate = slope - d[0]
        if enforce_ct1 and mrate < 0:
            mbuf = 1e-9 * max(1.0, abs(margin), thr_super, abs(ledger.logD)) + 4 * abs(mrate)
            n = min(n, int((margin - mbuf) // -mrate) + 1 if margin >= mbuf else 0)
        if n < BURST:
            # near a threshold: plain stepping is cheaper than numpy here
            L, t, stop = _step_burst(L, t, min(BURST, t_star - t), k, drops, thr_super, base, slope,
                                     ledger.logD, enforce_ct1, check_monotone, chunks, masks, margins)
            if stop:
                reason = stop
                break
            continue

        steps = np.arange(1, n + 1, dtype=float)[:, None]
        block = L + steps * d
        # bounds move linearly, so checking the segment's last state suffices
        last = block[-1]
        bad = np.flatnonzero(last[:-1] < last[1:] - TIE_TOL * np.maximum(1.0, np.maximum(np.abs(last[:-1]), np.abs(last[1:]))))
        if len(bad) and check_monotone:
            raise ObservationViolation("monotone codegrees", t + n, int(bad[0]) + 2, float(last[bad[0]] - last[bad[0] + 1]))
        masks.extend([mask] * n)
        margins.extend((margin + mrate * np.arange(n)).tolist())
        chunks.append(block)
        L = last.copy()
        t += n
    rows = np.concatenate(chunks).tolist()
    ledger.logDj = rows[-1][:]
    ledger.t = t
    ledger.terminated = True
    ledger.stop_reason = reason
    traj = Trajectory(start, rows, masks, margins, t, reason)
    if assert_observations:
        check_observations(traj, raise_first=True)
    return traj


def _step_burst(L, t, count, k, drops, thr_super, base, slope, logD, enforce_ct1, check_monotone,
                chunks, masks, margins):
    """Up to ``count`` single steps in plain Python. Returns ``(L, t, stop_reason)``."""
    L = L.tolist()
    drops = drops.tolist()
    rows = []
    stop = ""
    full = (1 << (k - 1)) - 1
    for _ in range(count):
        sup = 0
        for i in range(k - 1):
            a, b = L[i], L[i + 1]
            if a - b < thr_super - TIE_TOL * max(1.0, abs(a), abs(b), thr_super):
                sup |= 1 << i
        margin = base + t * slope - L[0] - thr_super
        if enforce_ct1 and margin < -TIE_TOL * max(1.0, abs(margin), thr_super, abs(logD)):
            stop = "codegree-to-degree ratio too small"
            margins.append(margin)
            break
        mask = ~sup & full
        for i in range(k - 1):
            if mask >> i & 1:
                L[i] += drops[i]
        for i in range(k - 1):
            if check_monotone and L[i] < L[i + 1] - TIE_TOL * max(1.0, abs(L[i]), abs(L[i + 1])):
                raise ObservationViolation("monotone codegrees", t + 1, i + 2, L[i] - L[i + 1])
        masks.append(mask)
        margins.append(margin)
        t += 1
        rows.append(list(L))
    if rows:
        chunks.append(np.array(rows))
    return np.array(L), t, stop


def replay(start: CodegreeLedger, jstar_masks) -> list:
    """Recompute the final bounds from the start state and the update sets."""
    k, lx = start.k, start.log_x
    L = list(start.logDj)
    for mask in jstar_masks:
        for i in range(k):
            if mask >> i & 1:
                j = i + 2
                L[i] += 2 - (k - j + 1) * lx
    return L


def check_observations(traj: Trajectory, raise_first=False) -> list:
    """Check the five structural observations on every recorded state.

    1. each bound is within ``B^(k gamma^3)`` of its cluster's slowpoke,
    2. clusters only merge,
    3. slowpokes only disappear,
    4. slowpokes below ``k+1`` moved exactly at the active rate every step,
    5. the 2-codegree is controlled by the best rescaled initial bound.

    Violations are returned in time order (one per observation and step).
    """
    st = traj.start
    k, g, logB, lx = st.k, st.gamma, st.logB, st.log_x
    L = np.asarray(traj.rows, dtype=float)
    T = len(L)
    t = np.arange(T, dtype=float)[:, None]
    L0 = L[0]
    absmax = np.maximum(1.0, np.abs(L))

    gaps = L[:, :-1] - L[:, 1:]
    tol_pair = TIE_TOL * np.maximum(np.maximum(absmax[:, :-1], absmax[:, 1:]), st.thr_semi)
    semi = np.zeros((T, k), dtype=bool)
    semi[:, :-1] = gaps < st.thr_semi - tol_pair
    slow = ~semi

    found = []  # (t, order, violation)

    # 1: slowpoke of i is the first slow index >= i
    pos = np.where(slow, np.arange(k), k)
    z = np.minimum.accumulate(pos[:, ::-1], axis=1)[:, ::-1]
    top = np.take_along_axis(L, z, axis=1)
    bound1 = top + k * g**3 * logB
    bad = L > bound1 + TIE_TOL * np.maximum(absmax, np.abs(bound1))
    for tt, i in zip(*np.nonzero(bad)):
        found.append((tt, 1, ObservationViolation("O1", int(tt), int(i) + 2, float(L[tt, i] - bound1[tt, i]))))

    # 2 and 3
    if T > 1:
        split = semi[:-1] & ~semi[1:]
        for tt, i in zip(*np.nonzero(split)):
            found.append((tt + 1, 2, ObservationViolation("O2", int(tt) + 1, int(i) + 2, 0.0, "cluster split")))
        born = slow[1:] & ~slow[:-1]
        for tt, i in zip(*np.nonzero(born)):
            found.append((tt + 1, 3, ObservationViolation("O3", int(tt) + 1, int(i) + 2, 0.0, "new slowpoke")))

    # 4: only indices j <= k move
    rate = 2 - (k - np.arange(2, k + 2) + 1) * lx
    expect = L0 + t * rate
    rel = np.abs(L - expect) / np.maximum(1.0, np.abs(expect))
    bad = slow & (rel > EXACT_TOL)
    bad[:, -1] = False
    for tt, i in zip(*np.nonzero(bad)):
        found.append((tt, 4, ObservationViolation("O4", int(tt), int(i) + 2, float(rel[tt, i]))))

    # 5
    shrink = (k - np.arange(2, k + 2) + 1) * lx
    best = (L0 - t * shrink).max(axis=1)
    bound5 = 2 * k * g**3 * logB + best
    bad = L[:, 0] > bound5 + TIE_TOL * np.maximum(absmax[:, 0], np.abs(bound5))
    for tt in np.flatnonzero(bad):
        found.append((tt, 5, ObservationViolation("O5", int(tt), 2, float(L[tt, 0] - bound5[tt]))))

    found.sort(key=lambda item: (item[0], item[1]))
    out = [v for _, _, v in found]
    if raise_first and out:
        raise out[0]
    return out
