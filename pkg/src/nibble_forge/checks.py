"""Small report containers shared by the nibble, chomp and MCWA drivers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field


def _num(x):
    if x is None:
        return None
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


@dataclass
class Band:
    """``lo <= value <= hi``; either side may be ``None`` for one-sided checks."""

    value: float
    lo: float | None = None
    hi: float | None = None

    @property
    def ok(self) -> bool:
        if self.lo is not None and self.value < self.lo:
            return False
        if self.hi is not None and self.value > self.hi:
            return False
        return True

    @property
    def violation(self) -> float:
        """Relative distance outside the band (0 when inside)."""
        worst = 0.0
        if self.lo is not None and self.value < self.lo:
            worst = max(worst, (self.lo - self.value) / max(abs(self.lo), 1e-300))
        if self.hi is not None and self.value > self.hi:
            worst = max(worst, (self.value - self.hi) / max(abs(self.hi), 1e-300))
        return worst

    def to_dict(self):
        return {"value": _num(self.value), "lo": _num(self.lo), "hi": _num(self.hi), "ok": self.ok}


@dataclass
class ConclusionReport:
    """Named band checks. ``diagnostics`` are logged but never counted as failures."""

    checks: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def add(self, name, value, lo=None, hi=None):
        self.checks[name] = Band(float(value), lo, hi)

    def note(self, name, value, lo=None, hi=None):
        self.diagnostics[name] = Band(float(value), lo, hi)

    @property
    def failed(self) -> list:
        return [name for name, b in self.checks.items() if not b.ok]

    @property
    def n_failed(self) -> int:
        return len(self.failed)

    @property
    def passed(self) -> bool:
        return not self.failed

    @property
    def max_violation(self) -> float:
        return max((b.violation for b in self.checks.values()), default=0.0)

    def to_dict(self):
        return {
            "passed": self.passed,
            "failed": self.failed,
            "checks": {k: b.to_dict() for k, b in self.checks.items()},
            "diagnostics": {k: b.to_dict() for k, b in self.diagnostics.items()},
        }


@dataclass
class HypothesisReport:
    """Each entry compares ``lhs`` against ``rhs`` (``lhs >= rhs`` unless
    ``at_most`` is set). Comparisons are done on logs when given as such."""

    entries: dict = field(default_factory=dict)

    def require(self, name, lhs, rhs, at_most=False, skipped=False, note=""):
        holds = True if skipped else (lhs <= rhs if at_most else lhs >= rhs)
        self.entries[name] = {
            "lhs": _num(lhs), "rhs": _num(rhs), "relation": "<=" if at_most else ">=",
            "holds": bool(holds), "skipped": bool(skipped), "note": note,
        }

    @property
    def failed(self) -> list:
        return [k for k, e in self.entries.items() if not e["holds"]]

    @property
    def holds(self) -> bool:
        return not self.failed

    def to_dict(self):
        return {"holds": self.holds, "failed": self.failed, "entries": self.entries}
