"""Serializable outcomes of inequality checks and constant estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

SKIPPED = "SKIPPED"


def _clean(x):
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if hasattr(x, "item"):
        return _clean(x.item())
    return x


@dataclass
class ConstantEstimate:
    """An empirical sup or inf of a ratio over a test family."""

    name: str
    value: float
    direction: str                       # "sup" or "inf"
    family_size: int
    grid: str
    stability: Optional[float] = None    # relative change when the family doubles
    extremizer: Optional[dict] = None
    refined: bool = False
    reference: Optional[float] = None    # closed-form comparison value, if any

    def __post_init__(self):
        if self.direction not in ("sup", "inf"):
            raise ValueError(f"direction must be sup or inf, got {self.direction!r}")

    @property
    def stable(self) -> bool:
        return self.stability is not None and self.stability < 0.10

    def to_dict(self) -> dict:
        return _clean({"name": self.name, "value": self.value, "direction": self.direction,
                       "family_size": self.family_size, "grid": self.grid,
                       "stability": self.stability, "extremizer": self.extremizer,
                       "refined": self.refined, "reference": self.reference})


@dataclass
class InequalityReport:
    """Worst normalized margin of an identity or inequality; pass iff margin >= -tol."""

    id: str
    margin: float
    tol: float
    violating: Optional[dict] = None
    constants: List[ConstantEstimate] = field(default_factory=list)
    details: Dict[str, Any] = field(default_factory=dict)
    skipped: Optional[str] = None
    requirements: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        if self.skipped:
            return True
        ok = math.isfinite(self.margin) and self.margin >= -self.tol
        return ok and all(self.requirements_met())

    def requirements_met(self):
        for req in self.requirements:
            yield bool(self.details.get(req, False))

    @property
    def status(self) -> str:
        if self.skipped:
            return SKIPPED
        return "PASS" if self.passed else "FAIL"

    def to_dict(self) -> dict:
        return _clean({"id": self.id, "status": self.status, "margin": self.margin,
                       "tol": self.tol, "violating": self.violating,
                       "constants": [c.to_dict() for c in self.constants],
                       "details": self.details, "skipped": self.skipped})


def skipped(id: str, reason: str) -> InequalityReport:
    return InequalityReport(id, math.nan, 0.0, skipped=reason)


def relative_change(a: float, b: float) -> float:
    if a == b:
        return 0.0
    return abs(b - a) / max(abs(a), abs(b), 1e-300)
