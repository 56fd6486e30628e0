"""Pass/fail records with witnesses, serialisable to JSON."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List

import numpy as np

from .cubical import CubeSet

WITNESS_CAP = 50


def witness_list(obj) -> List:
    """Normalise witnesses (cube sets, index arrays, points) to JSON lists."""
    if isinstance(obj, CubeSet):
        return obj.to_json()[:WITNESS_CAP]
    arr = np.asarray(obj)
    if arr.size == 0:
        return []
    return arr.tolist()[:WITNESS_CAP]


@dataclass
class Certificate:
    name: str
    params: Dict[str, Any] = field(default_factory=dict)
    checks: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    def add(self, axiom: str, ok: bool, witnesses=()) -> bool:
        self.checks[axiom] = {"pass": bool(ok), "witnesses": [] if ok else witness_list(witnesses)}
        return bool(ok)

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks.values())

    def failed(self) -> List[str]:
        return [k for k, c in self.checks.items() if not c["pass"]]

    def __bool__(self) -> bool:
        return self.passed

    def to_json(self):
        return {"name": self.name, "passed": self.passed, "params": self.params,
                "checks": self.checks}
