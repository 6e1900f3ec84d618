"""Check results and their serialization."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

PASS = "pass"
FAIL = "fail"
SKIP = "skip"

NSIGMA = 4.0


@dataclass
class CheckReport:
    """Outcome of one verification check.

    ``witness`` carries the numbers a reader needs to audit the verdict;
    ``violations`` lists the offending rows when the check fails.
    """

    name: str
    status: str
    witness: dict = field(default_factory=dict)
    tolerance: str = f"{NSIGMA:g} sigma"
    violations: list = field(default_factory=list)
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.status == PASS

    @property
    def failed(self) -> bool:
        return self.status == FAIL

    def to_dict(self) -> dict:
        return to_jsonable(dataclasses.asdict(self))

    def line(self) -> str:
        return f"[{self.status.upper():4}] {self.name}"


def verdict(ok: bool) -> str:
    return PASS if ok else FAIL


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays and dataclasses for json."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        if hasattr(obj, "to_dict"):
            return obj.to_dict()
        return to_jsonable(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v) or math.isinf(v):
            return str(v)
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj
