"""Pass/fail records produced by the certifiers."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

SCHEMA_VERSION = "1"


def jsonable(value):
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if hasattr(value, "tolist"):
        value = value.tolist()
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
    return value


def dumps(payload):
    """Deterministic JSON text (sorted keys, fixed separators)."""
    return json.dumps(jsonable(payload), sort_keys=True, indent=2) + "\n"


@dataclass
class ClassCertificate:
    """Outcome of checking an inequality on a sample grid.

    ``worst_value`` is the largest value of the checked quantity and
    ``worst_point`` the sample where it occurs.  ``data`` carries the sweep
    behind the verdict (ratios, per-eps values, ...).
    """

    claim: str
    passed: bool
    worst_value: float
    worst_point: tuple = ()
    grid_size: int = 0
    params: dict = field(default_factory=dict)
    data: dict = field(default_factory=dict)

    def __bool__(self):
        return bool(self.passed)

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "claim": self.claim,
            "pass": bool(self.passed),
            "worst_value": self.worst_value,
            "worst_point": list(self.worst_point),
            "grid_size": int(self.grid_size),
            "params": self.params,
            "data": self.data,
        }

    def to_json(self):
        return dumps(self.to_dict())
