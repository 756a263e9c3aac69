from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass
class SpecRecord:
    """Specifying properties harvested from one module.

    ``properties`` maps a key to ``(value, unit)``; unit is None for text or
    dimensionless values.  ``source`` is (file, module id, module type).
    """

    properties: dict
    quantity: float = 1.0
    source: tuple = ("", "", "")

    def __post_init__(self):
        q = float(self.quantity)
        if not math.isfinite(q) or q < 0:
            raise ValueError(f"quantity must be finite and >= 0, got {self.quantity!r}")
        self.quantity = q
        props = {}
        for k, v in self.properties.items():
            if not k:
                raise ValueError("empty property key")
            if not isinstance(v, tuple):
                v = (v, None)
            props[k] = v
        self.properties = props
        self.source = tuple(self.source)


@dataclass
class ItemBuffer:
    rows: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)
