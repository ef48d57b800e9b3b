"""Token accounting per agent role."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

ROLES = ("supervisor", "code", "diagnostic", "verification")


@dataclass
class TokenLedger:
    events: list[dict] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def record(self, role: str, input_tokens: int, output_tokens: int, call: str = "") -> None:
        if role not in ROLES:
            raise ValueError(f"unknown agent role {role!r}")
        if input_tokens < 0 or output_tokens < 0:
            raise ValueError("token counts must be non-negative")
        with self._lock:
            self.events.append({"role": role, "call": call, "input": int(input_tokens),
                                "output": int(output_tokens)})

    def by_role(self) -> dict[str, dict[str, int]]:
        out = {r: {"input": 0, "output": 0, "total": 0} for r in ROLES}
        for e in self.events:
            row = out[e["role"]]
            row["input"] += e["input"]
            row["output"] += e["output"]
            row["total"] += e["input"] + e["output"]
        return out

    @property
    def total(self) -> int:
        return sum(e["input"] + e["output"] for e in self.events)

    def to_dict(self) -> dict:
        roles = self.by_role()
        return {"roles": roles,
                "total": {"input": sum(r["input"] for r in roles.values()),
                          "output": sum(r["output"] for r in roles.values()),
                          "total": self.total},
                "n_calls": len(self.events)}
