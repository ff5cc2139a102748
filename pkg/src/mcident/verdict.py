from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

ACCEPT = "accept"
REJECT = "reject"
REASONS = ("insufficient-visits", "iid-test", "pruning", "chi2")


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x


@dataclass(frozen=True)
class Verdict:
    """Outcome of a tester.

    ``reason`` names the stage that produced the decision: an Accept always
    comes from the final statistical stage, a Reject may come from any stage.
    """

    decision: str
    statistic: float | None
    reason: str
    threshold: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.decision not in (ACCEPT, REJECT):
            raise ValueError(f"bad decision {self.decision!r}")
        if self.reason not in REASONS:
            raise ValueError(f"bad reason {self.reason!r}")
        if self.decision == ACCEPT and self.reason not in ("iid-test", "chi2"):
            raise ValueError(f"an accept cannot come from stage {self.reason!r}")

    @property
    def accepted(self) -> bool:
        return self.decision == ACCEPT

    @property
    def rejected(self) -> bool:
        return self.decision == REJECT

    def to_dict(self) -> dict:
        return _plain({
            "decision": self.decision,
            "statistic": self.statistic,
            "reason": self.reason,
            "threshold": self.threshold,
            "diagnostics": self.diagnostics,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)
