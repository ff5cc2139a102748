"""Calibrated threshold tables and constant profiles stored as JSON."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigError


@dataclass(frozen=True)
class Constants:
    """Multipliers standing in for the unspecified constants of the
    asymptotic bounds."""

    c_plan: float = 1.0
    c_hit: float = 1.0
    c_lin: float = 1.0
    inner_confidence: float = 0.8
    c_sparse: float = 1.0

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"constant {k} must be a positive number, got {v!r}")
        if not 0 < self.inner_confidence < 1:
            raise ConfigError("inner_confidence must lie in (0, 1)")

    @classmethod
    def from_dict(cls, d: dict) -> "Constants":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown constants: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "Constants":
        with open(path) as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path}:{e.lineno}: {e.msg}") from None
        return cls.from_dict(d.get("constants", d))

    def to_dict(self) -> dict:
        return asdict(self)


def _same(a, b) -> bool:
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-12)
    return a == b


@dataclass
class ThresholdProfile:
    """A table of calibrated thresholds keyed by problem parameters.

    ``kind`` is ``"iid"`` (keys s, epsilon, lambda) or ``"chi2-edge"``
    (keys n, k, epsilon, m).
    """

    kind: str
    entries: list = field(default_factory=list)
    source: str | None = None

    KEYS = {"iid": ("s", "epsilon", "lambda"), "chi2-edge": ("n", "k", "epsilon", "m")}

    def __post_init__(self):
        if self.kind not in self.KEYS:
            raise ConfigError(f"unknown profile kind {self.kind!r}")

    def lookup(self, **key):
        """The entry whose key fields all match, or None."""
        names = self.KEYS[self.kind]
        for e in self.entries:
            if all(_same(e.get(k), key.get(k)) for k in names):
                return e
        return None

    def tau(self, **key):
        e = self.lookup(**key)
        return None if e is None else float(e["tau"])

    def add(self, entry: dict):
        missing = [k for k in self.KEYS[self.kind] + ("tau",) if k not in entry]
        if missing:
            raise ConfigError(f"profile entry lacks {missing}")
        key = {k: entry[k] for k in self.KEYS[self.kind]}
        self.entries = [e for e in self.entries
                        if not all(_same(e.get(k), v) for k, v in key.items())]
        self.entries.append(dict(entry))

    def to_dict(self):
        return {"kind": self.kind, "entries": self.entries}

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "ThresholdProfile":
        text = Path(path).read_text()
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}:{e.lineno}: {e.msg}") from None
        if "kind" not in d or "entries" not in d:
            raise ConfigError(f"{path}: profile needs 'kind' and 'entries'")
        prof = cls(d["kind"], [], source=str(path))
        for e in d["entries"]:
            prof.add(e)
        return prof
