"""Text formats: matrices and sparse chains as JSON, trajectories as
whitespace-separated integers, shuffle records as ``before;after`` lines."""
from __future__ import annotations

import csv
import hashlib
import io as _io
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError, MCIdentError
from .matrix import StochasticMatrix
from .sparse import SparseChain


def _load_json(path):
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from None


def matrix_to_dict(M) -> dict:
    a = np.asarray(M)
    return {"n": int(a.shape[0]), "rows": a.tolist()}


def matrix_from_dict(d: dict, where: str = "<matrix>") -> StochasticMatrix:
    if not isinstance(d, dict) or "rows" not in d:
        raise ConfigError(f"{where}: expected an object with 'n' and 'rows'")
    rows = d["rows"]
    n = d.get("n", len(rows))
    if len(rows) != n or any(len(r) != n for r in rows):
        raise ConfigError(f"{where}: 'rows' must be {n} rows of {n} numbers")
    try:
        return StochasticMatrix(np.array(rows, dtype=float))
    except MCIdentError as e:
        raise ConfigError(f"{where}: {e}") from None


def load_matrix(path) -> StochasticMatrix:
    return matrix_from_dict(_load_json(path), str(path))


def save_matrix(M, path):
    Path(path).write_text(json.dumps(matrix_to_dict(M)) + "\n")


def chain_to_dict(chain: SparseChain) -> dict:
    layers = []
    for a in chain.layers:
        rows = [[[int(j), float(a[i, j])] for j in np.flatnonzero(a[i])] for i in range(a.shape[0])]
        layers.append({"shape": list(a.shape), "rows": rows})
    return {"start": chain.start, "scale": chain.scale, "layers": layers}


def chain_from_dict(d: dict, where: str = "<chain>") -> SparseChain:
    try:
        mats = []
        for t, L in enumerate(d["layers"], start=1):
            r, c = L["shape"]
            a = np.zeros((r, c))
            if len(L["rows"]) != r:
                raise ConfigError(f"{where}: layer {t} lists {len(L['rows'])} rows, shape says {r}")
            for i, row in enumerate(L["rows"]):
                for j, p in row:
                    if not 0 <= j < c:
                        raise ConfigError(f"{where}: layer {t} row {i} column {j} out of range")
                    a[i, int(j)] += float(p)
            mats.append(a)
        return SparseChain(tuple(mats), int(d.get("start", 0)), d.get("scale"))
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"{where}: malformed sparse chain ({e})") from None
    except MCIdentError as e:
        raise ConfigError(f"{where}: {e}") from None


def load_chain(path) -> SparseChain:
    return chain_from_dict(_load_json(path), str(path))


def save_chain(chain: SparseChain, path):
    Path(path).write_text(json.dumps(chain_to_dict(chain)) + "\n")


def parse_states(text: str, where: str = "<trajectory>") -> np.ndarray:
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        for tok in line.split():
            try:
                out.append(int(tok))
            except ValueError:
                raise ConfigError(f"{where}:{lineno}: {tok!r} is not a state index") from None
    return np.array(out, dtype=np.int64)


def format_states(states) -> str:
    return " ".join(map(str, np.asarray(states).tolist())) + "\n"


def parse_words(text: str, where: str = "<words>") -> np.ndarray:
    """One round word per line."""
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append([int(t) for t in line.split()])
        except ValueError:
            raise ConfigError(f"{where}:{lineno}: non-integer state") from None
        if len(rows[-1]) != len(rows[0]):
            raise ConfigError(f"{where}:{lineno}: word length {len(rows[-1])} differs from {len(rows[0])}")
    return np.array(rows, dtype=np.int64)


def format_words(words) -> str:
    return "".join(" ".join(map(str, w)) + "\n" for w in np.asarray(words).tolist())


def parse_shuffles(text: str, where: str = "<shuffles>") -> list[tuple[list, list]]:
    """Records ``before;after`` with comma-separated card labels."""
    recs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(";")
        if len(parts) != 2:
            raise ConfigError(f"{where}:{lineno}: expected 'before;after'")
        before = [c.strip() for c in parts[0].split(",")]
        after = [c.strip() for c in parts[1].split(",")]
        if len(before) != len(after):
            raise ConfigError(f"{where}:{lineno}: decks have different sizes")
        recs.append((before, after))
    return recs


def format_shuffles(records) -> str:
    return "".join(",".join(map(str, b)) + ";" + ",".join(map(str, a)) + "\n" for b, a in records)


def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = _io.StringIO()
    fields = list(rows[0].keys())
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in r.items()})
    return buf.getvalue()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()
