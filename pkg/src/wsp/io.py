"""File formats: plain CSV vectors/matrices and a versioned JSON record."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "SCHEMA_VERSION",
    "RECORD_KINDS",
    "FormatError",
    "JsonRecord",
    "read_matrix_csv",
    "write_matrix_csv",
    "read_vector_csv",
    "write_vector_csv",
    "read_matrix",
    "read_vector",
    "parse_float_list",
    "encode",
    "decode",
]

SCHEMA_VERSION = "1.0"
RECORD_KINDS = (
    "matrix",
    "signal",
    "observation",
    "solve_report",
    "certificate",
    "counterexample",
    "summary",
)


class FormatError(ValueError):
    """Malformed input file; carries the offending line when known."""

    def __init__(self, path, msg: str, line: int | None = None):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {msg}")


def _parse_rows(path) -> list[tuple[int, list[float]]]:
    path = Path(path)
    text = path.read_text()
    rows = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        cells = [c.strip() for c in row]
        if not cells or all(c == "" for c in cells) or cells[0].startswith("#"):
            continue
        vals = []
        for c in cells:
            try:
                v = float(c)
            except ValueError:
                raise FormatError(path, f"not a number: {c!r}", lineno) from None
            if not math.isfinite(v):
                raise FormatError(path, f"non-finite value {c!r}", lineno)
            vals.append(v)
        rows.append((lineno, vals))
    if not rows:
        raise FormatError(path, "no data rows")
    return rows


def read_matrix_csv(path) -> np.ndarray:
    rows = _parse_rows(path)
    width = len(rows[0][1])
    for lineno, vals in rows:
        if len(vals) != width:
            raise FormatError(path, f"expected {width} columns, found {len(vals)}", lineno)
    return np.array([v for _, v in rows], dtype=float)


def read_vector_csv(path) -> np.ndarray:
    """One value per line, or a single comma-separated row."""
    rows = _parse_rows(path)
    if len(rows) == 1:
        return np.array(rows[0][1], dtype=float)
    for lineno, vals in rows:
        if len(vals) != 1:
            raise FormatError(path, f"expected one value per line, found {len(vals)}", lineno)
    return np.array([v[0] for _, v in rows], dtype=float)


def write_matrix_csv(path, A) -> None:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        for row in A:
            wr.writerow([repr(float(v)) for v in row])


def write_vector_csv(path, x) -> None:
    with open(path, "w", newline="") as fh:
        for v in np.asarray(x, dtype=float).ravel():
            fh.write(repr(float(v)) + "\n")


def parse_float_list(text: str) -> np.ndarray:
    """``"1,1,2"`` -> ``array([1., 1., 2.])``."""
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ValueError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise ValueError("empty number list")
    return np.array(vals)


# -- JSON records ------------------------------------------------------------


def encode(obj):
    """JSON-compatible view of `obj`; arrays become tagged nested lists."""
    if isinstance(obj, np.ndarray):
        return {"__ndarray__": obj.tolist(), "dtype": str(obj.dtype)}
    if isinstance(obj, dict):
        return {str(k): encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [encode(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):  # str enums
        return obj.value
    return obj


def decode(obj):
    if isinstance(obj, dict):
        if "__ndarray__" in obj:
            return np.array(obj["__ndarray__"], dtype=obj.get("dtype", "float64"))
        return {k: decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [decode(v) for v in obj]
    return obj


@dataclass
class JsonRecord:
    kind: str
    payload: dict
    provenance: dict = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION

    def __post_init__(self):
        if self.kind not in RECORD_KINDS:
            raise ValueError(f"unknown record kind {self.kind!r}")

    def to_json(self, indent: int | None = 2) -> str:
        doc = {
            "schema_version": self.schema_version,
            "kind": self.kind,
            "payload": encode(self.payload),
            "provenance": encode(self.provenance),
        }
        return json.dumps(doc, indent=indent, sort_keys=True)

    @classmethod
    def from_json(cls, text: str, source="<string>") -> "JsonRecord":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError(source, f"invalid JSON: {exc.msg}", exc.lineno) from None
        if not isinstance(doc, dict):
            raise FormatError(source, "top-level JSON value must be an object")
        for key in ("schema_version", "kind", "payload"):
            if key not in doc:
                raise FormatError(source, f"missing field {key!r}")
        if doc["kind"] not in RECORD_KINDS:
            raise FormatError(source, f"unknown record kind {doc['kind']!r}")
        return cls(
            kind=doc["kind"],
            payload=decode(doc["payload"]),
            provenance=decode(doc.get("provenance", {})),
            schema_version=doc["schema_version"],
        )

    def write(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def read(cls, path) -> "JsonRecord":
        return cls.from_json(Path(path).read_text(), source=path)


def _is_json(path) -> bool:
    return str(path).lower().endswith(".json")


def read_matrix(path) -> np.ndarray:
    """Matrix from a CSV file or a ``matrix`` JSON record."""
    if _is_json(path):
        rec = JsonRecord.read(path)
        if rec.kind != "matrix" or "A" not in rec.payload:
            raise FormatError(path, "expected a matrix record with payload field 'A'")
        return np.atleast_2d(np.asarray(rec.payload["A"], dtype=float))
    return read_matrix_csv(path)


def read_vector(path, field_name: str = "x") -> np.ndarray:
    """Vector from a CSV file or from `field_name` of a JSON record payload."""
    if _is_json(path):
        rec = JsonRecord.read(path)
        if field_name not in rec.payload:
            raise FormatError(path, f"record payload has no field {field_name!r}")
        return np.asarray(rec.payload[field_name], dtype=float).ravel()
    return read_vector_csv(path)
