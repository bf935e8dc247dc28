"""File formats: headerless CSV matrices, pattern JSON and DOT graphs."""
import csv
import hashlib
import json

import numpy as np

from .mcr import PrecisionPattern


class IngestionError(ValueError):
    def __init__(self, path, row=None, col=None, reason=""):
        where = f"{path}"
        if row is not None:
            where += f", row {row}"
        if col is not None:
            where += f", column {col}"
        super().__init__(f"{where}: {reason}")
        self.path, self.row, self.col = path, row, col


def format_float(x):
    """Shortest string that round-trips to the same double."""
    x = float(x)
    if x == 0.0:
        return "0"
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def write_matrix(path, M):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", newline="") as fh:
        for row in M:
            fh.write(",".join(format_float(v) for v in row))
            fh.write("\n")


def read_matrix(path):
    """Read a headerless numeric CSV; ragged rows and bad cells are located."""
    rows = []
    width = None
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise IngestionError(path, reason=str(exc)) from exc
    with fh:
        for i, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            if width is None:
                width = len(rec)
            elif len(rec) != width:
                raise IngestionError(path, row=i, reason=f"expected {width} fields, found {len(rec)}")
            vals = []
            for j, cell in enumerate(rec, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise IngestionError(path, row=i, col=j, reason=f"not a number: {cell!r}") from None
                if not np.isfinite(v):
                    raise IngestionError(path, row=i, col=j, reason=f"non-finite value: {cell!r}")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise IngestionError(path, reason="no data")
    return np.array(rows, dtype=float)


def read_labels(path):
    with open(path) as fh:
        return [line.strip() for line in fh if line.strip()]


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=False, allow_nan=True)
        fh.write("\n")


def write_pattern(path, pattern, labels=None, rule=None):
    write_json(path, pattern.to_dict(labels, rule))


def read_pattern(path):
    """Returns ``(pattern, labels)``."""
    try:
        with open(path) as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot read pattern file {path}: {exc}") from exc
    if not isinstance(d, dict):
        raise ValueError(f"malformed pattern file {path}")
    pattern = PrecisionPattern.from_dict(d)
    labels = d.get("labels") or [f"y{i + 1}" for i in range(pattern.q)]
    if len(labels) != pattern.q:
        raise ValueError("label count does not match q")
    return pattern, labels


def _dot_id(s):
    return '"' + str(s).replace("\\", "\\\\").replace('"', '\\"') + '"'


def pattern_to_dot(pattern, labels=None):
    labels = labels or [f"y{i + 1}" for i in range(pattern.q)]
    lines = ["graph dependency {"]
    for lab in labels:
        lines.append(f"  {_dot_id(lab)};")
    for s, k, sg in pattern.edges():
        sign = "+1" if sg > 0 else "-1"
        style = "solid" if sg > 0 else "dashed"
        lines.append(f"  {_dot_id(labels[s])} -- {_dot_id(labels[k])} "
                     f"[sign=\"{sign}\", style={style}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def pattern_to_graph_json(pattern, labels=None):
    labels = labels or [f"y{i + 1}" for i in range(pattern.q)]
    return {
        "nodes": [{"id": i, "label": lab} for i, lab in enumerate(labels)],
        "edges": [{"source": s, "target": k, "sign": sg} for s, k, sg in pattern.edges()],
    }


def graph_json_to_pattern(d):
    """Inverse of ``pattern_to_graph_json``."""
    q = len(d["nodes"])
    return PrecisionPattern.from_dict({"q": q, "edges": d["edges"]}), [n["label"] for n in d["nodes"]]
