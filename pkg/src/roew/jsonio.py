"""Deterministic JSON output.

Machine-facing files carry floats at 17 significant digits so a value
round-trips exactly and re-runs are byte-identical. The writer preserves
dict insertion order; callers build dicts in a fixed order.
"""

import hashlib
import json


def format_float(x):
    """17-significant-digit representation, valid as a JSON number."""
    return format(float(x), ".17g")


def dumps(obj, indent=None):
    """Serialize to JSON with fixed float formatting."""
    out = []
    _write(obj, out, indent, 0)
    return "".join(out)


def _write(obj, out, indent, level):
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        _write_items(
            ((json.dumps(str(k)) + ": ", v) for k, v in obj.items()),
            len(obj), "{}", out, indent, level,
        )
    elif isinstance(obj, (list, tuple)):
        _write_items(((("", v)) for v in obj), len(obj), "[]", out, indent, level)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def _write_items(items, count, brackets, out, indent, level):
    if count == 0:
        out.append(brackets)
        return
    out.append(brackets[0])
    pad = "\n" + " " * (indent * (level + 1)) if indent else ""
    closing = "\n" + " " * (indent * level) if indent else ""
    sep = "," + (pad if indent else " ")
    first = True
    for prefix, value in items:
        out.append(pad if first else sep)
        first = False
        out.append(prefix)
        _write(value, out, indent, level + 1)
    out.append(closing + brackets[1])


def write_json(path, obj, indent=2):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj, indent=indent))
        fh.write("\n")


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(dumps(row))
            fh.write("\n")


def read_jsonl(path):
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def config_hash(config):
    """Stable hash of a configuration mapping.

    The mapping is canonicalized through this module's serializer first,
    so a config read back from a written file hashes to the same value
    as the original (whole-number floats collapse to ints either way).
    """
    canon = json.loads(dumps(config))
    packed = json.dumps(canon, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(packed.encode("utf-8")).hexdigest()
