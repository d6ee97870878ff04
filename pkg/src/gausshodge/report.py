"""Deterministic JSON and CSV output.

The standard encoder writes the shortest round-trip repr of a float; reports
here always carry 17 significant digits so regression files compare
byte-for-byte.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math

import numpy as np


def _float(x):
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    # keep floats recognizable as floats
    return s if any(c in s for c in ".en") else s + ".0"


def _encode(obj, indent, level, out):
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if obj is None or isinstance(obj, bool):
        out.append(json.dumps(obj))
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for i, k in enumerate(sorted(obj, key=str)):
            out.append(("," if i else "") + pad + json.dumps(str(k)) + ": ")
            _encode(obj[k], indent, level + 1, out)
        out.append(end + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        flat = all(isinstance(v, (int, float, bool, str, np.generic)) or v is None for v in obj)
        out.append("[")
        for i, v in enumerate(obj):
            if flat:
                out.append(", " if i else "")
            else:
                out.append(("," if i else "") + pad)
            _encode(v, indent, level + 1, out)
        out.append("]" if flat else end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent=1):
    """JSON text with sorted keys and floats at 17 significant digits."""
    out = []
    _encode(obj, indent, 0, out)
    return "".join(out) + "\n"


def sha256_text(text):
    return hashlib.sha256(text.encode()).hexdigest()


def config_hash(config):
    return sha256_text(dumps(config))


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_float(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()
