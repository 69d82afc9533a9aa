"""Plain-text record format for scalars, vectors and matrices.

One record per header line, entries row-major on the following lines::

    scalar alpha_bar 0.0123
    vector z_vec 5
    0.1 0.2 0.3 0.4 0.5
    matrix p_mat 2 2
    1.0 0.0
    0.0 1.0

Floats are written with ``repr`` (shortest round-trip form), so a
write/read cycle is exact.  Lines starting with ``#`` are comments.
"""
from __future__ import annotations

import numpy as np

from .errors import IngestionError


def _fmt(v) -> str:
    return repr(float(v))


def dump_records(records, header: str = "") -> str:
    """Serialize an iterable of ``(name, value)`` pairs to text."""
    lines = [f"# {ln}" for ln in header.splitlines()]
    for name, value in records:
        if " " in name:
            raise ValueError(f"record name may not contain spaces: {name!r}")
        arr = np.asarray(value, dtype=float)
        if arr.ndim == 0:
            lines.append(f"scalar {name} {_fmt(arr)}")
        elif arr.ndim == 1:
            lines.append(f"vector {name} {arr.shape[0]}")
            lines.append(" ".join(_fmt(v) for v in arr))
        elif arr.ndim == 2:
            lines.append(f"matrix {name} {arr.shape[0]} {arr.shape[1]}")
            lines.extend(" ".join(_fmt(v) for v in row) for row in arr)
        else:
            raise ValueError(f"cannot serialize {arr.ndim}-d array {name!r}")
    return "\n".join(lines) + "\n"


def _floats(tokens, lineno):
    try:
        return [float(tok) for tok in tokens]
    except ValueError as exc:
        raise IngestionError(f"line {lineno}: {exc}") from None


def load_records(text: str) -> dict:
    """Parse text produced by :func:`dump_records` into ``{name: value}``."""
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    lines = [(i, ln) for i, ln in lines if ln and not ln.startswith("#")]
    out = {}
    pos = 0
    while pos < len(lines):
        lineno, ln = lines[pos]
        parts = ln.split()
        kind = parts[0]
        try:
            if kind == "scalar":
                _, name, val = parts
                out[name] = _floats([val], lineno)[0]
                pos += 1
            elif kind == "vector":
                _, name, n = parts
                n = int(n)
                vals = _floats(lines[pos + 1][1].split(), lines[pos + 1][0]) if n else []
                if len(vals) != n:
                    raise IngestionError(f"line {lineno}: vector {name} expects {n} entries")
                out[name] = np.array(vals, dtype=float)
                pos += 2 if n else 1
            elif kind == "matrix":
                _, name, r, c = parts
                r, c = int(r), int(c)
                rows = []
                for k in range(r):
                    rl, rtext = lines[pos + 1 + k]
                    row = _floats(rtext.split(), rl)
                    if len(row) != c:
                        raise IngestionError(f"line {rl}: matrix {name} row needs {c} entries")
                    rows.append(row)
                out[name] = np.array(rows, dtype=float).reshape(r, c)
                pos += 1 + r
            else:
                raise IngestionError(f"line {lineno}: unknown record kind {kind!r}")
        except (ValueError, IndexError) as exc:
            if isinstance(exc, IngestionError):
                raise
            raise IngestionError(f"line {lineno}: malformed record {ln!r}") from None
    return out
