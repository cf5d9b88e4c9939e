"""CSV report tables and two-column plot-data files."""
from __future__ import annotations

import math
from pathlib import Path

from .errors import ConfigError

__all__ = ["fmt", "write_csv", "read_csv", "emit_plotdata"]


def fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    return f"{float(v):.17g}"


def write_csv(path, header, rows, comments=()):
    """UTF-8, comma separated, ``#`` comment lines first, then the header row."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def read_csv(path):
    """``(header, rows)`` with ``#`` lines skipped; cells stay strings."""
    header, rows = None, []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            cells = line.split(",")
            if header is None:
                header = cells
            else:
                rows.append(cells)
    if header is None:
        raise ConfigError(f"{path}: report has no header row")
    return header, rows


def emit_plotdata(report, x, y, out, log=False, title=None):
    """Write ``x y`` pairs from a report CSV; with ``log`` both columns are ``log10``.

    A report with no data rows gives a file holding only the header comments.
    Missing columns raise :class:`ConfigError`.
    """
    header, rows = read_csv(report)
    for col in (x, y):
        if col not in header:
            raise ConfigError(f"{report}: missing column {col!r}")
    ix, iy = header.index(x), header.index(y)
    out = Path(out)
    with out.open("w", encoding="utf-8", newline="") as fh:
        fh.write(f"# {title or Path(report).name}\n")
        if log:
            fh.write(f"# columns: log10({x}) log10({y})\n")
        else:
            fh.write(f"# columns: {x} {y}\n")
        for r in rows:
            xv, yv = float(r[ix]), float(r[iy])
            if log:
                xv = math.log10(xv) if xv > 0 else math.nan
                yv = math.log10(yv) if yv > 0 else math.nan
            fh.write(f"{xv:.17g} {yv:.17g}\n")
    return out
