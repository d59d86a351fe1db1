"""Self-describing text format for scalar fields on a grid lattice.

A dump stores the full nx-by-ny lattice row-major (x index fastest), one row
of values per line, with ``nan`` as the sentinel for exterior nodes.  Values
are written with 17 significant digits, which round-trips IEEE doubles
bit-exactly.  The header pins the lattice geometry and a hash of the domain
description so mismatched reads fail loudly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .geometry import ConvexDomain, Grid, domain_spec
from .operators import ScalarField

__all__ = ["FieldDump", "FieldReadError", "field_dump", "write_field", "read_field"]

_MAGIC = "maeig-field"
_VERSION = "1"


class FieldReadError(ValueError):
    """Malformed dump file; message carries the offending location."""


@dataclass
class FieldDump:
    """Lattice of values (nan outside the domain) plus its geometry header."""

    name: str
    nx: int
    ny: int
    h: float
    x0: float
    y0: float
    domain_hash: str
    values: np.ndarray  # (nx, ny) float64, nan at exterior nodes

    def field_on(self, grid: Grid) -> ScalarField:
        """Extract the interior-node field for a grid matching this header."""
        if (self.nx, self.ny) != grid.shape:
            raise FieldReadError(
                f"grid shape {grid.shape} does not match dump ({self.nx}, {self.ny})"
            )
        return self.values[grid.nodes_ij[:, 0], grid.nodes_ij[:, 1]].copy()


def domain_hash(domain: ConvexDomain) -> str:
    text = json.dumps(domain_spec(domain), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def field_dump(field: ScalarField, grid: Grid, name: str, domain: ConvexDomain) -> FieldDump:
    """Spread an interior-node field onto the full lattice with nan outside."""
    values = np.full(grid.shape, np.nan)
    values[grid.nodes_ij[:, 0], grid.nodes_ij[:, 1]] = np.asarray(field, dtype=float)
    return FieldDump(
        name=name,
        nx=grid.shape[0],
        ny=grid.shape[1],
        h=grid.h,
        x0=grid.origin[0],
        y0=grid.origin[1],
        domain_hash=domain_hash(domain),
        values=values,
    )


def _fmt(x: float) -> str:
    return format(x, ".17g")


def write_field(path, dump: FieldDump) -> None:
    with open(path, "w") as fh:
        fh.write(f"{_MAGIC} v{_VERSION}\n")
        fh.write(f"name {dump.name}\n")
        fh.write(f"nx {dump.nx}\n")
        fh.write(f"ny {dump.ny}\n")
        fh.write(f"h {_fmt(dump.h)}\n")
        fh.write(f"x0 {_fmt(dump.x0)}\n")
        fh.write(f"y0 {_fmt(dump.y0)}\n")
        fh.write(f"domain_hash {dump.domain_hash}\n")
        fh.write("---\n")
        for i in range(dump.nx):
            fh.write(" ".join(_fmt(v) for v in dump.values[i]))
            fh.write("\n")


def read_field(path) -> FieldDump:
    """Parse a dump; raises FieldReadError with the byte offset on truncation
    and with the line number on malformed headers."""
    with open(path, "rb") as fh:
        raw = fh.read()
    text = raw.decode("utf-8", errors="replace")
    lines = text.split("\n")
    if not lines or not lines[0].startswith(_MAGIC):
        raise FieldReadError(f"{path}: not a {_MAGIC} file (bad magic line)")
    if lines[0].strip() != f"{_MAGIC} v{_VERSION}":
        raise FieldReadError(f"{path}: unsupported version tag {lines[0].strip()!r}")

    header: dict[str, str] = {}
    body_start = None
    for ln, line in enumerate(lines[1:], start=2):
        if line.strip() == "---":
            body_start = ln
            break
        parts = line.split(maxsplit=1)
        if len(parts) != 2:
            raise FieldReadError(f"{path}:{ln}: malformed header line {line!r}")
        header[parts[0]] = parts[1]
    if body_start is None:
        raise FieldReadError(f"{path}: missing '---' header terminator")
    for key in ("name", "nx", "ny", "h", "x0", "y0", "domain_hash"):
        if key not in header:
            raise FieldReadError(f"{path}: header is missing {key!r}")
    try:
        nx = int(header["nx"])
        ny = int(header["ny"])
        h = float(header["h"])
        x0 = float(header["x0"])
        y0 = float(header["y0"])
    except ValueError as exc:
        raise FieldReadError(f"{path}: bad header value ({exc})") from exc
    if nx <= 0 or ny <= 0:
        raise FieldReadError(f"{path}: nonpositive lattice dimensions {nx} x {ny}")

    rows = lines[body_start:]
    # drop a single trailing empty line from the final newline
    if rows and rows[-1] == "":
        rows = rows[:-1]
    if len(rows) != nx:
        offset = len("\n".join(lines[: body_start + len(rows)]).encode())
        raise FieldReadError(
            f"{path}: expected {nx} value rows, found {len(rows)} (truncated near byte {offset})"
        )
    values = np.empty((nx, ny))
    consumed = len("\n".join(lines[:body_start]).encode()) + 1
    for i, row in enumerate(rows):
        parts = row.split()
        if len(parts) != ny:
            raise FieldReadError(
                f"{path}: row {i} has {len(parts)} values, expected {ny} "
                f"(size mismatch near byte {consumed})"
            )
        try:
            values[i] = [float(p) for p in parts]
        except ValueError as exc:
            raise FieldReadError(f"{path}: row {i}: unparsable value ({exc})") from exc
        consumed += len(row.encode()) + 1
    return FieldDump(
        name=header["name"],
        nx=nx,
        ny=ny,
        h=h,
        x0=x0,
        y0=y0,
        domain_hash=header["domain_hash"],
        values=values,
    )
