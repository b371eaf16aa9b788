"""RELGS-FIELD v1 text dumps of real fields."""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from .spectral import FFT_NORMALIZATION, Grid, RealField

MAGIC = "RELGS-FIELD"
VERSION = "v1"


class FieldFormatError(ValueError):
    pass


def header_line(grid: Grid) -> str:
    # extra key=value tokens after L are allowed; readers ignore unknown keys
    return f"{MAGIC} {VERSION} N={grid.N} n={grid.n} L={grid.L:.17g} fft={FFT_NORMALIZATION}"


def dumps(u: RealField) -> str:
    buf = io.StringIO()
    buf.write(header_line(u.grid) + "\n")
    for v in u.flat():
        buf.write(f"{v:.17g}\n")
    return buf.getvalue()


def write_field(u: RealField, path) -> None:
    Path(path).write_text(dumps(u))


def parse_header(line: str) -> Grid:
    tokens = line.split()
    if len(tokens) < 5 or tokens[0] != MAGIC or tokens[1] != VERSION:
        raise FieldFormatError(f"not a {MAGIC} {VERSION} header: {line!r}")
    keys = dict(t.split("=", 1) for t in tokens[2:] if "=" in t)
    try:
        return Grid(n=int(keys["n"]), L=float(keys["L"]), N=int(keys["N"]))
    except KeyError as exc:
        raise FieldFormatError(f"header is missing {exc.args[0]}") from exc


def loads(text: str) -> RealField:
    lines = text.splitlines()
    if not lines:
        raise FieldFormatError("empty field file")
    grid = parse_header(lines[0])
    values = np.array([float(x) for x in lines[1:] if x.strip()])
    if values.size != grid.size:
        raise FieldFormatError(f"expected {grid.size} values, found {values.size}")
    return RealField(grid, values)


def read_field(path) -> RealField:
    return loads(Path(path).read_text())
