"""Pattern CSV ingestion.

The CSV layout is deliberately minimal because CST and HFSS exports differ;
adapters are expected to normalise to it::

    theta_deg,phi_deg,gain_dbi
    theta_deg,phi_deg,re_theta,im_theta,re_phi,im_phi
    theta_deg,phi_deg,mag_theta,ph_theta_deg,mag_phi,ph_phi_deg

Gain is converted from dBi to linear on the way in.
"""
from __future__ import annotations

import csv
import enum
import io
from pathlib import Path

import numpy as np

from .pattern import FarFieldGrid, PatternError


class PatternSchema(enum.Enum):
    GAIN_DBI = ("gain_dbi",)
    FIELD_RI = ("re_theta", "im_theta", "re_phi", "im_phi")
    FIELD_MAG_PHASE = ("mag_theta", "ph_theta_deg", "mag_phi", "ph_phi_deg")

    @property
    def header(self) -> list[str]:
        return ["theta_deg", "phi_deg", *self.value]


class PatternGridError(PatternError):
    """The CSV rows do not form a complete rectangular (theta, phi) grid."""

    def __init__(self, message: str, node: tuple | None = None):
        super().__init__(message)
        self.node = node


def _detect(header: list[str]) -> PatternSchema:
    for schema in PatternSchema:
        if header == schema.header:
            return schema
    raise PatternError(f"unrecognised pattern CSV header: {','.join(header)}")


def parse_pattern_csv(data, schema: PatternSchema | None = None) -> FarFieldGrid:
    """Read a pattern CSV into a :class:`FarFieldGrid`.

    Raises:
        PatternGridError: for missing or duplicated (theta, phi) nodes; the
            offending node is available as ``exc.node``.
        PatternError: for header or value problems.
    """
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else str(data)
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise PatternError("empty pattern file")
    header = [c.strip() for c in rows[0]]
    found = _detect(header)
    if schema is not None and schema is not found:
        raise PatternError(f"header matches {found.name}, expected {schema.name}")
    schema = found
    width = len(schema.header)

    body = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise PatternError(f"line {lineno}: expected {width} columns, got {len(row)}")
        try:
            body.append([float(c) for c in row])
        except ValueError:
            raise PatternError(f"line {lineno}: non-numeric value") from None
    if not body:
        raise PatternError("pattern file has no data rows")
    table = np.array(body)
    if not np.all(np.isfinite(table)):
        raise PatternError("pattern file contains non-finite values")

    theta = np.unique(table[:, 0])
    phi = np.unique(table[:, 1])
    it = np.searchsorted(theta, table[:, 0])
    ip = np.searchsorted(phi, table[:, 1])
    seen = np.zeros((theta.size, phi.size), dtype=int)
    np.add.at(seen, (it, ip), 1)
    dup = np.argwhere(seen > 1)
    if dup.size:
        node = (float(theta[dup[0][0]]), float(phi[dup[0][1]]))
        raise PatternGridError(f"duplicate grid node theta={node[0]:g}, phi={node[1]:g}", node)
    hole = np.argwhere(seen == 0)
    if hole.size:
        node = (float(theta[hole[0][0]]), float(phi[hole[0][1]]))
        raise PatternGridError(f"missing grid node theta={node[0]:g}, phi={node[1]:g}", node)

    def grid_of(col):
        out = np.empty((theta.size, phi.size))
        out[it, ip] = table[:, col]
        return out

    if schema is PatternSchema.GAIN_DBI:
        return FarFieldGrid(theta, phi, gain=10 ** (grid_of(2) / 10))
    if schema is PatternSchema.FIELD_RI:
        return FarFieldGrid(theta, phi,
                            e_theta=grid_of(2) + 1j * grid_of(3),
                            e_phi=grid_of(4) + 1j * grid_of(5))
    return FarFieldGrid(theta, phi,
                        e_theta=grid_of(2) * np.exp(1j * np.deg2rad(grid_of(3))),
                        e_phi=grid_of(4) * np.exp(1j * np.deg2rad(grid_of(5))))


def read_pattern_csv(path, schema: PatternSchema | None = None) -> FarFieldGrid:
    return parse_pattern_csv(Path(path).read_bytes(), schema)


def format_pattern_csv(grid: FarFieldGrid, schema: PatternSchema | None = None) -> str:
    """Serialise a grid in the pattern CSV layout (inverse of the parser)."""
    if schema is None:
        schema = PatternSchema.GAIN_DBI if grid.kind == "gain" else PatternSchema.FIELD_RI
    if (schema is PatternSchema.GAIN_DBI) != (grid.kind == "gain"):
        raise PatternError(f"schema {schema.name} does not fit a {grid.kind} grid")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(schema.header)
    for i, t in enumerate(grid.theta.tolist()):
        for j, p in enumerate(grid.phi.tolist()):
            if schema is PatternSchema.GAIN_DBI:
                g = grid.gain[i, j]
                cols = [10 * np.log10(g) if g > 0 else -999.0]
            elif schema is PatternSchema.FIELD_RI:
                et, ep = grid.e_theta[i, j], grid.e_phi[i, j]
                cols = [et.real, et.imag, ep.real, ep.imag]
            else:
                et, ep = grid.e_theta[i, j], grid.e_phi[i, j]
                cols = [abs(et), np.degrees(np.angle(et)), abs(ep), np.degrees(np.angle(ep))]
            w.writerow([repr(t), repr(p)] + [repr(float(c)) for c in cols])
    return buf.getvalue()
