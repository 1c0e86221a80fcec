"""Claim formatting and design comparison tables.

Bounds are stated the way datasheets and comparison tables phrase them:
"isolation < -35 dB", "ECC < 0.0002", "DG ≈ 10 dB". Each bound is the
tightest round number that is strictly beyond the measured worst case.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from decimal import ROUND_FLOOR, Decimal
from typing import Sequence

from .mimo import BandSummary

TABLE_HEADER = ("Ref", "-10 dB Bandwidth (GHz)", "Peak Gain (dBi)", "Isolation (dB)",
                "Num.Ports", "Num. Radiating Elements", "ECC", "Rad.Eff (%)")

BAND_SUMMARY_HEADER = ("band_lo_ghz", "band_hi_ghz", "pair", "coverage_min",
                       "worst_isolation_db", "max_ecc", "min_dg_db")


def _num(x: float) -> str:
    """Compact decimal text without exponent for table cells."""
    if math.isinf(x):
        return "-inf" if x < 0 else "inf"
    if math.isnan(x):
        return "nan"
    text = format(Decimal(repr(float(x))).normalize(), "f")
    return "0" if text in ("-0", "0") else text


def ghz(hz: float) -> str:
    return _num(round(hz / 1e9, 4))


def isolation_bound(worst_db: float) -> str:
    """``"< -35"`` for a worst case of -35.14 dB: the next integer up."""
    if math.isnan(worst_db):
        return "n/a"
    if math.isinf(worst_db) and worst_db < 0:
        return "-inf"
    return f"<{math.floor(worst_db) + 1}"


def ecc_bound(max_ecc: float) -> str:
    """Smallest one-significant-digit value strictly above ``max_ecc``.

    ``1.33e-4`` gives ``"<0.0002"``; exactly ``2e-4`` gives ``"<0.0003"``;
    zero is reported as ``"0"``.
    """
    if math.isnan(max_ecc):
        return "n/a"
    if max_ecc <= 0:
        return "0"
    d = Decimal(repr(float(max_ecc)))
    exp = d.adjusted()
    unit = Decimal(1).scaleb(exp)
    lead = (d / unit).to_integral_value(rounding=ROUND_FLOOR) + 1
    bound = (lead * unit).normalize()
    return f"<{format(bound, 'f')}"


def dg_claim(min_dg_db: float) -> str:
    if math.isnan(min_dg_db):
        return "n/a"
    return f"≈ {_num(round(min_dg_db))}"


def band_label(band: tuple) -> str:
    return f"{ghz(band[0])}-{ghz(band[1])}"


def summary_claim(summary: BandSummary) -> str:
    """One sentence with the bounds that hold over the whole band."""
    iso = isolation_bound(summary.worst_isolation_db)
    ecc = ecc_bound(summary.max_ecc)
    iso_text = "isolation = -inf dB" if iso == "-inf" else f"isolation {iso[0]} {iso[1:]} dB"
    ecc_text = "ECC 0" if ecc == "0" else f"ECC {ecc[0]} {ecc[1:]}"
    return (f"{band_label(summary.band)} GHz: {iso_text}, {ecc_text}, "
            f"DG {dg_claim(summary.min_dg_db)} dB")


def band_summary_rows(summaries: Sequence[BandSummary]) -> list[list[str]]:
    rows = []
    for s in summaries:
        cov = min(s.coverage) if s.coverage else float("nan")
        for p in s.pairs:
            rows.append([ghz(s.band[0]), ghz(s.band[1]), f"{p.ports[0] + 1}-{p.ports[1] + 1}",
                         repr(float(cov)), repr(p.worst_isolation_db), repr(p.max_ecc),
                         repr(p.min_dg_db)])
        rows.append([ghz(s.band[0]), ghz(s.band[1]), "all", repr(float(cov)),
                     repr(s.worst_isolation_db), repr(s.max_ecc), repr(s.min_dg_db)])
    return rows


def band_summary_markdown(summaries: Sequence[BandSummary]) -> str:
    lines = ["# Band summary", ""]
    for s in summaries:
        lines.append(f"- {summary_claim(s)}")
    lines += ["", "| Band (GHz) | Pair | Worst isolation (dB) | Max ECC | Min DG (dB) |",
              "|---|---|---|---|---|"]
    for s in summaries:
        for p in s.pairs:
            lines.append(f"| {band_label(s.band)} | {p.ports[0] + 1}-{p.ports[1] + 1} | "
                         f"{p.worst_isolation_db:.2f} | {p.max_ecc:.3g} | {p.min_dg_db:.4f} |")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ReportRow:
    """One design in comparison-table order.

    Ranges are ``(lo, hi)`` tuples or ``None`` when the design directory
    had no data for that column.
    """

    design: str
    bands_ghz: tuple
    peak_gain_dbi: tuple | None
    worst_isolation_db: float
    ports: int
    elements: int
    max_ecc: float
    efficiency_pct: tuple | None

    def cells(self) -> list[str]:
        bw = ", ".join(f"{_num(lo)}-{_num(hi)}" for lo, hi in self.bands_ghz) or "n/a"
        return [self.design, bw, _range(self.peak_gain_dbi),
                isolation_bound(self.worst_isolation_db), str(self.ports), str(self.elements),
                ecc_bound(self.max_ecc), _range(self.efficiency_pct)]


def _range(r) -> str:
    if r is None:
        return "n/a"
    lo, hi = r
    if round(lo, 2) == round(hi, 2):
        return _num(round(lo, 2))
    return f"{_num(round(lo, 2))} to {_num(round(hi, 2))}"


def report_markdown(rows: Sequence[ReportRow]) -> str:
    out = ["| " + " | ".join(TABLE_HEADER) + " |", "|" + "---|" * len(TABLE_HEADER)]
    for r in rows:
        out.append("| " + " | ".join(r.cells()) + " |")
    return "\n".join(out) + "\n"


def report_csv(rows: Sequence[ReportRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_HEADER)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()
