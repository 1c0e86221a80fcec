"""MIMO figures of merit: envelope correlation, diversity gain, isolation.

Undefined per-frequency values are NaN and come with a diagnostic string;
nothing here raises because one frequency point in a sweep is degenerate.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .network import BandList, FrequencySweep, NetworkRecord, extract_bands, iter_pairs, to_db
from .pattern import FarFieldGrid, PatternError, solid_angle_weights

#: Correlation denominators at or below this are treated as lossless (undefined).
ECC_DENOMINATOR_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class EccTrace:
    sweep: FrequencySweep
    values: np.ndarray
    diagnostics: tuple = ()

    @property
    def undefined(self) -> np.ndarray:
        return np.isnan(self.values)

    @property
    def exceeds_unity(self) -> np.ndarray:
        """Data-quality flags: ECC above one means non-passive input data."""
        with np.errstate(invalid="ignore"):
            return self.values > 1


@dataclass(frozen=True, eq=False)
class DiversityTrace:
    sweep: FrequencySweep
    values: np.ndarray


def ecc_pair(s_ii, s_ij, s_ji, s_jj):
    """Envelope correlation from the four S entries of a port pair.

    ``|S_ii* S_ij + S_ji* S_jj|^2 / ((1 - |S_ii|^2 - |S_ji|^2)(1 - |S_jj|^2 - |S_ij|^2))``.
    Returns NaN where the denominator is <= ``ECC_DENOMINATOR_FLOOR``.
    """
    a, b, c, d = (np.asarray(x, dtype=complex) for x in (s_ii, s_ij, s_ji, s_jj))
    num = np.abs(np.conj(a) * b + np.conj(c) * d) ** 2
    den = (1 - (np.abs(a) ** 2 + np.abs(c) ** 2)) * (1 - (np.abs(d) ** 2 + np.abs(b) ** 2))
    safe = den > ECC_DENOMINATOR_FLOOR
    out = np.where(safe, num / np.where(safe, den, 1.0), np.nan)
    return float(out) if out.ndim == 0 else out


def ecc_from_sparams(record: NetworkRecord, i: int, j: int) -> EccTrace:
    if record.nports < 2:
        raise ValueError("ECC needs at least a 2-port record")
    if i == j:
        raise ValueError("ECC needs two distinct ports")
    values = ecc_pair(record.trace(i, i), record.trace(i, j),
                      record.trace(j, i), record.trace(j, j))
    values = np.atleast_1d(values)
    diag = tuple(
        f"f={f:.6g} Hz: denominator <= {ECC_DENOMINATOR_FLOOR:g}, ports ({i}, {j}) "
        "look lossless; ECC undefined"
        for f in record.f[np.isnan(values)]
    )
    return EccTrace(record.sweep, values, diag)


def diversity_gain(ecc):
    """Diversity gain ``10 log10(10 sqrt(1 - rho^2))`` in dB.

    Accepts an :class:`EccTrace` (returning a :class:`DiversityTrace`) or
    plain numbers. ``rho = 1`` gives ``-inf``; ``rho > 1`` or NaN gives NaN.
    """
    if isinstance(ecc, EccTrace):
        return DiversityTrace(ecc.sweep, diversity_gain(ecc.values))
    rho = np.asarray(ecc, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        inner = 1 - rho ** 2
        out = np.where(rho > 1, np.nan, 10 * np.log10(10 * np.sqrt(np.where(rho > 1, 0, inner))))
    return float(out) if out.ndim == 0 else out


def ecc_from_farfield(pat_i: FarFieldGrid, pat_j: FarFieldGrid) -> float:
    """Envelope correlation from complex far fields over the full sphere."""
    if pat_i.kind != "field" or pat_j.kind != "field":
        raise PatternError("far-field ECC needs complex field payloads")
    if not pat_i.same_nodes(pat_j):
        raise PatternError("patterns are sampled on different grids")
    w = solid_angle_weights(pat_i.theta, pat_i.phi)
    cross = np.sum(w * (pat_i.e_theta * np.conj(pat_j.e_theta)
                        + pat_i.e_phi * np.conj(pat_j.e_phi)))
    p_i = np.sum(w * pat_i.intensity())
    p_j = np.sum(w * pat_j.intensity())
    if not (p_i > 0 and p_j > 0):
        raise PatternError("zero-power pattern")
    return float(np.abs(cross) ** 2 / (p_i * p_j))


@dataclass(frozen=True, eq=False)
class Isolation:
    trace_db: np.ndarray
    band_worst_db: float = float("nan")


def _in_bands(f: np.ndarray, bands: BandList) -> np.ndarray:
    mask = np.zeros(f.shape, dtype=bool)
    for lo, hi in bands:
        mask |= (f >= lo) & (f <= hi)
    return mask


def isolation_db(record: NetworkRecord, i: int, j: int,
                 bands: BandList | None = None) -> Isolation:
    """``20 log10 |S_ij|`` per frequency and its worst (largest) value in ``bands``."""
    if i == j:
        raise ValueError("isolation needs two distinct ports")
    trace = np.atleast_1d(to_db(record.trace(i, j)))
    worst = float("nan")
    if bands is not None:
        mask = _in_bands(record.f, bands)
        if mask.any():
            worst = float(np.max(trace[mask]))
    return Isolation(trace, worst)


@dataclass(frozen=True)
class PairSummary:
    ports: tuple
    worst_isolation_db: float
    max_ecc: float
    min_dg_db: float


@dataclass(frozen=True)
class BandSummary:
    band: tuple
    coverage: tuple
    pairs: tuple = field(default_factory=tuple)

    @property
    def worst_isolation_db(self) -> float:
        return max((p.worst_isolation_db for p in self.pairs), default=float("nan"))

    @property
    def max_ecc(self) -> float:
        return max((p.max_ecc for p in self.pairs), default=float("nan"))

    @property
    def min_dg_db(self) -> float:
        return min((p.min_dg_db for p in self.pairs), default=float("nan"))


def _nanmax(x) -> float:
    x = np.asarray(x, dtype=float)
    return float("nan") if np.all(np.isnan(x)) else float(np.nanmax(x))


def _nanmin(x) -> float:
    x = np.asarray(x, dtype=float)
    return float("nan") if np.all(np.isnan(x)) else float(np.nanmin(x))


def mimo_band_summary(record: NetworkRecord, bands: BandList,
                      port_pairs: Sequence[tuple] | None = None,
                      threshold_db: float = -10.0) -> list[BandSummary]:
    """Per-band roll-up in the shape of a design comparison table row.

    For each band: fraction of the band where each port's reflection is
    below ``threshold_db``; and per port pair the worst isolation (over both
    transfer directions), the largest ECC and the smallest diversity gain,
    taken over the samples inside the band. Pairs default to all i < j.
    """
    if port_pairs is None:
        port_pairs = list(iter_pairs(record.nports))
    matched = [extract_bands(record, p, threshold_db) for p in range(record.nports)]
    per_pair = {}
    for i, j in port_pairs:
        ecc = ecc_from_sparams(record, i, j).values
        per_pair[(i, j)] = (
            np.maximum(isolation_db(record, i, j).trace_db,
                       isolation_db(record, j, i).trace_db),
            ecc,
            diversity_gain(ecc),
        )
    rows = []
    for band in bands:
        lo, hi = band
        single = BandList([band])
        coverage = tuple(m.intersect(single).total_width() / (hi - lo) for m in matched)
        mask = _in_bands(record.f, single)
        pairs = []
        for (i, j), (iso, ecc, dg) in per_pair.items():
            pairs.append(PairSummary(
                (i, j),
                _nanmax(iso[mask]) if mask.any() else float("nan"),
                _nanmax(ecc[mask]) if mask.any() else float("nan"),
                _nanmin(dg[mask]) if mask.any() else float("nan"),
            ))
        rows.append(BandSummary(band, coverage, tuple(pairs)))
    return rows
