"""Frequency-domain network containers and algebra.

Everything here works on plain numpy arrays: a record holds ``s`` with shape
``(F, n, n)`` and a frequency axis in Hz. Records are immutable once built;
the arrays are flagged read-only.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import numpy as np

#: Above this condition number an impedance conversion is refused.
COND_LIMIT = 1e12


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


class IllConditionedError(ValueError):
    """A matrix needed for a conversion is singular or nearly so."""

    def __init__(self, message: str, condition: float):
        super().__init__(f"{message} (condition estimate {condition:.3g})")
        self.condition = condition


class SweepMismatchError(ValueError):
    """Two records that must share a frequency axis do not."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FrequencySweep:
    """Strictly increasing frequency points in Hz."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).ravel()
        if pts.size < 1:
            raise ValueError("frequency sweep needs at least one point")
        if not np.all(np.isfinite(pts)) or np.any(pts <= 0):
            raise ValueError("frequencies must be finite and > 0")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        object.__setattr__(self, "points", _frozen(pts))

    @classmethod
    def linspace(cls, start: float, stop: float, num: int) -> "FrequencySweep":
        return cls(np.linspace(start, stop, num))

    def __len__(self) -> int:
        return self.points.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, FrequencySweep):
            return NotImplemented
        return np.array_equal(self.points, other.points)

    __hash__ = None


def as_sweep(sweep) -> FrequencySweep:
    return sweep if isinstance(sweep, FrequencySweep) else FrequencySweep(sweep)


@dataclass(frozen=True, eq=False)
class NetworkRecord:
    """An n-port scattering matrix sampled over a frequency sweep.

    Args:
        sweep: frequency axis (a :class:`FrequencySweep` or array-like in Hz).
        s: complex array of shape ``(F, n, n)``. A ``(F,)`` array is accepted
            for a one-port.
        z_ref: reference impedance per port in ohms, or a scalar applied to
            every port.
        metadata: free-form provenance strings.
    """

    sweep: FrequencySweep
    s: np.ndarray
    z_ref: np.ndarray = 50.0
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        sweep = as_sweep(self.sweep)
        s = np.array(self.s, dtype=complex)
        if s.ndim == 1:
            s = s.reshape(-1, 1, 1)
        if s.ndim != 3 or s.shape[1] != s.shape[2] or s.shape[1] < 1:
            raise ValueError(f"s must have shape (F, n, n), got {s.shape}")
        if s.shape[0] != len(sweep):
            raise ValueError(
                f"{s.shape[0]} matrices for {len(sweep)} frequency points")
        if not np.all(np.isfinite(s)):
            raise ValueError("scattering entries must be finite")
        n = s.shape[1]
        z = np.array(self.z_ref, dtype=float).ravel()
        if z.size == 1:
            z = np.full(n, z[0])
        if z.size != n:
            raise ValueError(f"{z.size} reference impedances for {n} ports")
        if not np.all(np.isfinite(z)) or np.any(z <= 0):
            raise ValueError("reference impedances must be finite and > 0")
        object.__setattr__(self, "sweep", sweep)
        object.__setattr__(self, "s", _frozen(s))
        object.__setattr__(self, "z_ref", _frozen(z))
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def f(self) -> np.ndarray:
        return self.sweep.points

    @property
    def nports(self) -> int:
        return self.s.shape[1]

    def __len__(self) -> int:
        return self.s.shape[0]

    def trace(self, i: int, j: int) -> np.ndarray:
        """Complex S_ij over the sweep (zero-based port indices)."""
        self._check_port(i)
        self._check_port(j)
        return self.s[:, i, j]

    def _check_port(self, p: int) -> None:
        if not 0 <= p < self.nports:
            raise IndexError(f"port {p} out of range for {self.nports}-port")

    def is_passive(self, tol: float = 1e-9) -> bool:
        """True when the largest singular value is <= 1 + tol everywhere."""
        return bool(np.all(max_singular_value(self.s) <= 1 + tol))

    def equals(self, other: "NetworkRecord", atol: float = 0.0) -> bool:
        return (
            self.s.shape == other.s.shape
            and np.allclose(self.f, other.f, rtol=atol, atol=0)
            and np.allclose(self.s, other.s, rtol=0, atol=atol)
            and np.allclose(self.z_ref, other.z_ref, rtol=0, atol=atol)
        )


def max_singular_value(s: np.ndarray) -> np.ndarray:
    return np.linalg.svd(np.asarray(s, dtype=complex), compute_uv=False)[..., 0]


@dataclass(frozen=True)
class BandList:
    """Sorted, disjoint frequency intervals ``(f_lo, f_hi)`` in Hz."""

    bands: tuple = ()

    def __post_init__(self):
        bands = tuple((float(lo), float(hi)) for lo, hi in self.bands)
        for k, (lo, hi) in enumerate(bands):
            if not lo < hi:
                raise ValueError(f"band {k} has f_lo >= f_hi: {(lo, hi)}")
            if k and bands[k - 1][1] >= lo:
                raise ValueError("bands must be sorted and disjoint")
        object.__setattr__(self, "bands", bands)

    def __iter__(self) -> Iterator[tuple]:
        return iter(self.bands)

    def __len__(self) -> int:
        return len(self.bands)

    def __getitem__(self, k):
        return self.bands[k]

    def total_width(self) -> float:
        return sum(hi - lo for lo, hi in self.bands)

    def intersect(self, other: "BandList") -> "BandList":
        out = []
        for lo_a, hi_a in self.bands:
            for lo_b, hi_b in other.bands:
                lo, hi = max(lo_a, lo_b), min(hi_a, hi_b)
                if lo < hi:
                    out.append((lo, hi))
        return BandList(sorted(out))


#
# Scalar conversions
#

def vswr(gamma_mag):
    """Voltage standing-wave ratio ``(1 + |G|) / (1 - |G|)``.

    Raises:
        DomainError: for ``gamma_mag`` outside ``[0, 1)``; total reflection has
            no finite VSWR.
    """
    g = np.asarray(gamma_mag, dtype=float)
    if np.any(np.isnan(g)) or np.any(g < 0) or np.any(g >= 1):
        raise DomainError(f"reflection magnitude must lie in [0, 1): {gamma_mag}")
    out = (1 + g) / (1 - g)
    return float(out) if out.ndim == 0 else out


def to_db(x):
    """``20 log10 |x|``; exact zeros map to ``-inf``."""
    mag = np.abs(np.asarray(x))
    with np.errstate(divide="ignore"):
        out = 20 * np.log10(mag)
    return float(out) if out.ndim == 0 else out


def return_loss_db(s11):
    """Signed reflection level ``20 log10 |S11|`` (-10 dB means |S11| ~ 0.316).

    A zero reflection returns ``-inf`` rather than raising, since exact zeros
    show up in synthetic data.
    """
    return to_db(s11)


#
# Band extraction
#

_DB_FLOOR = -400.0


def extract_bands(record: NetworkRecord, port: int = 0,
                  threshold_db: float = -10.0) -> BandList:
    """Contiguous intervals where ``|S_pp|`` in dB is below ``threshold_db``.

    Band edges between samples are located by linear interpolation of the dB
    trace. A band touching the end of the sweep stops at the last sample.
    """
    trace = np.maximum(to_db(record.trace(port, port)), _DB_FLOOR)
    return bands_below(record.f, trace, threshold_db)


def bands_below(f: np.ndarray, trace_db: np.ndarray, threshold: float) -> BandList:
    f = np.asarray(f, dtype=float)
    y = np.asarray(trace_db, dtype=float)
    below = y < threshold
    bands = []
    k, n = 0, len(f)
    while k < n:
        if not below[k]:
            k += 1
            continue
        start = k
        while k + 1 < n and below[k + 1]:
            k += 1
        stop = k
        lo = f[0] if start == 0 else _crossing(f, y, start - 1, threshold)
        hi = f[-1] if stop == n - 1 else _crossing(f, y, stop, threshold)
        if bands and lo <= bands[-1][1]:
            # a single sample sitting exactly on the threshold splits nothing
            bands[-1] = (bands[-1][0], hi)
        elif lo < hi:
            bands.append((lo, hi))
        k = stop + 1
    return BandList(bands)


def _crossing(f, y, k, threshold) -> float:
    # threshold crossing between samples k and k+1
    t = (threshold - y[k]) / (y[k + 1] - y[k])
    return float(f[k] + t * (f[k + 1] - f[k]))


#
# Impedance conversions
#

def _cond(m: np.ndarray) -> np.ndarray:
    with np.errstate(all="ignore"):
        c = np.linalg.cond(m)
    return np.where(np.isfinite(c), c, np.inf)


def s_to_z(s, z_ref) -> np.ndarray:
    """Impedance matrix ``sqrt(Z0) (I + S)(I - S)^-1 sqrt(Z0)``.

    Accepts a single ``(n, n)`` matrix or a stack ``(F, n, n)``.

    Raises:
        IllConditionedError: when ``I - S`` is singular, e.g. an open circuit.
    """
    s = np.asarray(s, dtype=complex)
    n = s.shape[-1]
    root = np.sqrt(np.broadcast_to(np.asarray(z_ref, dtype=float), (n,)))
    eye = np.eye(n)
    a = eye - s
    cond = np.max(_cond(a))
    if not cond < COND_LIMIT:
        raise IllConditionedError("I - S is singular", cond)
    # (I+S)(I-S)^-1 = ((I-S)^-T (I+S)^T)^T
    core = np.swapaxes(np.linalg.solve(np.swapaxes(a, -1, -2),
                                       np.swapaxes(eye + s, -1, -2)), -1, -2)
    return root[:, None] * core * root[None, :]


def z_to_s(z, z_ref) -> np.ndarray:
    """Inverse of :func:`s_to_z`: ``S = (Zn - I)(Zn + I)^-1`` with normalised Zn."""
    z = np.asarray(z, dtype=complex)
    n = z.shape[-1]
    inv_root = 1 / np.sqrt(np.broadcast_to(np.asarray(z_ref, dtype=float), (n,)))
    zn = inv_root[:, None] * z * inv_root[None, :]
    eye = np.eye(n)
    b = zn + eye
    cond = np.max(_cond(b))
    if not cond < COND_LIMIT:
        raise IllConditionedError("Z + Z0 is singular", cond)
    return np.swapaxes(np.linalg.solve(np.swapaxes(b, -1, -2),
                                       np.swapaxes(zn - eye, -1, -2)), -1, -2)


def s_to_abcd(s, z_ref) -> np.ndarray:
    """Two-port S to ABCD for real per-port reference impedances."""
    s = np.asarray(s, dtype=complex)
    z1, z2 = np.broadcast_to(np.asarray(z_ref, dtype=float), (2,))
    s11, s12, s21, s22 = s[..., 0, 0], s[..., 0, 1], s[..., 1, 0], s[..., 1, 1]
    if np.any(s21 == 0):
        raise DomainError("ABCD form undefined where S21 = 0")
    den = 2 * s21 * np.sqrt(z1 * z2)
    out = np.empty(s.shape, dtype=complex)
    out[..., 0, 0] = ((1 + s11) * (1 - s22) + s12 * s21) * z1 / den
    out[..., 0, 1] = ((1 + s11) * (1 + s22) - s12 * s21) * z1 * z2 / den
    out[..., 1, 0] = ((1 - s11) * (1 - s22) - s12 * s21) / den
    out[..., 1, 1] = ((1 - s11) * (1 + s22) + s12 * s21) * z2 / den
    return out


def abcd_to_s(abcd, z_ref) -> np.ndarray:
    abcd = np.asarray(abcd, dtype=complex)
    z1, z2 = np.broadcast_to(np.asarray(z_ref, dtype=float), (2,))
    a, b, c, d = (abcd[..., 0, 0], abcd[..., 0, 1],
                  abcd[..., 1, 0], abcd[..., 1, 1])
    den = a * z2 + b + c * z1 * z2 + d * z1
    root = np.sqrt(z1 * z2)
    out = np.empty(abcd.shape, dtype=complex)
    out[..., 0, 0] = (a * z2 + b - c * z1 * z2 - d * z1) / den
    out[..., 0, 1] = 2 * (a * d - b * c) * root / den
    out[..., 1, 0] = 2 * root / den
    out[..., 1, 1] = (-a * z2 + b - c * z1 * z2 + d * z1) / den
    return out


def cascade_2port(a: NetworkRecord, b: NetworkRecord) -> NetworkRecord:
    """Connect port 2 of ``a`` to port 1 of ``b`` via ABCD multiplication."""
    if a.nports != 2 or b.nports != 2:
        raise ValueError("cascade_2port needs two 2-port records")
    if a.sweep != b.sweep:
        raise SweepMismatchError("records have different frequency sweeps")
    if not np.array_equal(a.z_ref, b.z_ref):
        raise ValueError("records have different reference impedances")
    t = s_to_abcd(a.s, a.z_ref) @ s_to_abcd(b.s, b.z_ref)
    return NetworkRecord(a.sweep, abcd_to_s(t, a.z_ref), a.z_ref,
                         {"source": "cascade"})


def resample(record: NetworkRecord, new_sweep) -> NetworkRecord:
    """Linear interpolation of real and imaginary parts onto ``new_sweep``.

    Raises:
        ValueError: if any new point lies outside the original sweep.
    """
    new_sweep = as_sweep(new_sweep)
    f_old, f_new = record.f, new_sweep.points
    if f_new[0] < f_old[0] or f_new[-1] > f_old[-1]:
        raise ValueError(
            f"cannot extrapolate: requested {f_new[0]:g}..{f_new[-1]:g} Hz, "
            f"available {f_old[0]:g}..{f_old[-1]:g} Hz")
    n = record.nports
    flat = record.s.reshape(len(record), n * n)
    out = np.empty((f_new.size, n * n), dtype=complex)
    for k in range(n * n):
        out[:, k] = (np.interp(f_new, f_old, flat[:, k].real)
                     + 1j * np.interp(f_new, f_old, flat[:, k].imag))
    return NetworkRecord(new_sweep, out.reshape(-1, n, n), record.z_ref,
                         record.metadata)


def series_impedance_record(sweep, z, z_ref: float = 50.0) -> NetworkRecord:
    """Two-port of a series impedance ``z`` (scalar or per-frequency)."""
    sweep = as_sweep(sweep)
    z = np.broadcast_to(np.asarray(z, dtype=complex), (len(sweep),))
    s = np.empty((len(sweep), 2, 2), dtype=complex)
    s[:, 0, 0] = s[:, 1, 1] = z / (z + 2 * z_ref)
    s[:, 0, 1] = s[:, 1, 0] = 2 * z_ref / (z + 2 * z_ref)
    return NetworkRecord(sweep, s, z_ref)


def through_record(sweep, z_ref: float = 50.0) -> NetworkRecord:
    sweep = as_sweep(sweep)
    s = np.zeros((len(sweep), 2, 2), dtype=complex)
    s[:, 0, 1] = s[:, 1, 0] = 1
    return NetworkRecord(sweep, s, z_ref)


def iter_pairs(n: int) -> Iterable[tuple]:
    return ((i, j) for i in range(n) for j in range(i + 1, n))
