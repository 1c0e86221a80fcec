"""Far-field grids and pattern analytics.

Grids are rectangular in (theta, phi) with theta in [0, 180] and phi in
[0, 360), degrees. Boresight is +z, so the rear hemisphere is theta > 90;
exports using another convention must be rotated before ingestion.

Spherical integrals use weights that are exact for a pattern varying
linearly in theta between samples (the sin(theta) factor is integrated in
closed form, so the poles need no special casing) and the periodic
trapezoidal rule in phi.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class PatternError(ValueError):
    pass


def _as_axis(values, name: str, lo: float, hi: float, closed_hi: bool) -> np.ndarray:
    a = np.array(values, dtype=float).ravel()
    if a.size < 1:
        raise PatternError(f"{name} axis is empty")
    if np.any(np.diff(a) <= 0):
        raise PatternError(f"{name} samples must be strictly increasing")
    if a[0] < lo or (a[-1] > hi if closed_hi else a[-1] >= hi):
        bracket = "]" if closed_hi else ")"
        raise PatternError(f"{name} samples must lie in [{lo:g}, {hi:g}{bracket}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FarFieldGrid:
    """Sampled far field: either linear realized gain or complex E components.

    Exactly one payload is present: ``gain`` (linear, nonnegative) or the pair
    ``e_theta``/``e_phi`` (complex field amplitudes in arbitrary common units).
    Payload arrays have shape ``(len(theta), len(phi))``.
    """

    theta: np.ndarray
    phi: np.ndarray
    gain: np.ndarray | None = None
    e_theta: np.ndarray | None = None
    e_phi: np.ndarray | None = None
    boresight: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        theta = _as_axis(self.theta, "theta", 0.0, 180.0, closed_hi=True)
        phi = _as_axis(self.phi, "phi", 0.0, 360.0, closed_hi=False)
        shape = (theta.size, phi.size)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)
        if tuple(self.boresight) != (0.0, 0.0, 1.0):
            raise PatternError("only +z boresight is supported; rotate the grid first")
        has_gain = self.gain is not None
        has_field = self.e_theta is not None or self.e_phi is not None
        if has_gain == has_field:
            raise PatternError("provide either a gain payload or field components")
        if has_gain:
            g = np.array(self.gain, dtype=float)
            if g.shape != shape:
                raise PatternError(f"gain shape {g.shape} does not match grid {shape}")
            if np.any(~np.isfinite(g)) or np.any(g < 0):
                raise PatternError("gain payload must be finite and nonnegative")
            g.setflags(write=False)
            object.__setattr__(self, "gain", g)
        else:
            for name in ("e_theta", "e_phi"):
                v = getattr(self, name)
                v = np.zeros(shape, complex) if v is None else np.array(v, dtype=complex)
                if v.shape != shape:
                    raise PatternError(f"{name} shape {v.shape} does not match grid {shape}")
                if not np.all(np.isfinite(v)):
                    raise PatternError(f"{name} must be finite")
                v.setflags(write=False)
                object.__setattr__(self, name, v)

    @property
    def kind(self) -> str:
        return "gain" if self.gain is not None else "field"

    @property
    def shape(self) -> tuple:
        return (self.theta.size, self.phi.size)

    def intensity(self) -> np.ndarray:
        """Radiation intensity per node: gain, or |E_theta|^2 + |E_phi|^2."""
        if self.gain is not None:
            return self.gain
        return np.abs(self.e_theta) ** 2 + np.abs(self.e_phi) ** 2

    def same_nodes(self, other: "FarFieldGrid") -> bool:
        return (np.array_equal(self.theta, other.theta)
                and np.array_equal(self.phi, other.phi))

    def gain_dbi(self) -> np.ndarray:
        """Gain in dBi; field grids are normalised to directive gain."""
        if self.gain is not None:
            g = self.gain
        else:
            u = self.intensity()
            g = 4 * np.pi * u / total_power(self)
        with np.errstate(divide="ignore"):
            return 10 * np.log10(g)


def solid_angle_weights(theta_deg, phi_deg) -> np.ndarray:
    """Quadrature weights ``w`` with ``sum(w * U)`` approximating the integral of U dOmega.

    Exact in theta for U linear between samples, periodic trapezoid in phi.
    A single phi sample stands for a phi-independent pattern.
    """
    th = np.deg2rad(np.asarray(theta_deg, dtype=float))
    ph = np.deg2rad(np.asarray(phi_deg, dtype=float))
    wt = np.zeros(th.size)
    if th.size < 2:
        raise PatternError("need at least two theta samples to integrate")
    a, b = th[:-1], th[1:]
    h = b - a
    # closed-form integral of the linear hat functions against sin(theta)
    left = (h * np.cos(a) - (np.sin(b) - np.sin(a))) / h
    right = ((np.sin(b) - np.sin(a)) - h * np.cos(b)) / h
    np.add.at(wt, np.arange(a.size), left)
    np.add.at(wt, np.arange(1, th.size), right)
    if ph.size == 1:
        wp = np.array([2 * np.pi])
    else:
        nxt = np.append(ph[1:], ph[0] + 2 * np.pi)
        prv = np.insert(ph[:-1], 0, ph[-1] - 2 * np.pi)
        wp = (nxt - prv) / 2
    return np.outer(wt, wp)


def integrate(grid: FarFieldGrid, values: np.ndarray):
    """Integral over the sphere of a per-node quantity sampled on ``grid``."""
    return np.sum(solid_angle_weights(grid.theta, grid.phi) * values)


def total_power(grid: FarFieldGrid) -> float:
    p = float(integrate(grid, grid.intensity()))
    if not p > 0:
        raise PatternError("pattern radiates zero total power")
    return p


class PeakGain(NamedTuple):
    dbi: float
    theta: float
    phi: float


def _require_gain(grid: FarFieldGrid) -> np.ndarray:
    if grid.gain is None:
        raise PatternError("this operation needs a gain payload")
    return grid.gain


def peak_gain(grid: FarFieldGrid) -> PeakGain:
    """Largest gain on the grid; ties go to the smallest theta, then phi."""
    g = _require_gain(grid)
    if g.size == 0:
        raise PatternError("empty grid")
    it, ip = np.unravel_index(np.argmax(g), g.shape)
    with np.errstate(divide="ignore"):
        dbi = float(10 * np.log10(g[it, ip]))
    return PeakGain(dbi, float(grid.theta[it]), float(grid.phi[ip]))


class Directivity(NamedTuple):
    linear: float
    dbi: float


def directivity(grid: FarFieldGrid) -> Directivity:
    """``4 pi U_max / integral(U dOmega)`` for either payload kind."""
    u = grid.intensity()
    d = 4 * np.pi * float(np.max(u)) / total_power(grid)
    return Directivity(d, 10 * np.log10(d))


class Efficiency(NamedTuple):
    value: float
    exceeds_unity: bool


def efficiency_ratio(gain_peak_dbi: float, directivity_dbi: float) -> Efficiency:
    """Radiation-efficiency proxy ``10**((G - D) / 10)``.

    Values above one are reported unclamped with ``exceeds_unity`` set; they
    mean the gain and directivity inputs are inconsistent.
    """
    eff = 10 ** ((gain_peak_dbi - directivity_dbi) / 10)
    return Efficiency(eff, eff > 1)


@dataclass(frozen=True, eq=False)
class PlaneCut:
    """A polar cut through the phi / phi+180 plane, angles -180..180 deg."""

    phi: float
    angles: np.ndarray
    values: np.ndarray

    def to_csv(self) -> str:
        rows = ["angle_deg,gain_dbi"]
        rows += [f"{a!r},{v!r}" for a, v in zip(self.angles.tolist(), self.values.tolist())]
        return "\n".join(rows) + "\n"


def _phi_column(grid: FarFieldGrid, values: np.ndarray, phi: float,
                interpolate: bool) -> np.ndarray:
    phi = phi % 360.0
    hit = np.flatnonzero(np.isclose(grid.phi, phi, rtol=0, atol=1e-9))
    if hit.size:
        return values[:, hit[0]]
    if not interpolate:
        raise PatternError(f"phi = {phi:g} deg is not on the grid")
    if grid.phi.size == 1:
        return values[:, 0]
    xp = np.append(grid.phi, grid.phi[0] + 360.0)
    x = phi if phi >= grid.phi[0] else phi + 360.0
    k = np.searchsorted(xp, x) - 1
    t = (x - xp[k]) / (xp[k + 1] - xp[k])
    ext = np.concatenate([values, values[:, :1]], axis=1)
    return (1 - t) * ext[:, k] + t * ext[:, k + 1]


def plane_cut(grid: FarFieldGrid, phi_deg: float, interpolate: bool = False) -> PlaneCut:
    """Stitch the phi and phi+180 half planes into one polar trace in dBi.

    The phi half plane maps theta 0..180 to angles 0..180 and the opposite
    half plane maps to 0..-180.
    """
    db = grid.gain_dbi()
    front = _phi_column(grid, db, phi_deg, interpolate)
    back = _phi_column(grid, db, phi_deg + 180.0, interpolate)
    th = grid.theta
    skip = 1 if th[0] == 0 else 0
    angles = np.concatenate([-th[skip:][::-1], th])
    values = np.concatenate([back[skip:][::-1], front])
    return PlaneCut(float(phi_deg % 360.0), angles, values)


def back_lobe_level(grid: FarFieldGrid) -> float:
    """Largest gain (dBi) over the rear hemisphere, theta > 90 deg."""
    rear = grid.theta > 90
    if not np.any(rear):
        raise PatternError("grid has no rear-hemisphere samples (theta > 90 deg)")
    g = _require_gain(grid)
    with np.errstate(divide="ignore"):
        return float(10 * np.log10(np.max(g[rear])))


def front_to_back_db(grid: FarFieldGrid) -> float:
    return peak_gain(grid).dbi - back_lobe_level(grid)


def polar_svg(cut: PlaneCut, floor_db: float | None = None, title: str = "") -> bytes:
    """Render a plane cut as a standalone polar SVG (0 deg at the top)."""
    size, cx, cy, radius = 420, 210.0, 210.0, 170.0
    finite = cut.values[np.isfinite(cut.values)]
    top = 5 * np.ceil(finite.max() / 5) if finite.size else 0.0
    if floor_db is None:
        floor_db = top - 40
    span = top - floor_db
    r = (np.clip(np.nan_to_num(cut.values, neginf=floor_db), floor_db, top)
         - floor_db) / span * radius
    ang = np.deg2rad(cut.angles)
    xs, ys = cx + r * np.sin(ang), cy - r * np.cos(ang)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    for level in np.arange(top, floor_db - 1e-9, -10.0):
        rr = (level - floor_db) / span * radius
        out.append(f'<circle cx="{cx:.3f}" cy="{cy:.3f}" r="{rr:.3f}" '
                   'fill="none" stroke="#bbbbbb" stroke-width="0.5"/>')
        out.append(f'<text x="{cx + 3:.3f}" y="{cy - rr - 2:.3f}" font-size="9" '
                   f'fill="#666666">{level:g} dBi</text>')
    for deg in range(0, 360, 30):
        a = np.deg2rad(deg)
        out.append(f'<line x1="{cx:.3f}" y1="{cy:.3f}" '
                   f'x2="{cx + radius * np.sin(a):.3f}" y2="{cy - radius * np.cos(a):.3f}" '
                   'stroke="#dddddd" stroke-width="0.5"/>')
        label = deg if deg <= 180 else deg - 360
        out.append(f'<text x="{cx + (radius + 14) * np.sin(a):.3f}" '
                   f'y="{cy - (radius + 14) * np.cos(a) + 3:.3f}" font-size="9" '
                   f'text-anchor="middle" fill="#666666">{label}</text>')
    pts = " ".join(f"{x:.3f},{y:.3f}" for x, y in zip(xs, ys))
    out.append(f'<polyline points="{pts}" fill="none" stroke="#1f4e9e" stroke-width="1.5"/>')
    caption = title or f"phi = {cut.phi:g} / {(cut.phi + 180) % 360:g} deg"
    out.append(f'<text x="10" y="16" font-size="11">{caption}</text>')
    out.append("</svg>")
    return ("\n".join(out) + "\n").encode("utf-8")
