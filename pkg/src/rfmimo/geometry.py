"""Parametric layered geometry for the aperture-coupled element and its 2x2 array.

Everything is 2.5D: named layers at a z height, each holding closed loops
tagged ``metal``, ``dielectric`` or ``aperture``. Apertures name their host
metal loop and are drawn as holes with the even-odd rule. Units are mm.

Constructive choices for symbols whose placement the parameter set leaves
open are isolated in the ``_dumbbell``, ``_u_slot``, ``_ring`` and
``_decoupling_cross`` helpers; see ``docs/geometry.md``.
"""
from __future__ import annotations

import json
import math
import sys
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import shapely
from shapely.geometry import Polygon, box
from shapely.geometry.polygon import orient

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

FORMAT = "geom-v1"
MATERIALS = ("metal", "dielectric", "aperture")
ARC_SEGMENTS = 64
LAYER_ORDER = ("feed", "ground", "air_gap", "patch", "metasurface")


class GeometryError(ValueError):
    """Malformed geometry or an unknown layer."""


class GeometryValidationError(GeometryError):
    """A parameter violates an invariant; ``parameter`` names it."""

    def __init__(self, parameter: str, message: str):
        super().__init__(f"{parameter}: {message}")
        self.parameter = parameter


class GeometryStructureError(GeometryError):
    """Built geometry breaks a structural rule (overlap, containment)."""

    def __init__(self, message: str, pair: tuple | None = None):
        super().__init__(message)
        self.pair = pair


def _check_positive(obj, names: Iterable[str], allow_zero: Sequence[str] = ()):
    for name in names:
        v = getattr(obj, name)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise GeometryValidationError(name, f"must be a number, got {v!r}")
        if not math.isfinite(v):
            raise GeometryValidationError(name, "must be finite")
        if v < 0 or (v == 0 and name not in allow_zero):
            raise GeometryValidationError(name, f"must be positive, got {v!r}")


@dataclass(frozen=True)
class ElementParams:
    """Radiating element dimensions in mm (board, feed, slot, patch, rings)."""

    H: float = 12.5
    T: float = 1.524
    P: float = 80.0
    K: float = 6.0
    Wf1: float = 3.575
    Wf2: float = 1.5317
    Wf3: float = 1.476
    lf: float = 49.591
    lf2: float = 18.21
    lf3: float = 0.614
    Ws: float = 11.712
    Ls: float = 17.13
    Rs: float = 4.8767
    R: float = 7.425
    W: float = 44.1467
    L: float = 18.0627
    a: float = 6.69
    b: float = 9.276
    c: float = 10.755
    d: float = 0.618
    e: float = 2.178
    f: float = 2.85
    M: float = 20.0
    S: float = 8.621
    N: float = 0.623

    def validate(self) -> "ElementParams":
        _check_positive(self, [f.name for f in fields(self)], allow_zero=("R",))
        p = self
        if p.W >= p.P:
            raise GeometryValidationError("W", f"patch width {p.W} must be below board side {p.P}")
        if p.L >= p.P:
            raise GeometryValidationError("L", f"patch length {p.L} must be below board side {p.P}")
        if p.Ls >= p.P:
            raise GeometryValidationError("Ls", f"slot length {p.Ls} must be below board side {p.P}")
        if p.Rs >= p.Ws:
            raise GeometryValidationError("Rs", f"end radius {p.Rs} must be below slot width {p.Ws}")
        if p.Ls / 2 + p.Rs >= p.P / 2 or p.Ws >= p.P:
            raise GeometryValidationError("Ls", "dumbbell slot does not fit inside the ground plane")
        for name in ("Wf1", "Wf2", "Wf3"):
            if getattr(p, name) >= p.P:
                raise GeometryValidationError(name, "feed width must be below board side")
        if p.lf + p.lf2 + p.lf3 >= p.P:
            raise GeometryValidationError("lf", "total feed length must be below board side")
        if p.R >= min(p.W, p.L) / 2:
            raise GeometryValidationError("R", f"corner cut {p.R} must be below half the shorter patch side")
        if p.d >= min(p.a, p.b) or 2 * p.d >= p.c:
            raise GeometryValidationError("d", "slot trace width too large for the U outline")
        if p.e + max(p.a, p.b) >= p.L:
            raise GeometryValidationError("b", "U-slot arms run past the patch edge")
        if p.f / 2 + p.c >= p.W / 2:
            raise GeometryValidationError("c", "U-slot base runs past the patch edge")
        # outer-arm corners against the 45 degree corner cuts
        xo, y0 = p.f / 2 + p.c, -p.L / 2 + p.e
        if max(xo + abs(y0), xo + abs(y0 + p.b)) >= p.W / 2 + p.L / 2 - p.R:
            raise GeometryValidationError("R", "U-slot outline crosses a truncated patch corner")
        if 2 * p.N >= p.S:
            raise GeometryValidationError("N", "ring width must be below the ring radius")
        if p.S >= p.M:
            raise GeometryValidationError("S", "ring diameter must be below the lattice pitch")
        if 3 * p.M + p.S >= p.P:
            raise GeometryValidationError("M", "ring lattice does not fit on the board")
        return self


@dataclass(frozen=True)
class ReflectorOptions:
    enabled: bool = False
    offset_mm: float = 20.0
    side_mm: float = 178.0


@dataclass(frozen=True)
class MimoParams:
    """2x2 array dimensions in mm.

    ``D1``..``D8``, ``B1`` and ``A1`` are carried, validated and emitted but
    do not drive the layout; element placement follows from ``P`` and ``K``.
    """

    H: float = 12.5
    K: float = 6.0
    T: float = 1.524
    L1: float = 166.0
    D1: float = 17.926
    D2: float = 30.97
    D3: float = 34.144
    D4: float = 24.68
    D5: float = 42.98
    D6: float = 42.98
    D7: float = 17.37
    D8: float = 17.37
    C1: float = 81.67
    B1: float = 64.82
    A1: float = 54.895
    g: float = 4.0
    P: float = 80.0
    reflector: ReflectorOptions = field(default_factory=ReflectorOptions)

    def validate(self) -> "MimoParams":
        _check_positive(self, [f.name for f in fields(self) if f.name != "reflector"])
        if not isinstance(self.reflector.enabled, bool):
            raise GeometryValidationError("enabled", "reflector.enabled must be true or false")
        _check_positive(self.reflector, ("offset_mm", "side_mm"))
        if self.g >= self.K:
            raise GeometryValidationError("g", f"slot width {self.g} must fit in the element gap {self.K}")
        if self.C1 > self.L1:
            raise GeometryValidationError("C1", "decoupling slot longer than the board")
        return self


# ---- loops and layers -------------------------------------------------------

Point2 = tuple


def _normalize(coords) -> tuple:
    """Open, counter-clockwise vertex tuple starting at the lexicographic minimum."""
    pts = [(float(x), float(y)) for x, y in coords]
    if len(pts) > 1 and pts[0] == pts[-1]:
        pts = pts[:-1]
    dedup = []
    for p in pts:
        if not dedup or dedup[-1] != p:
            dedup.append(p)
    if len(dedup) > 1 and dedup[0] == dedup[-1]:
        dedup.pop()
    area = 0.0
    for (x0, y0), (x1, y1) in zip(dedup, dedup[1:] + dedup[:1]):
        area += x0 * y1 - x1 * y0
    if area < 0:
        dedup.reverse()
    k = min(range(len(dedup)), key=lambda i: dedup[i])
    return tuple(dedup[k:] + dedup[:k])


@dataclass(frozen=True)
class Loop:
    label: str
    material: str
    points: tuple
    instance: int | None = None
    host: str | None = None

    def __post_init__(self):
        if self.material not in MATERIALS:
            raise GeometryError(f"loop {self.label!r}: unknown material {self.material!r}")
        if self.material == "aperture" and not self.host:
            raise GeometryError(f"aperture {self.label!r} needs a host metal loop")
        object.__setattr__(self, "points", tuple((float(x), float(y)) for x, y in self.points))
        if len(self.points) < 3:
            raise GeometryError(f"loop {self.label!r} has fewer than 3 vertices")

    @property
    def polygon(self) -> Polygon:
        return Polygon(self.points)

    def transformed(self, fn, instance=None, prefix="") -> "Loop":
        host = f"{prefix}{self.host}" if self.host else None
        return Loop(f"{prefix}{self.label}", self.material,
                    _normalize(fn(p) for p in self.points), instance, host)


@dataclass(frozen=True)
class Layer:
    name: str
    z: float
    loops: tuple = ()

    def loop(self, label: str) -> Loop:
        for lp in self.loops:
            if lp.label == label:
                return lp
        raise KeyError(label)

    def by_material(self, material: str) -> list:
        return [lp for lp in self.loops if lp.material == material]


@dataclass(frozen=True)
class GeometrySpec:
    layers: tuple
    stack: dict
    params: dict = field(default_factory=dict)

    def layer(self, name: str) -> Layer:
        for ly in self.layers:
            if ly.name == name:
                return ly
        raise GeometryError(f"unknown layer {name!r}; have {', '.join(self.layer_names)}")

    @property
    def layer_names(self) -> tuple:
        return tuple(ly.name for ly in self.layers)

    @property
    def z_min(self) -> float:
        if not self.layers:
            raise GeometryError("geometry has no layers")
        return min(ly.z for ly in self.layers)

    def extent(self) -> tuple:
        """(xmin, ymin, xmax, ymax) over all loops."""
        pts = np.array([p for ly in self.layers for lp in ly.loops for p in lp.points])
        return (float(pts[:, 0].min()), float(pts[:, 1].min()),
                float(pts[:, 0].max()), float(pts[:, 1].max()))


# ---- primitive shapes -------------------------------------------------------

def _rect(x0, y0, x1, y1) -> tuple:
    return _normalize([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])


def _circle(cx, cy, r, n=ARC_SEGMENTS) -> list:
    return [(cx + r * math.cos(2 * math.pi * k / n), cy + r * math.sin(2 * math.pi * k / n))
            for k in range(n)]


def _polygon_coords(geom) -> tuple:
    if geom.geom_type != "Polygon" or len(geom.interiors):
        raise GeometryError(f"expected a simple polygon, got {geom.geom_type}")
    return _normalize(orient(geom, 1.0).exterior.coords)


def _feed(p: ElementParams) -> tuple:
    """Stepped microstrip from the board edge at y = -P/2 toward +y."""
    y0 = -p.P / 2
    y1, y2, y3 = y0 + p.lf, y0 + p.lf + p.lf2, y0 + p.lf + p.lf2 + p.lf3
    parts = [box(-p.Wf1 / 2, y0, p.Wf1 / 2, y1), box(-p.Wf2 / 2, y1, p.Wf2 / 2, y2),
             box(-p.Wf3 / 2, y2, p.Wf3 / 2, y3)]
    return _polygon_coords(shapely.union_all(parts))


def _dumbbell(p: ElementParams) -> tuple:
    """Ls (x) by Ws (y) rectangle joined with radius-Rs disks on its short ends."""
    bar = box(-p.Ls / 2, -p.Ws / 2, p.Ls / 2, p.Ws / 2)
    ends = [Polygon(_circle(sx * p.Ls / 2, 0.0, p.Rs)) for sx in (-1, 1)]
    return _polygon_coords(shapely.union_all([bar, *ends]))


def _patch(p: ElementParams) -> tuple:
    """W (x) by L (y) rectangle with all four corners cut at leg R."""
    w, h, r = p.W / 2, p.L / 2, p.R
    return _normalize([(-w + r, -h), (w - r, -h), (w, -h + r), (w, h - r),
                       (w - r, h), (-w + r, h), (-w, h - r), (-w, -h + r)])


def _u_slot(p: ElementParams, side: int) -> tuple:
    """Upward-opening U: base from x = f/2 to f/2 + c, inset e from the
    bottom patch edge, trace width d, outer arm b, inner arm a.
    ``side`` = -1 mirrors it into the left half."""
    xi, xo, y0 = p.f / 2, p.f / 2 + p.c, -p.L / 2 + p.e
    pts = [(xi, y0), (xo, y0), (xo, y0 + p.b), (xo - p.d, y0 + p.b), (xo - p.d, y0 + p.d),
           (xi + p.d, y0 + p.d), (xi + p.d, y0 + p.a), (xi, y0 + p.a)]
    return _normalize((side * x, y) for x, y in pts)


def _ring(p: ElementParams, cx: float, cy: float) -> tuple:
    return (_normalize(_circle(cx, cy, p.S / 2)), _normalize(_circle(cx, cy, p.S / 2 - p.N)))


def _ring_centres(p: ElementParams) -> list:
    return [((i - 1.5) * p.M, (j - 1.5) * p.M) for j in range(4) for i in range(4)]


def _element_layers(p: ElementParams) -> dict:
    """Loops per layer for one element centred at the origin."""
    h = p.P / 2
    board = _rect(-h, -h, h, h)
    rings = []
    for k, (cx, cy) in enumerate(_ring_centres(p)):
        outer, inner = _ring(p, cx, cy)
        rings.append(Loop(f"ring_{k}", "metal", outer))
        rings.append(Loop(f"ring_{k}_hole", "aperture", inner, host=f"ring_{k}"))
    return {
        "feed": [Loop("feed", "metal", _feed(p))],
        "ground": [Loop("ground", "metal", board),
                   Loop("dumbbell", "aperture", _dumbbell(p), host="ground")],
        "air_gap": [],
        "patch": [Loop("patch", "metal", _patch(p)),
                  Loop("uslot_right", "aperture", _u_slot(p, 1), host="patch"),
                  Loop("uslot_left", "aperture", _u_slot(p, -1), host="patch")],
        "metasurface": rings,
    }


def _layer_z(T: float, H: float) -> dict:
    return {"feed": 0.0, "ground": T, "air_gap": T, "patch": T + H, "metasurface": 2 * T + H}


def _stack(T: float, H: float) -> dict:
    return {"substrate_1": T, "air_gap": H, "substrate_2": T}


def _dielectrics(h: float) -> dict:
    board = _rect(-h, -h, h, h)
    return {"feed": [Loop("substrate_1", "dielectric", board)],
            "air_gap": [Loop("air", "dielectric", board)],
            "patch": [Loop("substrate_2", "dielectric", board)]}


def _params_dict(element: ElementParams | None = None, mimo: MimoParams | None = None) -> dict:
    out = {}
    if element is not None:
        out["element"] = asdict(element)
    if mimo is not None:
        m = asdict(mimo)
        out["reflector"] = m.pop("reflector")
        out["mimo"] = m
    return out


def build_element(params: ElementParams | None = None) -> GeometrySpec:
    """Five-layer geometry of a single element on a P x P board."""
    params = (params or ElementParams()).validate()
    loops = _element_layers(params)
    diel = _dielectrics(params.P / 2)
    z = _layer_z(params.T, params.H)
    layers = tuple(Layer(name, z[name], tuple(diel.get(name, []) + loops[name]))
                   for name in LAYER_ORDER)
    spec = GeometrySpec(layers, _stack(params.T, params.H), _params_dict(params))
    validate_spec(spec)
    return spec


def rotate90(pt: Point2, k: int = 1) -> Point2:
    """Exact quarter-turn rotation about the origin."""
    x, y = pt
    for _ in range(k % 4):
        x, y = -y, x
    return (x, y)


def _decoupling_cross(m: MimoParams) -> tuple:
    """Horizontal and vertical strips of width g and length C1 through the centre."""
    hw, hl = m.g / 2, m.C1 / 2
    return _polygon_coords(shapely.union(box(-hl, -hw, hl, hw), box(-hw, -hl, hw, hl)))


def build_mimo(params: MimoParams | None = None, element: ElementParams | None = None) -> GeometrySpec:
    """Four elements rotated 0/90/180/270 degrees about the board centre.

    Instance 0 sits in the +x, -y quadrant with its feed at the board edge;
    instance k is instance 0 turned by k quarter turns. The shared ground
    carries the four coupling slots plus the central decoupling cross.
    """
    m = (params or MimoParams()).validate()
    el = (element or ElementParams()).validate()
    for name in ("H", "T", "P", "K"):
        if getattr(m, name) != getattr(el, name):
            raise GeometryValidationError(
                name, f"array value {getattr(m, name)} differs from element value {getattr(el, name)}")
    if 2 * m.P + m.K > m.L1:
        raise GeometryValidationError("L1", f"2P + K = {2 * m.P + m.K} exceeds board side {m.L1}")

    off = (m.P + m.K) / 2
    local = _element_layers(el)
    half = m.L1 / 2
    per_layer = {name: [] for name in LAYER_ORDER}
    per_layer["ground"].append(Loop("ground", "metal", _rect(-half, -half, half, half)))
    per_layer["ground"].append(Loop("decoupling_cross", "aperture", _decoupling_cross(m), host="ground"))
    footprints = []
    for k in range(4):
        def place(pt, k=k):
            return rotate90((pt[0] + off, pt[1] - off), k)
        fp = Loop(f"e{k}/footprint", "dielectric", _normalize(
            place(p) for p in _rect(-el.P / 2, -el.P / 2, el.P / 2, el.P / 2)), k)
        footprints.append(fp)
        for name in LAYER_ORDER:
            for lp in local[name]:
                if lp.label == "ground":
                    continue
                if lp.host == "ground":
                    moved = lp.transformed(place, k, prefix=f"e{k}/")
                    per_layer[name].append(replace(moved, host="ground"))
                else:
                    per_layer[name].append(lp.transformed(place, k, prefix=f"e{k}/"))
    _check_footprints(footprints)

    diel = _dielectrics(half)
    z = _layer_z(m.T, m.H)
    layers = tuple(Layer(name, z[name], tuple(diel.get(name, []) + per_layer[name]))
                   for name in LAYER_ORDER)
    spec = GeometrySpec(layers, _stack(m.T, m.H), _params_dict(el, m))
    validate_spec(spec)
    if m.reflector.enabled:
        spec = add_reflector(spec, m.reflector.offset_mm, m.reflector.side_mm)
    return spec


def _check_footprints(footprints: Sequence[Loop]):
    for i in range(len(footprints)):
        for j in range(i + 1, len(footprints)):
            a, b = footprints[i].polygon, footprints[j].polygon
            if a.intersection(b).area > 1e-9:
                raise GeometryStructureError(
                    f"element footprints {i} and {j} overlap", (i, j))


def add_reflector(spec: GeometrySpec, offset_mm: float = 20.0, side_mm: float = 178.0) -> GeometrySpec:
    """Append a solid square metal plate ``offset_mm`` below the lowest layer."""
    if not spec.layers:
        raise GeometryError("geometry has no layers to place a reflector under")
    for name, v in (("offset_mm", offset_mm), ("side_mm", side_mm)):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise GeometryValidationError(name, f"must be a finite number, got {v!r}")
    if offset_mm <= 0:
        raise GeometryValidationError("offset_mm", "reflector must sit strictly below the lowest layer")
    if side_mm <= 0:
        raise GeometryValidationError("side_mm", "reflector side must be positive")
    if "reflector" in spec.layer_names:
        raise GeometryError("geometry already has a reflector layer")
    xmin, ymin, xmax, ymax = spec.extent()
    board = max(xmax - xmin, ymax - ymin)
    if side_mm < board:
        warnings.warn(f"reflector side {side_mm} mm is smaller than the board ({board} mm)",
                      stacklevel=2)
    h = side_mm / 2
    z = spec.z_min - offset_mm
    plate = Layer("reflector", z, (Loop("reflector", "metal", _rect(-h, -h, h, h)),))
    params = dict(spec.params)
    params["reflector"] = {"enabled": True, "offset_mm": offset_mm, "side_mm": side_mm}
    return GeometrySpec((plate,) + tuple(spec.layers), dict(spec.stack), params)


# ---- validation -------------------------------------------------------------

def validate_spec(spec: GeometrySpec) -> list[str]:
    """Run structural checks; returns the list of passed check names.

    Checks: loop simplicity, unique labels per layer, aperture containment
    strictly inside the host metal, disjoint apertures per host, and no
    metal overlap between different element instances.
    """
    passed = []
    for ly in spec.layers:
        labels = [lp.label for lp in ly.loops]
        if len(set(labels)) != len(labels):
            raise GeometryStructureError(f"layer {ly.name}: duplicate loop labels")
        polys = {}
        for lp in ly.loops:
            poly = lp.polygon
            if not poly.is_valid or not poly.exterior.is_simple or poly.area <= 0:
                raise GeometryStructureError(f"layer {ly.name}: loop {lp.label} is not simple")
            polys[lp.label] = poly
        for lp in ly.by_material("aperture"):
            host = next((h for h in ly.loops if h.label == lp.host), None)
            if host is None or host.material != "metal":
                raise GeometryStructureError(
                    f"layer {ly.name}: aperture {lp.label} has no metal host {lp.host!r}")
            if not polys[host.label].contains_properly(polys[lp.label]):
                raise GeometryStructureError(
                    f"layer {ly.name}: aperture {lp.label} is not strictly inside {lp.host}")
        aps = ly.by_material("aperture")
        for i in range(len(aps)):
            for j in range(i + 1, len(aps)):
                if aps[i].host == aps[j].host and polys[aps[i].label].intersects(polys[aps[j].label]):
                    raise GeometryStructureError(
                        f"layer {ly.name}: apertures {aps[i].label} and {aps[j].label} touch",
                        (aps[i].label, aps[j].label))
        metals = [lp for lp in ly.by_material("metal") if lp.instance is not None]
        for i in range(len(metals)):
            for j in range(i + 1, len(metals)):
                a, b = metals[i], metals[j]
                if a.instance != b.instance and polys[a.label].intersects(polys[b.label]):
                    raise GeometryStructureError(
                        f"layer {ly.name}: metal {a.label} overlaps {b.label}",
                        (a.instance, b.instance))
        passed.append(f"{ly.name}: {len(ly.loops)} loops ok")
    return passed


# ---- serialisation ----------------------------------------------------------

def _loop_json(lp: Loop) -> dict:
    return {"label": lp.label, "material": lp.material, "instance": lp.instance,
            "host": lp.host, "points": [list(p) for p in lp.points]}


def emit_json(spec: GeometrySpec) -> bytes:
    """Deterministic JSON; floats are written with round-trip precision."""
    doc = {
        "format": FORMAT,
        "units": "mm",
        "params": spec.params,
        "stack": spec.stack,
        "layers": [{"name": ly.name, "z": ly.z, "loops": [_loop_json(lp) for lp in ly.loops]}
                   for ly in spec.layers],
    }
    return (json.dumps(doc, indent=1, allow_nan=False) + "\n").encode("utf-8")


def load_json(data) -> GeometrySpec:
    if isinstance(data, (str, Path)) and not str(data).lstrip().startswith("{"):
        data = Path(data).read_bytes()
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise GeometryError(f"invalid geometry JSON: {exc}") from None
    if doc.get("format") != FORMAT:
        raise GeometryError(f"unsupported geometry format {doc.get('format')!r}")
    if doc.get("units") != "mm":
        raise GeometryError(f"unsupported units {doc.get('units')!r}")
    layers = tuple(
        Layer(ly["name"], float(ly["z"]), tuple(
            Loop(lp["label"], lp["material"], tuple(tuple(p) for p in lp["points"]),
                 lp.get("instance"), lp.get("host"))
            for lp in ly["loops"]))
        for ly in doc["layers"])
    return GeometrySpec(layers, dict(doc["stack"]), dict(doc.get("params", {})))


def _path(points) -> str:
    head, *rest = points
    segs = [f"M{head[0]:.6f},{head[1]:.6f}"] + [f"L{x:.6f},{y:.6f}" for x, y in rest]
    return " ".join(segs) + " Z"


def emit_svg(spec: GeometrySpec, layer: str, margin: float = 5.0) -> bytes:
    """One layer as SVG 1.1, 1 mm per user unit, +y up.

    Each metal loop and its apertures form a single even-odd path so the
    apertures render as holes.
    """
    ly = spec.layer(layer)
    if not ly.loops:
        xmin, ymin, xmax, ymax = spec.extent()
    else:
        pts = np.array([p for lp in ly.loops for p in lp.points])
        xmin, ymin = pts.min(axis=0)
        xmax, ymax = pts.max(axis=0)
    x0, y0 = xmin - margin, ymin - margin
    w, h = xmax - xmin + 2 * margin, ymax - ymin + 2 * margin
    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w:.6f}mm" '
           f'height="{h:.6f}mm" viewBox="{x0:.6f} {-(y0 + h):.6f} {w:.6f} {h:.6f}">',
           f'<title>{ly.name} (z = {ly.z:g} mm)</title>',
           '<g transform="scale(1,-1)">']
    for lp in ly.by_material("dielectric"):
        out.append(f'<path id="{lp.label}" d="{_path(lp.points)}" fill="#f3e3a0" '
                   'fill-opacity="0.4" stroke="#b09040" stroke-width="0.1"/>')
    for lp in ly.by_material("metal"):
        holes = [a for a in ly.by_material("aperture") if a.host == lp.label]
        d = " ".join([_path(lp.points)] + [_path(a.points) for a in holes])
        out.append(f'<path id="{lp.label}" d="{d}" fill="#b87333" fill-rule="evenodd" '
                   'stroke="#000" stroke-width="0.05"/>')
    out += ["</g>", "</svg>", ""]
    return "\n".join(out).encode("utf-8")


# ---- parameter files --------------------------------------------------------

def parse_params(text) -> tuple[ElementParams, MimoParams]:
    """Read ``[element]``, ``[mimo]`` and ``[reflector]`` tables from TOML text.

    Missing keys keep their defaults; unknown keys and invalid values raise
    :class:`GeometryValidationError` naming the key.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise GeometryError(f"invalid parameter file: {exc}") from None
    for section in doc:
        if section not in ("element", "mimo", "reflector"):
            raise GeometryValidationError(section, "unknown section")

    def take(cls, table, skip=()):
        names = {f.name for f in fields(cls)} - set(skip)
        for key in table:
            if key not in names:
                raise GeometryValidationError(key, f"unknown parameter in [{cls.__name__}]")
        return table

    el = ElementParams(**take(ElementParams, doc.get("element", {})))
    refl = ReflectorOptions(**take(ReflectorOptions, doc.get("reflector", {})))
    mimo = MimoParams(**take(MimoParams, doc.get("mimo", {}), skip=("reflector",)), reflector=refl)
    return el.validate(), mimo.validate()


def load_params(path) -> tuple[ElementParams, MimoParams]:
    return parse_params(Path(path).read_text(encoding="utf-8"))
