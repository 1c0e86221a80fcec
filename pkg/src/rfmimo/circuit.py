"""Lumped R/L/C netlists solved in the frequency domain by nodal analysis.

Ports are modelled as Norton sources: each port's reference impedance is
stamped as a conductance and port ``k`` is driven by the current equivalent
of a ``2 sqrt(z0_k)`` volt source, which makes the incident wave at that port
exactly one. The scattering column then falls out of the port voltages.

Text netlist format, one statement per line, ``#`` starts a comment::

    R <label> <node_a> <node_b> <value><unit>
    L <label> <node_a> <node_b> <value><unit>
    C <label> <node_a> <node_b> <value><unit>
    PORT <n> <node_plus> <node_minus> <z0>
    GND <node>
    FREE <label> <lo><unit> <hi><unit>      (fit specifications only)

Values accept SI prefixes and unit suffixes, e.g. ``2.8145pF``, ``1nH``,
``50``, ``4.7kohm``; they are stored in SI.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .network import NetworkRecord, as_sweep

COND_WARN = 1e12
MAX_LADDER_STAGES = 12

_PREFIX = {"f": 1e-15, "p": 1e-12, "n": 1e-9, "u": 1e-6, "µ": 1e-6,
           "m": 1e-3, "": 1.0, "k": 1e3, "meg": 1e6, "M": 1e6, "G": 1e9}
_UNITS = {"R": ("ohm", "Ohm", "Ω", "ohms"), "L": ("H",), "C": ("F",)}
_NUMBER = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(.*?)\s*$")


class NetlistError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class SingularCircuitError(ValueError):
    def __init__(self, message: str, frequency: float | None = None):
        self.frequency = frequency
        super().__init__(message)


def parse_value(text, kind: str | None = None) -> float:
    """Parse ``"2.8145pF"``-style values into SI floats.

    ``kind`` (R, L or C) restricts which unit suffix is acceptable.
    """
    if isinstance(text, (int, float)):
        return float(text)
    m = _NUMBER.match(str(text))
    if not m:
        raise ValueError(f"cannot parse value {text!r}")
    number, rest = float(m.group(1)), m.group(2)
    suffixes = _UNITS.get(kind, ()) if kind else sum(_UNITS.values(), ())
    for unit in sorted(suffixes, key=len, reverse=True):
        if rest.endswith(unit) and rest[: -len(unit)] in _PREFIX:
            rest = rest[: -len(unit)]
            break
    if rest not in _PREFIX:
        raise ValueError(f"unknown unit or prefix in {text!r}")
    return number * _PREFIX[rest]


@dataclass(frozen=True)
class Element:
    kind: str
    label: str
    node_a: str
    node_b: str
    value: float

    def __post_init__(self):
        if self.kind not in ("R", "L", "C"):
            raise NetlistError(f"{self.label}: element kind must be R, L or C")
        value = parse_value(self.value, self.kind)
        if not (np.isfinite(value) and value > 0):
            raise NetlistError(f"{self.label}: value must be positive and finite")
        if self.node_a == self.node_b:
            raise NetlistError(f"{self.label}: both terminals on node {self.node_a!r}")
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "node_a", str(self.node_a))
        object.__setattr__(self, "node_b", str(self.node_b))

    def admittance(self, omega):
        if self.kind == "R":
            return np.full_like(omega, 1 / self.value, dtype=complex)
        if self.kind == "C":
            return 1j * omega * self.value
        return 1 / (1j * omega * self.value)


@dataclass(frozen=True)
class Port:
    node_plus: str
    node_minus: str
    z0: float = 50.0

    def __post_init__(self):
        if not (np.isfinite(self.z0) and self.z0 > 0):
            raise NetlistError("port impedance must be positive")
        if self.node_plus == self.node_minus:
            raise NetlistError("port terminals must be distinct nodes")
        object.__setattr__(self, "node_plus", str(self.node_plus))
        object.__setattr__(self, "node_minus", str(self.node_minus))


@dataclass(frozen=True)
class Netlist:
    elements: tuple
    ports: tuple
    ground: str = "0"

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        object.__setattr__(self, "ports", tuple(self.ports))
        object.__setattr__(self, "ground", str(self.ground))
        if not self.ports:
            raise NetlistError("netlist needs at least one port")
        labels = [e.label for e in self.elements]
        dupes = {x for x in labels if labels.count(x) > 1}
        if dupes:
            raise NetlistError(f"duplicate element labels: {sorted(dupes)}")
        self._check_connectivity()

    @property
    def nodes(self) -> list[str]:
        """Non-ground nodes in order of first appearance."""
        seen = []
        for a, b in self._edges():
            for n in (a, b):
                if n != self.ground and n not in seen:
                    seen.append(n)
        return seen

    def _edges(self):
        for e in self.elements:
            yield e.node_a, e.node_b
        for p in self.ports:
            yield p.node_plus, p.node_minus

    def _check_connectivity(self):
        parent = {}

        def find(x):
            parent.setdefault(x, x)
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b in self._edges():
            parent[find(a)] = find(b)
        root = find(self.ground)
        floating = [n for n in self.nodes if find(n) != root]
        if floating:
            raise NetlistError(f"nodes without a path to ground: {floating}")

    def element(self, label: str) -> Element:
        for e in self.elements:
            if e.label == label:
                return e
        raise KeyError(label)

    def with_values(self, values: Mapping[str, float]) -> "Netlist":
        unknown = set(values) - {e.label for e in self.elements}
        if unknown:
            raise KeyError(f"unknown element labels: {sorted(unknown)}")
        elements = [replace(e, value=values[e.label]) if e.label in values else e
                    for e in self.elements]
        return Netlist(elements, self.ports, self.ground)

    def scaled(self, alpha: float, kinds: Iterable[str] = ("L", "C")) -> "Netlist":
        kinds = set(kinds)
        return Netlist([replace(e, value=e.value * alpha) if e.kind in kinds else e
                        for e in self.elements], self.ports, self.ground)


@dataclass(frozen=True, eq=False)
class MnaSystem:
    """Nodal admittance matrix (ground eliminated) plus port incidence.

    ``y`` holds only element stamps; port terminations are added at solve
    time. ``incidence[:, k]`` is +1 at port k's plus node and -1 at its
    minus node.
    """

    nodes: list
    y: np.ndarray
    incidence: np.ndarray
    z0: np.ndarray


def _index(netlist: Netlist):
    nodes = netlist.nodes
    idx = {n: k for k, n in enumerate(nodes)}
    idx[netlist.ground] = -1
    inc = np.zeros((len(nodes), len(netlist.ports)))
    for k, p in enumerate(netlist.ports):
        if idx[p.node_plus] >= 0:
            inc[idx[p.node_plus], k] += 1
        if idx[p.node_minus] >= 0:
            inc[idx[p.node_minus], k] -= 1
    return nodes, idx, inc


def _check_freqs(netlist: Netlist, freqs: np.ndarray):
    if np.any(freqs < 0) or not np.all(np.isfinite(freqs)):
        raise ValueError("frequencies must be finite and nonnegative")
    if np.any(freqs == 0) and any(e.kind in "LC" for e in netlist.elements):
        raise SingularCircuitError(
            "DC (f = 0) is not supported for networks with L or C elements", 0.0)


def _admittance_stack(netlist: Netlist, freqs: np.ndarray, idx, n: int) -> np.ndarray:
    omega = 2 * np.pi * freqs
    y = np.zeros((freqs.size, n, n), dtype=complex)
    for e in netlist.elements:
        ye = e.admittance(omega)
        a, b = idx[e.node_a], idx[e.node_b]
        if a >= 0:
            y[:, a, a] += ye
        if b >= 0:
            y[:, b, b] += ye
        if a >= 0 and b >= 0:
            y[:, a, b] -= ye
            y[:, b, a] -= ye
    return y


def stamp_mna(netlist: Netlist, freq: float) -> MnaSystem:
    """Element admittance stamps at one frequency: R -> 1/R, C -> jwC, L -> 1/(jwL)."""
    freqs = np.array([float(freq)])
    _check_freqs(netlist, freqs)
    nodes, idx, inc = _index(netlist)
    y = _admittance_stack(netlist, freqs, idx, len(nodes))[0]
    return MnaSystem(nodes, y, inc, np.array([p.z0 for p in netlist.ports]))


@dataclass(frozen=True, eq=False)
class SweepSolveResult:
    record: NetworkRecord
    condition: np.ndarray
    warnings: tuple = field(default_factory=tuple)


def port_sparams(netlist: Netlist, freqs, check_condition: bool = True):
    """Scattering matrices ``(F, P, P)`` and optional condition numbers."""
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    _check_freqs(netlist, freqs)
    nodes, idx, inc = _index(netlist)
    z0 = np.array([p.z0 for p in netlist.ports])
    y = _admittance_stack(netlist, freqs, idx, len(nodes))
    y += (inc / z0) @ inc.T
    rhs = inc * (2 / np.sqrt(z0))
    cond = np.linalg.cond(y) if check_condition else None
    try:
        with np.errstate(all="ignore"):
            v = np.linalg.solve(y, np.broadcast_to(rhs, (freqs.size,) + rhs.shape))
        bad = ~np.all(np.isfinite(v), axis=(1, 2))
    except np.linalg.LinAlgError:
        bad = np.array([_singular(m) for m in y])
    if np.any(bad):
        f_bad = freqs[np.argmax(bad)]
        raise SingularCircuitError(f"nodal matrix is singular at f = {f_bad:.9g} Hz", f_bad)
    vp = np.swapaxes(inc, 0, 1) @ v
    s = vp / np.sqrt(z0)[:, None] - np.eye(len(z0))
    return s, cond


def _singular(m: np.ndarray) -> bool:
    try:
        np.linalg.solve(m, np.eye(m.shape[0]))
    except np.linalg.LinAlgError:
        return True
    return False


def solve_sparams(netlist: Netlist, sweep) -> SweepSolveResult:
    """Port S-parameters of ``netlist`` over ``sweep``.

    Raises:
        SingularCircuitError: naming the first frequency where the nodal
            system cannot be solved.
    """
    sweep = as_sweep(sweep)
    s, cond = port_sparams(netlist, sweep.points)
    warns = tuple(f"f={f:.9g} Hz: nodal matrix condition {c:.3g} exceeds {COND_WARN:g}"
                  for f, c in zip(sweep.points, cond) if c > COND_WARN)
    record = NetworkRecord(sweep, s, [p.z0 for p in netlist.ports],
                           {"source": "nodal-analysis"})
    return SweepSolveResult(record, cond, warns)


#
# Ladder construction
#

TOPOLOGIES = ("series-RLC-shunt", "parallel-RLC-series")


@dataclass(frozen=True)
class ResonatorStage:
    """One resonator; R in ohms, L in henries, C in farads (or unit strings)."""

    topology: str
    R: float
    L: float
    C: float

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise NetlistError(f"unknown resonator topology {self.topology!r}")
        for name, kind in (("R", "R"), ("L", "L"), ("C", "C")):
            object.__setattr__(self, name, parse_value(getattr(self, name), kind))


def build_resonator_ladder(stages: Sequence, z0: float = 50.0) -> Netlist:
    """One-port ladder built from resonators in the given order.

    ``series-RLC-shunt`` hangs a series RLC branch from the current node to
    ground. ``parallel-RLC-series`` inserts a parallel RLC tank in the
    signal path and moves the current node past it; when it is the last
    stage its far end is returned to ground so the tank terminates the
    ladder instead of dangling open.
    """
    stages = [s if isinstance(s, ResonatorStage) else ResonatorStage(**s) for s in stages]
    if not stages:
        raise NetlistError("ladder needs at least one resonator stage")
    if len(stages) > MAX_LADDER_STAGES:
        raise NetlistError(f"ladder supports at most {MAX_LADDER_STAGES} stages")
    gnd = "0"
    node = "n1"
    elements = []
    for k, st in enumerate(stages, start=1):
        last = k == len(stages)
        if st.topology == "series-RLC-shunt":
            elements += [
                Element("R", f"R{k}", node, f"s{k}a", st.R),
                Element("L", f"L{k}", f"s{k}a", f"s{k}b", st.L),
                Element("C", f"C{k}", f"s{k}b", gnd, st.C),
            ]
        else:
            far = gnd if last else f"n{k + 1}"
            elements += [
                Element("R", f"R{k}", node, far, st.R),
                Element("L", f"L{k}", node, far, st.L),
                Element("C", f"C{k}", node, far, st.C),
            ]
            node = far
    return Netlist(elements, [Port("n1", gnd, z0)], gnd)


#
# Text format
#

def _split_value(tokens: list[str], lineno: int, kind: str | None) -> float:
    try:
        return parse_value("".join(tokens), kind)
    except ValueError as exc:
        raise NetlistError(str(exc), lineno) from None


def parse_fit_spec(text: str) -> tuple[Netlist, dict]:
    """Parse netlist text with optional ``FREE`` lines.

    Returns the netlist and ``{label: (lo, hi)}`` in SI units.
    """
    elements, ports, free = [], {}, {}
    ground = "0"
    for lineno, raw in enumerate(str(text).splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        head = tok[0].upper()
        if head in ("R", "L", "C"):
            if len(tok) < 5:
                raise NetlistError(f"{head} needs label, two nodes and a value", lineno)
            try:
                elements.append(Element(head, tok[1], tok[2], tok[3],
                                        _split_value(tok[4:], lineno, head)))
            except NetlistError as exc:
                raise NetlistError(str(exc), lineno) from None
        elif head == "PORT":
            if len(tok) not in (4, 5):
                raise NetlistError("PORT needs <n> <node+> <node-> [z0]", lineno)
            try:
                n = int(tok[1])
            except ValueError:
                raise NetlistError(f"bad port number {tok[1]!r}", lineno) from None
            if n in ports:
                raise NetlistError(f"port {n} defined twice", lineno)
            z0 = _split_value(tok[4:], lineno, "R") if len(tok) == 5 else 50.0
            try:
                ports[n] = Port(tok[2], tok[3], z0)
            except NetlistError as exc:
                raise NetlistError(str(exc), lineno) from None
        elif head == "GND":
            if len(tok) != 2:
                raise NetlistError("GND needs exactly one node", lineno)
            ground = tok[1]
        elif head == "FREE":
            if len(tok) != 4:
                raise NetlistError("FREE needs <label> <lo> <hi>", lineno)
            lo = _split_value([tok[2]], lineno, None)
            hi = _split_value([tok[3]], lineno, None)
            if not 0 < lo < hi:
                raise NetlistError(f"FREE {tok[1]}: need 0 < lo < hi", lineno)
            free[tok[1]] = (lo, hi)
        else:
            raise NetlistError(f"unknown statement {tok[0]!r}", lineno)
    if sorted(ports) != list(range(1, len(ports) + 1)):
        raise NetlistError(f"ports must be numbered 1..N, got {sorted(ports)}")
    netlist = Netlist(elements, [ports[k] for k in sorted(ports)], ground)
    labels = {e.label for e in netlist.elements}
    missing = sorted(set(free) - labels)
    if missing:
        raise NetlistError(f"FREE refers to unknown elements: {missing}")
    return netlist, free


def parse_netlist(text: str) -> Netlist:
    netlist, free = parse_fit_spec(text)
    if free:
        raise NetlistError("FREE statements are only valid in fit specifications")
    return netlist


def _format_value(e: Element) -> str:
    if e.kind == "L":
        return f"{e.value * 1e9:.12g}nH"
    if e.kind == "C":
        return f"{e.value * 1e12:.12g}pF"
    return f"{e.value:.12g}"


def format_netlist(netlist: Netlist, free: Mapping[str, tuple] | None = None) -> str:
    """Netlist text; values in nH / pF / ohm with 12 significant digits."""
    lines = []
    if netlist.ground != "0":
        lines.append(f"GND {netlist.ground}")
    for e in netlist.elements:
        lines.append(f"{e.kind} {e.label} {e.node_a} {e.node_b} {_format_value(e)}")
    for k, p in enumerate(netlist.ports, start=1):
        lines.append(f"PORT {k} {p.node_plus} {p.node_minus} {p.z0:.12g}")
    for label, (lo, hi) in (free or {}).items():
        lines.append(f"FREE {label} {lo:.12g} {hi:.12g}")
    return "\n".join(lines) + "\n"
