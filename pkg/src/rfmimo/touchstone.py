"""Touchstone v1 (.sNp) reading and writing.

Only scattering parameters are handled. Two-port data follows the historical
column order S11 S21 S12 S22; three ports and up are row-major with each
matrix row starting on a fresh line and at most four value pairs per line.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .network import NetworkRecord

FREQ_UNITS = {"HZ": 1.0, "KHZ": 1e3, "MHZ": 1e6, "GHZ": 1e9}
FORMATS = ("RI", "MA", "DB")
MAX_PORTS = 32


class TouchstoneError(ValueError):
    """Base class for Touchstone parse failures; carries the 1-based line."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


class OptionLineError(TouchstoneError):
    pass


class FrequencyOrderError(TouchstoneError):
    pass


class TruncatedDataError(TouchstoneError):
    pass


class UnsupportedVersionError(TouchstoneError):
    pass


@dataclass(frozen=True)
class TouchstoneOptions:
    freq_unit: str = "GHz"
    format: str = "MA"
    z_ref: float = 50.0

    def __post_init__(self):
        unit = {k.lower(): k for k in FREQ_UNITS}.get(self.freq_unit.lower())
        if unit is None:
            raise ValueError(f"unknown frequency unit {self.freq_unit!r}")
        canonical = {"HZ": "Hz", "KHZ": "kHz", "MHZ": "MHz", "GHZ": "GHz"}[unit]
        object.__setattr__(self, "freq_unit", canonical)
        fmt = self.format.upper()
        if fmt not in FORMATS:
            raise ValueError(f"unknown data format {self.format!r}")
        object.__setattr__(self, "format", fmt)
        if not self.z_ref > 0:
            raise ValueError("reference impedance must be > 0")

    @property
    def scale(self) -> float:
        return FREQ_UNITS[self.freq_unit.upper()]


def ports_from_filename(name) -> int | None:
    m = re.search(r"\.s(\d+)p$", str(name), re.IGNORECASE)
    return int(m.group(1)) if m else None


def _parse_option_line(text: str, lineno: int) -> TouchstoneOptions:
    tokens = text[1:].split()
    unit, fmt, z = "GHz", "MA", 50.0
    k = 0
    while k < len(tokens):
        tok = tokens[k].upper()
        if tok in FREQ_UNITS:
            unit = tok
        elif tok in FORMATS:
            fmt = tok
        elif tok == "S":
            pass
        elif tok in ("Y", "Z", "H", "G"):
            raise OptionLineError(
                f"only S parameters are supported, got {tokens[k]!r}", lineno)
        elif tok == "R":
            if k + 1 >= len(tokens):
                raise OptionLineError("'R' without a resistance value", lineno)
            try:
                z = float(tokens[k + 1])
            except ValueError:
                raise OptionLineError(
                    f"bad reference resistance {tokens[k + 1]!r}", lineno) from None
            if not (np.isfinite(z) and z > 0):
                raise OptionLineError("reference resistance must be > 0", lineno)
            k += 1
        else:
            raise OptionLineError(f"unrecognised option {tokens[k]!r}", lineno)
        k += 1
    return TouchstoneOptions(unit, fmt, z)


def _to_complex(x: np.ndarray, y: np.ndarray, fmt: str) -> np.ndarray:
    if fmt == "RI":
        return x + 1j * y
    mag = x if fmt == "MA" else 10 ** (x / 20)
    return mag * np.exp(1j * np.deg2rad(y))


def _infer_ports(count: int, line_starts: set, declared: int | None,
                 first_line: int) -> int:
    if declared is not None:
        return declared
    for n in range(1, MAX_PORTS + 1):
        width = 1 + 2 * n * n
        if count % width:
            continue
        if all(k in line_starts for k in range(0, count, width)):
            return n
    raise TruncatedDataError(
        f"cannot infer a port count from {count} data values", first_line)


def parse_touchstone(data, declared_ports: int | None = None,
                     filename=None) -> NetworkRecord:
    """Parse Touchstone v1 text into a :class:`NetworkRecord`.

    Args:
        data: file contents as ``bytes`` or ``str``.
        declared_ports: port count, if known. Otherwise taken from the
            ``.sNp`` extension of ``filename`` or inferred from the layout of
            the numeric data.

    Raises:
        TouchstoneError: positioned at the offending line. Every failure mode
            of the parser surfaces as a subclass of this.
    """
    if isinstance(data, (bytes, bytearray)):
        try:
            text = bytes(data).decode("utf-8")
        except UnicodeDecodeError as exc:
            line = bytes(data)[: exc.start].count(b"\n") + 1
            raise TouchstoneError("input is not valid UTF-8 text", line) from None
    else:
        text = str(data)
    if declared_ports is None and filename is not None:
        declared_ports = ports_from_filename(filename)
    if declared_ports is not None and not 1 <= declared_ports <= MAX_PORTS:
        raise TouchstoneError(f"unsupported port count {declared_ports}")

    options = None
    comments = []
    values: list[float] = []
    value_lines: list[int] = []
    line_starts: set[int] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body, bang, comment = raw.partition("!")
        if bang:
            comments.append(comment.strip())
        body = body.strip()
        if not body:
            continue
        if body.startswith("["):
            raise UnsupportedVersionError(
                f"Touchstone v2 keyword {body.split()[0]!r} is not supported",
                lineno)
        if body.startswith("#"):
            if options is None:
                options = _parse_option_line(body, lineno)
            continue
        if options is None:
            options = TouchstoneOptions()
        line_starts.add(len(values))
        for tok in body.split():
            try:
                v = float(tok)
            except ValueError:
                raise TouchstoneError(f"non-numeric token {tok!r}", lineno) from None
            if not np.isfinite(v):
                raise TouchstoneError(f"non-finite value {tok!r}", lineno)
            values.append(v)
            value_lines.append(lineno)

    last_line = max(1, len(text.splitlines()))
    if not values:
        raise TruncatedDataError("no network data found", last_line)
    options = options or TouchstoneOptions()
    n = _infer_ports(len(values), line_starts, declared_ports,
                     value_lines[0])
    width = 1 + 2 * n * n
    if len(values) % width:
        start = len(values) - len(values) % width
        raise TruncatedDataError(
            f"incomplete {n}-port record: {len(values) % width} of {width} values",
            value_lines[start])
    for k in range(0, len(values), width):
        if k not in line_starts:
            raise TruncatedDataError(
                "frequency point does not start a new line", value_lines[k])

    table = np.array(values).reshape(-1, width)
    freqs = table[:, 0] * options.scale
    for k in range(1, len(freqs)):
        if not freqs[k] > freqs[k - 1]:
            raise FrequencyOrderError(
                "frequencies must be strictly increasing", value_lines[k * width])
    if freqs[0] <= 0:
        raise FrequencyOrderError("frequencies must be > 0", value_lines[0])

    pairs = table[:, 1:].reshape(len(freqs), n * n, 2)
    with np.errstate(over="ignore", invalid="ignore"):
        s = _to_complex(pairs[..., 0], pairs[..., 1], options.format)
    s = s.reshape(len(freqs), n, n)
    if n == 2:
        s = np.swapaxes(s, 1, 2)
    meta = {"format": "touchstone-v1"}
    if comments:
        meta["comments"] = "\n".join(comments)
    try:
        return NetworkRecord(freqs, s, options.z_ref, meta)
    except ValueError as exc:
        raise TouchstoneError(str(exc), value_lines[0]) from None


def read_touchstone(path) -> NetworkRecord:
    path = Path(path)
    return parse_touchstone(path.read_bytes(), filename=path.name)


def _fmt(x: float) -> str:
    return repr(float(x))


def _pair(v: complex, fmt: str) -> str:
    if fmt == "RI":
        a, b = v.real, v.imag
    else:
        mag = abs(v)
        if fmt == "MA":
            a = mag
        else:
            a = 20 * np.log10(mag) if mag > 0 else -999.0
        b = np.degrees(np.angle(v))
    return f"{_fmt(a)} {_fmt(b)}"


def write_touchstone(record: NetworkRecord,
                     options: TouchstoneOptions | None = None) -> bytes:
    """Serialise ``record`` as Touchstone v1 text (UTF-8 bytes).

    Numbers are written with round-trip precision. Comments stored in
    ``record.metadata["comments"]`` are emitted as ``!`` lines.
    """
    if len(record) == 0:
        raise ValueError("refusing to write a record without frequency points")
    z = record.z_ref
    if not np.all(z == z[0]):
        raise ValueError("Touchstone v1 needs one reference impedance for all ports")
    options = options or TouchstoneOptions("GHz", "RI", float(z[0]))
    if options.z_ref != z[0]:
        raise ValueError(
            f"options.z_ref {options.z_ref} differs from the record's {z[0]}; "
            "renormalisation is not performed")

    lines = []
    for c in record.metadata.get("comments", "").splitlines():
        lines.append(f"! {c}".rstrip())
    lines.append(f"# {options.freq_unit} S {options.format} R {_fmt(options.z_ref)}")
    n = record.nports
    for f, m in zip(record.f, record.s):
        freq = _fmt(f / options.scale)
        if n <= 2:
            entries = m.T.ravel() if n == 2 else m.ravel()
            lines.append(" ".join([freq] + [_pair(v, options.format) for v in entries]))
            continue
        for r in range(n):
            row = [_pair(v, options.format) for v in m[r]]
            chunks = [row[k:k + 4] for k in range(0, n, 4)]
            for c, chunk in enumerate(chunks):
                lead = [freq] if r == 0 and c == 0 else []
                lines.append(" ".join(lead + chunk))
    return ("\n".join(lines) + "\n").encode("utf-8")


def save_touchstone(record: NetworkRecord, path,
                    options: TouchstoneOptions | None = None) -> None:
    Path(path).write_bytes(write_touchstone(record, options))
