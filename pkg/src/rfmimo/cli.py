"""``rfmimo`` command line: metrics, fit, pattern, geom, report.

Every command writes into a staging directory inside ``--out-dir`` and only
moves files into place once all outputs were produced, so a failing run
leaves no partial result set behind. Exit status is 0 on success and 1 on
any input or validation error.
"""
from __future__ import annotations

import argparse
import csv
import io
import os
import shutil
import sys
import tempfile
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .circuit import format_netlist, parse_fit_spec
from .fitting import OBJECTIVES, FitConfig, FitProblem, fit
from .geometry import (ElementParams, GeometryError, MimoParams, add_reflector, build_element,
                       build_mimo, emit_json, emit_svg, load_json, load_params, validate_spec)
from .mimo import diversity_gain, ecc_from_sparams, isolation_db, mimo_band_summary
from .network import BandList, extract_bands, iter_pairs, to_db
from .pattern import (FarFieldGrid, back_lobe_level, directivity, efficiency_ratio, peak_gain,
                      plane_cut, polar_svg)
from .pattern_io import read_pattern_csv
from .report import (BAND_SUMMARY_HEADER, ReportRow, band_summary_markdown, band_summary_rows,
                     report_csv, report_markdown)
from .touchstone import read_touchstone

OUT_DIR_ENV = "RFMIMO_OUT_DIR"
PATTERN_SUMMARY_HEADER = ("file", "peak_gain_dbi", "peak_theta_deg", "peak_phi_deg",
                          "directivity_dbi", "efficiency_pct", "back_lobe_dbi")


class CliError(Exception):
    pass


class Stage:
    """Collects output files in a hidden directory, then moves them."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        out_dir.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(tempfile.mkdtemp(prefix=".rfmimo-stage-", dir=out_dir))
        self.files: list[str] = []

    def write(self, rel: str, data) -> None:
        path = self.tmp / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data.encode("utf-8") if isinstance(data, str) else data)
        self.files.append(rel)

    def commit(self) -> list[Path]:
        done = []
        for rel in self.files:
            dst = self.out_dir / rel
            dst.parent.mkdir(parents=True, exist_ok=True)
            os.replace(self.tmp / rel, dst)
            done.append(dst)
        shutil.rmtree(self.tmp, ignore_errors=True)
        return done

    def abort(self) -> None:
        shutil.rmtree(self.tmp, ignore_errors=True)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _parse_band(text: str) -> tuple:
    try:
        lo, hi = (float(x) * 1e9 for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"band must be LO:HI in GHz, got {text!r}") from None
    if not lo < hi:
        raise argparse.ArgumentTypeError(f"band {text!r}: need LO < HI")
    return lo, hi


def _parse_pairs(text: str, nports: int) -> list:
    pairs = []
    for item in text.split(","):
        try:
            i, j = (int(x) - 1 for x in item.split("-"))
        except ValueError:
            raise CliError(f"pair {item!r} must look like 1-2") from None
        if not (0 <= i < nports and 0 <= j < nports) or i == j:
            raise CliError(f"pair {item!r} is not a valid port pair for {nports} ports")
        pairs.append((i, j))
    return pairs


def _cell(x: float) -> str:
    return repr(float(x))


# ---- metrics ------------------------------------------------------------------

def cmd_metrics(args, stage: Stage) -> None:
    multi = len(args.inputs) > 1
    for path in args.inputs:
        try:
            rec = read_touchstone(path)
        except (ValueError, OSError) as exc:
            raise CliError(f"{path}: {exc}") from None
        prefix = f"{Path(path).stem}/" if multi else ""
        pairs = (_parse_pairs(args.pairs, rec.nports) if args.pairs
                 else list(iter_pairs(rec.nports)))
        header = ["freq_ghz"]
        cols = [rec.f / 1e9]
        for i in range(rec.nports):
            for j in range(rec.nports):
                header.append(f"s{i + 1}_{j + 1}_db")
                cols.append(to_db(rec.trace(i, j)))
        for i in range(rec.nports):
            g = np.abs(rec.trace(i, i))
            with np.errstate(divide="ignore"):
                header.append(f"vswr{i + 1}")
                cols.append(np.where(g < 1, (1 + g) / np.where(g < 1, 1 - g, 1), np.inf))
        for i, j in pairs:
            tag = f"{i + 1}_{j + 1}"
            ecc = ecc_from_sparams(rec, i, j)
            if args.ecc:
                header.append(f"ecc_{tag}")
                cols.append(ecc.values)
            if args.dg:
                header.append(f"dg_{tag}_db")
                cols.append(diversity_gain(ecc.values))
            header.append(f"iso_{tag}_db")
            cols.append(np.maximum(isolation_db(rec, i, j).trace_db,
                                   isolation_db(rec, j, i).trace_db))
            for msg in ecc.diagnostics:
                print(f"warning: {path}: {msg}", file=sys.stderr)
        table = np.column_stack([np.atleast_1d(c).astype(float) for c in cols])
        stage.write(prefix + "metrics.csv",
                    _csv_text(header, [[_cell(v) for v in row] for row in table]))

        matched = extract_bands(rec, 0, args.band_threshold_db)
        for p in range(1, rec.nports):
            matched = matched.intersect(extract_bands(rec, p, args.band_threshold_db))
        stage.write(prefix + "matched_bands.csv",
                    _csv_text(["lo_ghz", "hi_ghz"],
                              [[_cell(lo / 1e9), _cell(hi / 1e9)] for lo, hi in matched]))
        bands = BandList(args.band) if args.band else matched
        if not len(bands):
            raise CliError(f"{path}: no band is below {args.band_threshold_db} dB on all ports; "
                           "pass --band LO:HI")
        summaries = mimo_band_summary(rec, bands, pairs, args.band_threshold_db)
        stage.write(prefix + "band_summary.csv",
                    _csv_text(BAND_SUMMARY_HEADER + ("nports",),
                              [r + [str(rec.nports)] for r in band_summary_rows(summaries)]))
        if args.format == "md":
            stage.write(prefix + "band_summary.md", band_summary_markdown(summaries))


# ---- fit ----------------------------------------------------------------------

def cmd_fit(args, stage: Stage) -> None:
    try:
        template, free = parse_fit_spec(Path(args.spec).read_text(encoding="utf-8"))
    except (ValueError, OSError) as exc:
        raise CliError(f"{args.spec}: {exc}") from None
    if not free:
        raise CliError(f"{args.spec}: no FREE parameters to fit")
    try:
        target = read_touchstone(args.target)
    except (ValueError, OSError) as exc:
        raise CliError(f"{args.target}: {exc}") from None
    try:
        problem = FitProblem(template, free, target, objective=args.objective)
    except ValueError as exc:
        raise CliError(f"{args.spec}: {exc}") from None
    x0 = None
    if args.start_from_template:
        x0 = [template.element(k).value for k in problem.labels]
        for label, v in zip(problem.labels, x0):
            lo, hi = problem.free[label]
            if not lo <= v <= hi:
                raise CliError(f"{args.spec}: template value of {label} lies outside its bounds")
    config = FitConfig(multistarts=args.multistarts, max_iters=args.max_iters, xtol=args.xtol,
                       ftol=args.ftol, seed=args.seed, x0=x0)
    result = fit(problem, config)
    fitted = problem.netlist_for(result.values)
    stage.write("fitted.net", format_netlist(fitted, problem.free))
    stage.write("residuals.csv", _csv_text(
        ["iteration", "best_objective"], [[k, _cell(v)] for k, v in enumerate(result.history)]))
    model = problem.model_s11(result.values)
    stage.write("overlay.csv", _csv_text(
        ["freq_ghz", "target_db", "model_db"],
        [[_cell(f / 1e9), _cell(t), _cell(m)] for f, t, m in
         zip(target.f, to_db(target.s[:, 0, 0]), to_db(model))]))
    stage.write("fit_summary.csv", _csv_text(
        ["key", "value"],
        [["residual", _cell(result.residual)], ["iterations", result.iterations],
         ["converged", str(result.converged).lower()], ["best_start", result.best_start],
         ["evaluations", result.evaluations]]
        + [[label, _cell(v)] for label, v in zip(result.labels, result.values)]))
    print(f"residual {result.residual:.6g} after {result.iterations} iterations "
          f"({'converged' if result.converged else 'not converged'})")


# ---- pattern ------------------------------------------------------------------

def _gain_grid(grid: FarFieldGrid) -> FarFieldGrid:
    if grid.kind == "gain":
        return grid
    return FarFieldGrid(grid.theta, grid.phi, gain=10 ** (grid.gain_dbi() / 10))


def cmd_pattern(args, stage: Stage) -> None:
    actions = args.action or ["peak", "directivity", "cut"]
    rows = []
    for path in args.inputs:
        try:
            grid = _gain_grid(read_pattern_csv(path))
        except (ValueError, OSError) as exc:
            raise CliError(f"{path}: {exc}") from None
        stem = Path(path).stem
        row = {"file": Path(path).name}
        try:
            if "peak" in actions or "directivity" in actions:
                pk = peak_gain(grid)
                row.update(peak_gain_dbi=_cell(pk.dbi), peak_theta_deg=_cell(pk.theta),
                           peak_phi_deg=_cell(pk.phi))
            if "directivity" in actions:
                d = directivity(grid)
                row["directivity_dbi"] = _cell(d.dbi)
                row["efficiency_pct"] = _cell(100 * efficiency_ratio(pk.dbi, d.dbi).value)
            if "backlobe" in actions:
                row["back_lobe_dbi"] = _cell(back_lobe_level(grid))
            if "cut" in actions:
                for phi in args.phi:
                    cut = plane_cut(grid, phi, interpolate=args.interpolate)
                    name = f"cut_{stem}_phi{phi:g}"
                    stage.write(name + ".csv", cut.to_csv())
                    stage.write(name + ".svg", polar_svg(cut, title=f"{stem} phi={phi:g} deg"))
        except ValueError as exc:
            raise CliError(f"{path}: {exc}") from None
        rows.append([row.get(k, "") for k in PATTERN_SUMMARY_HEADER])
    stage.write("pattern_summary.csv", _csv_text(PATTERN_SUMMARY_HEADER, rows))
    if args.format == "md":
        lines = ["| " + " | ".join(PATTERN_SUMMARY_HEADER) + " |",
                 "|" + "---|" * len(PATTERN_SUMMARY_HEADER)]
        lines += ["| " + " | ".join(r) + " |" for r in rows]
        stage.write("pattern_summary.md", "\n".join(lines) + "\n")


# ---- geom ---------------------------------------------------------------------

def cmd_geom(args, stage: Stage) -> None:
    try:
        element, mimo = (load_params(args.params) if args.params
                         else (ElementParams(), MimoParams()))
    except (GeometryError, OSError) as exc:
        raise CliError(f"{args.params}: {exc}") from None
    actions = args.action or ["mimo"]
    single = "element" in actions and "mimo" not in actions
    try:
        spec = build_element(element) if single else build_mimo(mimo, element)
        if "reflector" in actions and "reflector" not in spec.layer_names:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                spec = add_reflector(spec, mimo.reflector.offset_mm, mimo.reflector.side_mm)
            for w in caught:
                print(f"warning: {w.message}", file=sys.stderr)
        checks = validate_spec(spec)
    except GeometryError as exc:
        raise CliError(f"{args.params or 'defaults'}: {exc}") from None
    data = emit_json(spec)
    if load_json(data) != spec:
        raise CliError("geometry JSON did not re-ingest identically")
    stage.write("geometry.json", data)
    if args.svg:
        for name in spec.layer_names:
            stage.write(f"layer_{name}.svg", emit_svg(spec, name))
    for line in checks:
        print(f"check {line}")


# ---- report -------------------------------------------------------------------

def _read_csv(path: Path) -> list[dict]:
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _design_row(d: Path) -> ReportRow:
    summary = d / "band_summary.csv"
    if not summary.is_file():
        raise CliError(f"{d}: no band_summary.csv (run 'rfmimo metrics' into it first)")
    rows = [r for r in _read_csv(summary) if r["pair"] == "all"]
    if not rows:
        raise CliError(f"{summary}: no summary rows")
    nports = int(rows[0]["nports"])
    iso = max(float(r["worst_isolation_db"]) for r in rows)
    ecc = max(float(r["max_ecc"]) for r in rows)
    bands_file = d / "matched_bands.csv"
    bands = tuple((float(r["lo_ghz"]), float(r["hi_ghz"])) for r in _read_csv(bands_file)) \
        if bands_file.is_file() else ()
    gain = eff = None
    pat = d / "pattern_summary.csv"
    if pat.is_file():
        prow = _read_csv(pat)
        g = [float(r["peak_gain_dbi"]) for r in prow if r["peak_gain_dbi"]]
        e = [float(r["efficiency_pct"]) for r in prow if r["efficiency_pct"]]
        gain = (min(g), max(g)) if g else None
        eff = (min(e), max(e)) if e else None
    elements = nports
    geom = d / "geometry.json"
    if geom.is_file():
        spec = load_json(geom.read_bytes())
        patches = [lp for lp in spec.layer("patch").by_material("metal")]
        elements = len(patches)
    return ReportRow(d.name, tuple((round(lo, 4), round(hi, 4)) for lo, hi in bands),
                     gain, iso, nports, elements, ecc, eff)


def cmd_report(args, stage: Stage) -> None:
    rows = []
    for name in args.designs:
        d = Path(name)
        if not d.is_dir():
            raise CliError(f"{d}: not a directory")
        rows.append(_design_row(d))
    stage.write("report.csv", report_csv(rows))
    if args.format == "md":
        stage.write("report.md", report_markdown(rows))


# ---- argument parsing -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default=os.environ.get(OUT_DIR_ENV, "rfmimo-out"),
                        help=f"output directory (default ${OUT_DIR_ENV} or ./rfmimo-out)")
    common.add_argument("--seed", type=int, default=0, help="seed for randomised steps")
    common.add_argument("--format", choices=("csv", "md"), default="md",
                        help="csv writes tables only; md adds Markdown summaries")

    parser = argparse.ArgumentParser(prog="rfmimo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"rfmimo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    m = sub.add_parser("metrics", parents=[common], help="per-frequency MIMO metrics")
    m.add_argument("inputs", nargs="+", help="Touchstone .sNp files")
    m.add_argument("--band-threshold-db", type=float, default=-10.0)
    m.add_argument("--band", type=_parse_band, action="append",
                   help="analysis band LO:HI in GHz (repeatable); default is the matched band")
    m.add_argument("--pairs", help="port pairs such as 1-2,1-3 (default all)")
    m.add_argument("--ecc", action=argparse.BooleanOptionalAction, default=True)
    m.add_argument("--dg", action=argparse.BooleanOptionalAction, default=True)
    m.set_defaults(func=cmd_metrics)

    f = sub.add_parser("fit", parents=[common], help="fit a lumped model to an .s1p target")
    f.add_argument("spec", help="netlist with FREE lines")
    f.add_argument("target", help="one-port Touchstone target")
    f.add_argument("--objective", choices=OBJECTIVES, default="complex-ls")
    f.add_argument("--multistarts", type=int, default=8)
    f.add_argument("--max-iters", type=int, default=2000)
    f.add_argument("--xtol", type=float, default=1e-9)
    f.add_argument("--ftol", type=float, default=1e-12)
    f.add_argument("--start-from-template", action="store_true",
                   help="use the netlist values as the first start point")
    f.set_defaults(func=cmd_fit)

    p = sub.add_parser("pattern", parents=[common], help="far-field pattern analytics")
    p.add_argument("inputs", nargs="+", help="pattern CSV files")
    p.add_argument("--action", action="append",
                   choices=("cut", "peak", "backlobe", "directivity"),
                   help="repeatable; default peak, directivity and cut")
    p.add_argument("--phi", type=float, action="append", default=None,
                   help="cut plane(s) in degrees (default 0 and 90)")
    p.add_argument("--interpolate", action="store_true",
                   help="interpolate cuts that fall between grid phi values")
    p.set_defaults(func=cmd_pattern)

    g = sub.add_parser("geom", parents=[common], help="build antenna geometry")
    g.add_argument("params", nargs="?", help="TOML parameter file (default built-in values)")
    g.add_argument("--action", action="append", choices=("element", "mimo", "reflector"))
    g.add_argument("--svg", action=argparse.BooleanOptionalAction, default=True,
                   help="write one SVG preview per layer")
    g.set_defaults(func=cmd_geom)

    r = sub.add_parser("report", parents=[common], help="comparison table across designs")
    r.add_argument("designs", nargs="+", help="design result directories")
    r.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "phi", None) is None and args.command == "pattern":
        args.phi = [0.0, 90.0]
    stage = Stage(Path(args.out_dir))
    try:
        args.func(args, stage)
        written = stage.commit()
    except (CliError, ValueError) as exc:
        stage.abort()
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        stage.abort()
        raise
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
