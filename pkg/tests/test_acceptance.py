"""Acceptance suite: nine criteria, each printed as one PASS/FAIL line.

Every criterion runs its checks, times them against its runtime budget and
reports ``criterion N: PASS|FAIL (<elapsed> s / <budget> s) <detail>``. The
lines are printed as each test finishes and collected again in the terminal
summary.
"""
import json
import time

import numpy as np

from conftest import no_reflector_dataset, random_passive
from rfmimo.circuit import (Element, Netlist, Port, ResonatorStage, build_resonator_ladder,
                            port_sparams)
from rfmimo.cli import main
from rfmimo.fitting import FitConfig, FitProblem, fit
from rfmimo.geometry import (ElementParams, MimoParams, ReflectorOptions, build_mimo, emit_json,
                             load_json, rotate90)
from rfmimo.mimo import diversity_gain, ecc_from_farfield, ecc_from_sparams, ecc_pair
from rfmimo.network import FrequencySweep, NetworkRecord, extract_bands, vswr
from rfmimo.pattern import FarFieldGrid, directivity
from rfmimo.touchstone import parse_touchstone, save_touchstone, write_touchstone

RESULTS = []


class Criterion:
    """Collects named checks for one criterion and times the block."""

    def __init__(self, number: int, budget_s: float):
        self.number = number
        self.budget = budget_s
        self.failed = []

    def check(self, name: str, ok, detail: str = ""):
        if not bool(ok):
            self.failed.append(f"{name} {detail}".strip())

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        return False

    def finish(self, capsys):
        if self.elapsed >= self.budget:
            self.failed.append(f"runtime {self.elapsed:.2f} s exceeds {self.budget:g} s")
        status = "PASS" if not self.failed else "FAIL"
        line = (f"criterion {self.number}: {status} ({self.elapsed:.2f} s / {self.budget:g} s)"
                + ("" if not self.failed else " " + "; ".join(self.failed)))
        RESULTS.append(line)
        with capsys.disabled():
            print("\n" + line)
        assert not self.failed, line


def test_criterion_1_diversity_gain(capsys):
    with Criterion(1, 1.0) as c:
        c.check("DG(0)", abs(diversity_gain(0.0) - 10.0) <= 1e-9, repr(diversity_gain(0.0)))
        # 10 log10(10 sqrt(0.75)) = 10 + 5 log10(0.75) = 9.37530...
        c.check("DG(0.5)", abs(diversity_gain(0.5) - 9.3753) <= 1e-4, repr(diversity_gain(0.5)))
        rho = np.sort(np.random.default_rng(1).uniform(0, 1, 10_000))
        dg = diversity_gain(rho)
        steps = np.diff(dg)
        gaps = np.diff(rho)
        c.check("monotone", np.all(steps <= 0) and np.all(steps[gaps > 1e-9] < 0))
    c.finish(capsys)


def test_criterion_2_ecc_sparams(capsys):
    with Criterion(2, 5.0) as c:
        rho = ecc_pair(0.1, 0.05, 0.05, 0.1)
        # |0.1*0.05 + 0.05*0.1|^2 / (1 - 0.01 - 0.0025)^2 = 1e-4 / 0.97515625
        c.check("hand case", abs(rho - 1.02548e-4) <= 1e-9, repr(rho))
        rng = np.random.default_rng(2)
        s = random_passive(rng, 4, 1000)
        sw = FrequencySweep.linspace(1e9, 2e9, 1000)
        rec = NetworkRecord(sw, s)
        phases = np.exp(1j * rng.uniform(-np.pi, np.pi, (1000, 4)))
        d = phases[:, :, None] * np.eye(4)
        rotated = NetworkRecord(sw, d @ s @ d)
        perm = np.eye(4)[[2, 0, 3, 1]]
        relabelled = NetworkRecord(sw, perm @ s @ perm.T)
        worst_phase = worst_swap = worst_relabel = 0.0
        for i in range(4):
            for j in range(i + 1, 4):
                base = ecc_from_sparams(rec, i, j).values
                worst_phase = max(worst_phase, np.max(np.abs(
                    ecc_from_sparams(rotated, i, j).values - base)))
                worst_swap = max(worst_swap, np.max(np.abs(
                    ecc_from_sparams(rec, j, i).values - base)))
                # perm maps old port k to new index where perm[new, k] == 1
                ni, nj = int(np.argmax(perm[:, i])), int(np.argmax(perm[:, j]))
                worst_relabel = max(worst_relabel, np.max(np.abs(
                    ecc_from_sparams(relabelled, ni, nj).values - base)))
        c.check("phase rotation", worst_phase <= 1e-12, f"{worst_phase:.3g}")
        c.check("port swap", worst_swap <= 1e-12, f"{worst_swap:.3g}")
        c.check("relabel", worst_relabel <= 1e-12, f"{worst_relabel:.3g}")
    c.finish(capsys)


def _z_series(*zs):
    return sum(zs)


def _z_parallel(*zs):
    return 1 / sum(1 / z for z in zs)


def test_criterion_3_circuit_oracle(capsys):
    f = np.linspace(1e9, 6e9, 201)
    w = 2 * np.pi * f
    zr = lambda r: np.full_like(w, r, dtype=complex)  # noqa: E731
    zl = lambda l: 1j * w * l  # noqa: E731
    zc = lambda cap: 1 / (1j * w * cap)  # noqa: E731
    el = Element
    cases = {
        "series RLC to ground": (
            [el("R", "R1", "n1", "a", 20.0), el("L", "L1", "a", "b", 2.2e-9),
             el("C", "C1", "b", "0", 1.1e-12)],
            _z_series(zr(20.0), zl(2.2e-9), zc(1.1e-12))),
        "parallel RLC to ground": (
            [el("R", "R1", "n1", "0", 150.0), el("L", "L1", "n1", "0", 1.5e-9),
             el("C", "C1", "n1", "0", 1.8e-12)],
            _z_parallel(zr(150.0), zl(1.5e-9), zc(1.8e-12))),
        "R + L series": (
            [el("R", "R1", "n1", "a", 35.0), el("L", "L1", "a", "0", 3.3e-9)],
            _z_series(zr(35.0), zl(3.3e-9))),
        "R parallel C": (
            [el("R", "R1", "n1", "0", 80.0), el("C", "C1", "n1", "0", 0.7e-12)],
            _z_parallel(zr(80.0), zc(0.7e-12))),
        "L + (R || C)": (
            [el("L", "L1", "n1", "a", 1.2e-9), el("R", "R1", "a", "0", 90.0),
             el("C", "C1", "a", "0", 2.0e-12)],
            _z_series(zl(1.2e-9), _z_parallel(zr(90.0), zc(2.0e-12)))),
        "C || (R + L)": (
            [el("C", "C1", "n1", "0", 0.9e-12), el("R", "R1", "n1", "a", 25.0),
             el("L", "L1", "a", "0", 4.0e-9)],
            _z_parallel(zc(0.9e-12), _z_series(zr(25.0), zl(4.0e-9)))),
    }
    with Criterion(3, 5.0) as c:
        worst = 0.0
        for name, (elements, z) in cases.items():
            s, _ = port_sparams(Netlist(elements, [Port("n1", "0", 50.0)]), f)
            ref = (z - 50) / (z + 50)
            rel = float(np.max(np.abs(s[:, 0, 0] - ref) / np.abs(ref)))
            worst = max(worst, rel)
            c.check(name, rel < 1e-9, f"rel {rel:.3g}")
        L, C = 2.2e-9, 1.1e-12
        f0 = 1 / (2 * np.pi * np.sqrt(L * C))
        s, _ = port_sparams(Netlist(cases["series RLC to ground"][0], [Port("n1", "0")]), f)
        f_min = f[np.argmin(np.abs(s[:, 0, 0]))]
        c.check("resonance", abs(f_min - f0) <= f[1] - f[0], f"{f_min:.6g} vs {f0:.6g}")
    c.finish(capsys)


def _ladder_problem(stages, f):
    net = build_resonator_ladder(stages)
    s, _ = port_sparams(net, f)
    truth = {e.label: e.value for e in net.elements}
    free = {k: (v / np.sqrt(10), v * np.sqrt(10)) for k, v in truth.items()}
    return FitProblem(net, free, NetworkRecord(FrequencySweep(f), s)), truth


def test_criterion_4_fit_recovery(capsys):
    f = np.linspace(2e9, 5e9, 201)
    with Criterion(4, 120.0) as c:
        one, truth = _ladder_problem([ResonatorStage("series-RLC-shunt", 50.0, 1e-9,
                                                     2.8145e-12)], f)
        res = fit(one, FitConfig(seed=0))
        err = max(abs(res.as_dict()[k] / v - 1) for k, v in truth.items())
        c.check("1-stage parameters", err < 0.01, f"max rel err {err:.3g}")
        c.check("1-stage residual", res.residual < 1e-10, f"{res.residual:.3g}")
        three, _ = _ladder_problem([
            ResonatorStage("series-RLC-shunt", 40.0, 1.2e-9, 2.4e-12),
            ResonatorStage("parallel-RLC-series", 200.0, 0.8e-9, 3.0e-12),
            ResonatorStage("series-RLC-shunt", 60.0, 1.5e-9, 1.2e-12),
        ], f)
        res3 = fit(three, FitConfig(seed=0))
        model = 20 * np.log10(np.abs(three.model_s11(res3.values)))
        target = 20 * np.log10(np.abs(three.target.s[:, 0, 0]))
        dev = float(np.max(np.abs(model - target)))
        c.check("3-stage |S11| curve", dev <= 0.1, f"max dev {dev:.3g} dB")
    c.finish(capsys)


def _grid(step, fn):
    theta = np.arange(0, 180 + step / 2, step)
    phi = np.arange(0, 360, step)
    t, p = np.meshgrid(np.radians(theta), np.radians(phi), indexing="ij")
    return theta, phi, t, p, fn


def _gain_grid(step, fn):
    theta, phi, t, p, _ = _grid(step, fn)
    return FarFieldGrid(theta, phi, gain=np.broadcast_to(fn(t, p), t.shape).astype(float))


def _field_grid(step, fth, fph):
    theta, phi, t, p, _ = _grid(step, fth)
    one = np.ones_like(t)
    return FarFieldGrid(theta, phi, e_theta=(fth(t, p) + 0j) * one, e_phi=(fph(t, p) + 0j) * one)


def _midpoint_oracle(step_deg, fields_i, fields_j):
    """Brute-force midpoint sum over cell centres, independent of the library weights."""
    h = np.radians(step_deg)
    t = (np.arange(int(round(np.pi / h))) + 0.5) * h
    p = (np.arange(int(round(2 * np.pi / h))) + 0.5) * h
    tt, pp = np.meshgrid(t, p, indexing="ij")
    dw = np.sin(tt) * h * h
    ai, bi = (fn(tt, pp) * np.ones_like(tt) for fn in fields_i)
    aj, bj = (fn(tt, pp) * np.ones_like(tt) for fn in fields_j)
    cross = np.sum((ai * np.conj(aj) + bi * np.conj(bj)) * dw)
    pi = np.sum((np.abs(ai) ** 2 + np.abs(bi) ** 2) * dw)
    pj = np.sum((np.abs(aj) ** 2 + np.abs(bj) ** 2) * dw)
    return float(np.abs(cross) ** 2 / (pi * pj))


def test_criterion_5_quadrature(capsys):
    zero = lambda t, p: 0 * t  # noqa: E731
    with Criterion(5, 30.0) as c:
        d_iso = directivity(_gain_grid(1.0, lambda t, p: np.ones_like(t))).dbi
        c.check("isotropic", abs(d_iso) <= 1e-6, f"{d_iso:.3g}")
        d_dip = directivity(_gain_grid(1.0, lambda t, p: np.sin(t) ** 2)).dbi
        c.check("sin^2", abs(d_dip - 1.761) <= 0.01, f"{d_dip:.5f}")
        d_cos = directivity(_gain_grid(1.0, lambda t, p: np.clip(np.cos(t), 0, None))).dbi
        c.check("cos hemisphere", abs(d_cos - 6.02) <= 0.01, f"{d_cos:.5f}")

        same = _field_grid(1.0, lambda t, p: np.sin(t) * np.exp(1j * p), lambda t, p: np.cos(t))
        r_same = ecc_from_farfield(same, same)
        c.check("identical", abs(r_same - 1) <= 1e-9, f"{r_same!r}")
        a = _field_grid(1.0, lambda t, p: np.cos(t), zero)
        b = _field_grid(1.0, zero, lambda t, p: np.cos(t))
        r_orth = ecc_from_farfield(a, b)
        c.check("orthogonal", abs(r_orth) <= 1e-12, f"{r_orth!r}")

        fi = (lambda t, p: np.cos(t), zero)
        fj = (lambda t, p: np.cos(t) * np.cos(p) ** 2,
              lambda t, p: np.cos(t) * np.sin(p) * np.cos(p))
        r_mixed = ecc_from_farfield(_field_grid(1.0, *fi), _field_grid(1.0, *fj))
        oracle = _midpoint_oracle(0.1, fi, fj)
        c.check("mixed vs oracle", abs(r_mixed - oracle) <= 1e-6,
                f"{r_mixed!r} vs {oracle!r}")
    c.finish(capsys)


def _db_record(f, db):
    return NetworkRecord(FrequencySweep(f), 10 ** (np.asarray(db) / 20))


def test_criterion_6_band_extraction(capsys):
    with Criterion(6, 1.0) as c:
        f = np.linspace(2e9, 5e9, 301)
        step = f[1] - f[0]
        x = f / 1e9
        (lo, hi), = extract_bands(_db_record(f, -20 + 10 * (x - 3.5) ** 2))
        # -20 + 10 (x - 3.5)^2 = -10  at  x = 3.5 -+ 1
        c.check("parabola", abs(lo - 2.5e9) <= step and abs(hi - 4.5e9) <= step)
        fl = np.linspace(2e9, 5e9, 601)
        stepl = fl[1] - fl[0]
        xl = fl / 1e9
        wid = 0.15
        trace = np.minimum(*[-25 / (1 + ((xl - c0) / wid) ** 2) for c0 in (2.9, 4.2)])
        bands = extract_bands(_db_record(fl, trace))
        # -25 / (1 + u^2) = -10  at  u = sqrt(1.5)
        half = wid * np.sqrt(1.5)
        ok = len(bands) == 2 and all(
            abs(b[0] - (c0 - half) * 1e9) <= stepl and abs(b[1] - (c0 + half) * 1e9) <= stepl
            for b, c0 in zip(bands, (2.9, 4.2)))
        c.check("lorentzian", ok, str(list(bands)))
        v = vswr(10 ** (-10 / 20))
        c.check("vswr", abs(v - 1.9250) <= 1e-4 and v < 2, f"{v!r}")
    c.finish(capsys)


def test_criterion_7_round_trips(capsys):
    with Criterion(7, 10.0) as c:
        rng = np.random.default_rng(7)
        worst = 0.0
        for k in range(100):
            n = [1, 2, 3, 4][k % 4]
            nf = int(rng.integers(1, 40))
            f = np.sort(rng.choice(np.arange(1, 10_000), nf, replace=False)) * 6e5
            s = random_passive(rng, n, nf)
            if n == 2:
                s[:, 0, 1] *= 0.3  # make S12 and S21 clearly distinct
            rec = NetworkRecord(FrequencySweep(f), s)
            back = parse_touchstone(write_touchstone(rec), declared_ports=n)
            worst = max(worst, float(np.max(np.abs(back.s - rec.s))),
                        float(np.max(np.abs(back.f - rec.f) / rec.f)))
        c.check("touchstone identity", worst <= 1e-9, f"{worst:.3g}")
        # 2-port data lines carry S11 S21 S12 S22
        trap = parse_touchstone("# GHz S RI R 50\n1.0 0.1 0 0.2 0 0.3 0 0.4 0\n")
        c.check("2-port order", trap.s[0, 1, 0] == 0.2 and trap.s[0, 0, 1] == 0.3)

        spec = build_mimo(MimoParams(reflector=ReflectorOptions(enabled=True)))
        again = load_json(emit_json(spec))
        diffs = [0.0]
        for ly_a, ly_b in zip(spec.layers, again.layers):
            c.check("layer", ly_a.name == ly_b.name and ly_a.z == ly_b.z, ly_a.name)
            for la, lb in zip(ly_a.loops, ly_b.loops):
                diffs.append(float(np.max(np.abs(np.subtract(la.points, lb.points)))))
        c.check("geometry JSON", max(diffs) <= 1e-12 and again == spec, f"{max(diffs):.3g}")
    c.finish(capsys)


# Dimensions as printed in the parameter tables of the element and the array.
TABLE_1 = {"H": 12.5, "T": 1.524, "P": 80.0, "K": 6.0, "Wf1": 3.575, "Wf2": 1.5317,
           "Wf3": 1.476, "lf": 49.591, "lf2": 18.21, "lf3": 0.614, "Ws": 11.712, "Ls": 17.13,
           "Rs": 4.8767, "R": 7.425, "W": 44.1467, "L": 18.0627, "a": 6.69, "b": 9.276,
           "c": 10.755, "d": 0.618, "e": 2.178, "f": 2.85, "M": 20.0, "S": 8.621, "N": 0.623}
TABLE_2 = {"H": 12.5, "K": 6.0, "T": 1.524, "L1": 166.0, "D1": 17.926, "D2": 30.97,
           "D3": 34.144, "D4": 24.68, "D5": 42.98, "D6": 42.98, "D7": 17.37, "D8": 17.37,
           "C1": 81.67, "B1": 64.82, "A1": 54.895, "g": 4.0, "P": 80.0}


def test_criterion_8_geometry_fidelity(capsys):
    with Criterion(8, 1.0) as c:
        spec = build_mimo(MimoParams(reflector=ReflectorOptions(enabled=True)), ElementParams())
        doc = json.loads(emit_json(spec))
        for table, key in ((TABLE_1, "element"), (TABLE_2, "mimo")):
            for name, value in table.items():
                got = doc["params"][key][name]
                c.check(f"{key}.{name}", got == value, f"{got!r} != {value!r}")
        refl = doc["params"]["reflector"]
        c.check("reflector params", refl["side_mm"] == 178.0 and refl["offset_mm"] == 20.0)
        layers = {ly["name"]: ly for ly in doc["layers"]}
        plate = np.array(layers["reflector"]["loops"][0]["points"])
        c.check("reflector plate", np.array_equal(np.abs(plate), np.full(plate.shape, 89.0)))
        c.check("reflector offset", layers["reflector"]["z"] == layers["feed"]["z"] - 20.0)
        ground = np.array([lp for lp in layers["ground"]["loops"]
                           if lp["label"] == "ground"][0]["points"])
        c.check("board L1", np.array_equal(np.abs(ground), np.full(ground.shape, 83.0)))
        c.check("air gap H", doc["stack"]["air_gap"] == 12.5)

        worst = 0.0
        for ly in spec.layers:
            base = [lp for lp in ly.loops if lp.instance == 0]
            for k in (1, 2, 3):
                twins = {lp.label.split("/", 1)[1]: lp for lp in ly.loops if lp.instance == k}
                for lp in base:
                    rot = np.array(sorted(rotate90(p, k) for p in lp.points))
                    twin = np.array(sorted(twins[lp.label.split("/", 1)[1]].points))
                    worst = max(worst, float(np.max(np.abs(rot - twin))))
        c.check("90 degree symmetry", worst <= 1e-9, f"{worst:.3g}")
    c.finish(capsys)


def test_criterion_9_bound_reporting(capsys, tmp_path):
    with Criterion(9, 5.0) as c:
        src = tmp_path / "no_reflector.s4p"
        save_touchstone(no_reflector_dataset(), src)
        out = tmp_path / "out"
        code = main(["metrics", str(src), "--band", "2.8:4.5", "--out-dir", str(out)])
        c.check("exit status", code == 0, str(code))
        md = (out / "band_summary.md").read_text(encoding="utf-8") if code == 0 else ""
        claim = "2.8-4.5 GHz: isolation < -35 dB, ECC < 0.0002, DG ≈ 10 dB"
        c.check("claim", claim in md, md.splitlines()[2] if md.count("\n") > 2 else md)
    c.finish(capsys)
