import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import random_record
from rfmimo.network import FrequencySweep, NetworkRecord
from rfmimo.pattern import directivity
from rfmimo.pattern_io import (PatternGridError, PatternSchema, format_pattern_csv,
                               parse_pattern_csv)
from rfmimo.touchstone import (FrequencyOrderError, OptionLineError, TouchstoneError,
                               TouchstoneOptions, TruncatedDataError, UnsupportedVersionError,
                               parse_touchstone, write_touchstone)


class TestParse:
    def test_one_port_example(self):
        rec = parse_touchstone(b"# GHz S MA R 50\n3.0 0.1 0.0\n")
        assert rec.nports == 1 and len(rec) == 1
        assert rec.f[0] == 3e9
        assert rec.s[0, 0, 0] == pytest.approx(0.1)
        assert rec.z_ref == 50.0

    def test_two_port_column_order(self):
        rec = parse_touchstone("# GHz S MA R 50\n3.0  .1 0  .5 90  .5 90  .2 0\n",
                               declared_ports=2)
        s = rec.s[0]
        assert s[0, 0] == pytest.approx(0.1)
        assert s[1, 0] == pytest.approx(0.5j)
        assert s[0, 1] == pytest.approx(0.5j)
        assert s[1, 1] == pytest.approx(0.2)

    def test_two_port_s21_before_s12(self):
        rec = parse_touchstone("# GHz S RI R 50\n1.0 0 0 0.3 0 0.7 0 0 0\n")
        assert rec.s[0, 1, 0] == 0.3 and rec.s[0, 0, 1] == 0.7

    def test_db_format(self):
        rec = parse_touchstone("# GHz S DB R 50\n1.0 -20 0\n")
        assert rec.s[0, 0, 0] == pytest.approx(0.1 + 0j, abs=1e-15)

    def test_defaults_without_option_line(self):
        rec = parse_touchstone("2.0 0.5 90\n")
        assert rec.f[0] == 2e9 and rec.z_ref == 50.0
        assert rec.s[0, 0, 0] == pytest.approx(0.5j)

    def test_hz_and_ghz_agree(self):
        a = parse_touchstone("# GHz S RI R 50\n1.5 0.1 0.2\n2.5 0.3 0.4\n")
        b = parse_touchstone("# Hz S RI R 50\n1.5e9 0.1 0.2\n2.5e9 0.3 0.4\n")
        assert a.equals(b)

    def test_three_port_row_major_with_wrapping(self):
        vals = np.arange(1, 10) / 10
        body = " ".join(f"{v} 0" for v in vals[:4]) + "\n" + \
            " ".join(f"{v} 0" for v in vals[4:8]) + "\n" + f"{vals[8]} 0"
        rec = parse_touchstone(f"# GHz S RI R 50\n1.0 {body}\n", declared_ports=3)
        assert np.allclose(rec.s[0].real, vals.reshape(3, 3))

    def test_comments_kept(self):
        rec = parse_touchstone("! exported by hand\n# GHz S MA R 50\n1 0.1 0 ! trailing\n")
        assert "exported by hand" in rec.metadata["comments"]
        assert "trailing" in rec.metadata["comments"]

    def test_port_count_from_filename(self):
        text = "# GHz S RI R 50\n" + "1.0 " + " ".join(["0.1 0"] * 16) + "\n"
        assert parse_touchstone(text, filename="x.s4p").nports == 4

    @pytest.mark.parametrize("text,exc,line", [
        ("# GHz S XX R 50\n1 0 0\n", OptionLineError, 1),
        ("# GHz Z MA R 50\n1 0 0\n", OptionLineError, 1),
        ("# GHz S MA R 50\n2 0.1 0\n1 0.1 0\n", FrequencyOrderError, 3),
        ("[Version] 2.0\n", UnsupportedVersionError, 1),
    ])
    def test_positioned_errors(self, text, exc, line):
        with pytest.raises(exc) as err:
            parse_touchstone(text)
        assert err.value.line == line
        assert f"line {line}" in str(err.value)

    def test_truncated_two_port(self):
        with pytest.raises(TruncatedDataError) as err:
            parse_touchstone("# GHz S MA R 50\n1 0.1 0 0.2 0 0.2 0 0.1 0\n2 0.1 0 0.2\n",
                             declared_ports=2)
        assert err.value.line == 3

    @settings(max_examples=300, deadline=None, suppress_health_check=[HealthCheck.too_slow])
    @given(st.binary(max_size=300))
    def test_parser_is_total_on_bytes(self, data):
        try:
            parse_touchstone(data)
        except TouchstoneError:
            pass

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.sampled_from(["# GHz S RI R 50", "# MHz S DB R 75", "! c", "1", "2.5",
                                     "-3", "0", "1e400", "nan", "0.1 0.2", "x", ""]),
                    max_size=12))
    def test_parser_is_total_on_token_soup(self, lines):
        try:
            parse_touchstone("\n".join(lines))
        except TouchstoneError:
            pass


class TestWrite:
    def test_one_port_round_trip_exact(self):
        rec = parse_touchstone(b"# GHz S MA R 50\n3.0 0.1 0.0\n")
        back = parse_touchstone(write_touchstone(rec))
        assert np.max(np.abs(back.s - rec.s)) < 1e-12 and np.array_equal(back.f, rec.f)

    @pytest.mark.parametrize("fmt", ["RI", "MA", "DB"])
    def test_four_port_round_trip(self, rng, fmt):
        rec = random_record(rng, 4, 201)
        data = write_touchstone(rec, TouchstoneOptions("MHz", fmt, 50.0))
        back = parse_touchstone(data, declared_ports=4)
        assert np.max(np.abs(back.s - rec.s)) < 1e-9
        assert np.max(np.abs(back.f - rec.f) / rec.f) < 1e-12

    def test_two_port_order_survives_round_trip(self, rng):
        rec = random_record(rng, 2, 10)
        back = parse_touchstone(write_touchstone(rec))
        assert np.max(np.abs(back.s - rec.s)) < 1e-12

    def test_empty_record_refused(self):
        with pytest.raises(ValueError):
            write_touchstone(NetworkRecord(FrequencySweep([]), np.zeros((0, 1, 1))))

    def test_zref_mismatch_refused(self, rng):
        with pytest.raises(ValueError):
            write_touchstone(random_record(rng, 1, 3), TouchstoneOptions(z_ref=75.0))

    def test_output_is_deterministic(self, rng):
        rec = random_record(rng, 3, 7)
        assert write_touchstone(rec) == write_touchstone(rec)


class TestPatternCsv:
    def test_isotropic_3x3(self):
        rows = ["theta_deg,phi_deg,gain_dbi"] + [f"{t},{p},0" for t in (0, 90, 180)
                                                 for p in (0, 120, 240)]
        grid = parse_pattern_csv("\n".join(rows))
        assert grid.shape == (3, 3) and np.all(grid.gain == 1.0)

    def test_missing_node_named(self):
        rows = ["theta_deg,phi_deg,gain_dbi"] + [f"{t},{p},0" for t in (0, 90, 180)
                                                 for p in (0, 180) if (t, p) != (90, 180)]
        with pytest.raises(PatternGridError) as err:
            parse_pattern_csv("\n".join(rows))
        assert err.value.node == (90.0, 180.0)
        assert "theta=90" in str(err.value) and "phi=180" in str(err.value)

    def test_duplicate_node(self):
        rows = ["theta_deg,phi_deg,gain_dbi", "0,0,0", "0,0,1", "90,0,0"]
        with pytest.raises(PatternGridError):
            parse_pattern_csv("\n".join(rows))

    def test_cos2_export_directivity(self):
        theta = np.arange(0, 91, 1.0)
        phi = np.arange(0, 360, 1.0)
        rows = ["theta_deg,phi_deg,gain_dbi"]
        for t in theta:
            g = 4 * np.cos(np.radians(t)) ** 2
            db = 10 * np.log10(g) if g > 0 else -300.0
            rows += [f"{t:g},{p:g},{float(db)!r}" for p in phi]
        grid = parse_pattern_csv("\n".join(rows))
        # peak 4 over a hemisphere-only pattern: D = 4 pi * 4 / (8 pi / 3) = 6
        assert directivity(grid).dbi == pytest.approx(10 * np.log10(6), abs=0.01)
        assert 10 * np.log10(grid.gain.max()) == pytest.approx(6.02, abs=0.01)

    @pytest.mark.parametrize("schema", list(PatternSchema))
    def test_round_trip(self, rng, schema):
        from rfmimo.pattern import FarFieldGrid
        theta, phi = np.arange(0, 181, 30.0), np.arange(0, 360, 45.0)
        shape = (theta.size, phi.size)
        if schema is PatternSchema.GAIN_DBI:
            grid = FarFieldGrid(theta, phi, gain=rng.uniform(0.1, 5, shape))
        else:
            grid = FarFieldGrid(theta, phi,
                                e_theta=rng.normal(size=shape) + 1j * rng.normal(size=shape),
                                e_phi=rng.normal(size=shape) + 1j * rng.normal(size=shape))
        back = parse_pattern_csv(format_pattern_csv(grid, schema), schema)
        if schema is PatternSchema.GAIN_DBI:
            assert np.allclose(back.gain, grid.gain, rtol=1e-12)
        else:
            assert np.allclose(back.e_theta, grid.e_theta, atol=1e-12)
            assert np.allclose(back.e_phi, grid.e_phi, atol=1e-12)
