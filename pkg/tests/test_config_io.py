"""Tests for configuration parsing, presets and the CSV/JSON artifacts."""

import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from biphoton import states
from biphoton.config import (
    RunConfig,
    apply_preset,
    dump_config,
    load_config,
    paper_config,
    parse_config_text,
)
from biphoton.correlation import Histogram
from biphoton.errors import ValidationError
from biphoton.io import (
    dumps_report,
    read_counts_csv,
    read_histogram_csv,
    read_matrix_csv,
    read_report,
    write_counts_csv,
    write_histogram_csv,
    write_matrix_csv,
    write_report,
)
from biphoton.states import ALL_SETTINGS, MeasurementMode as M
from biphoton.tomography import TomographyInput

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


class TestConfigText:
    def test_defaults(self):
        cfg = RunConfig()
        assert cfg.analysis.bin_width_ps == 1940
        assert cfg.tomo.duration_ps == 160 * 10**12

    def test_parse(self):
        cfg = parse_config_text("""
            # comment
            mode = simulate
            tau_co_ps = 40000
            duration_ps = 1e12
            setting = P3,P4
            accidental_subtraction = no
            tomo_duration_ps = 5e11
            out_dir = /tmp/x   ; trailing comment
        """.replace("\n            ", "\n"))
        assert cfg.mode == "simulate"
        assert cfg.source.tau_co_ps == 40000.0
        assert cfg.source.duration_ps == 10**12
        assert cfg.source.setting == (M.P3, M.P4)
        assert cfg.analysis.accidental_subtraction is False
        assert cfg.tomo.duration_ps == 5 * 10**11
        assert cfg.paths.out_dir == "/tmp/x"

    def test_unknown_key(self):
        with pytest.raises(ValidationError, match="frobnicate"):
            parse_config_text("frobnicate = 1\n")

    @pytest.mark.parametrize("text", ["duration_ps = 1.5\n", "eta_s = lots\n", "= 3\n"])
    def test_bad_values(self, text):
        with pytest.raises(ValidationError):
            parse_config_text(text)

    def test_dump_round_trip(self):
        cfg = parse_config_text("state = werner:0.8\nsetting = P1,P2\nseed = 12345\n"
                                "fit_weighting = poisson\nn_starts = 3\n")
        assert parse_config_text(dump_config(cfg)) == cfg

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValidationError):
            load_config(tmp_path / "nope.cfg")

    def test_validate_missing_input(self, tmp_path):
        cfg = parse_config_text(f"mode = fit\nhistogram_path = {tmp_path}/h.csv\n")
        with pytest.raises(ValidationError, match="does not exist"):
            cfg.validate()

    def test_validate_zero_duration(self):
        with pytest.raises(ValidationError):
            parse_config_text("duration_ps = 0\n").validate()


class TestPreset:
    def test_pins(self):
        cfg = apply_preset(parse_config_text("tau_co_ps = 1\nbin_width_ps = 5\npair_rate_hz = 7\n"),
                           "paper")
        assert cfg.source.tau_co_ps == 40_000
        assert (cfg.source.eta_s, cfg.source.eta_as) == (0.040, 0.032)
        assert cfg.source.duration_ps == 160 * 10**12
        assert cfg.analysis.bin_width_ps == 1940
        # rates are assumptions, not pinned
        assert cfg.source.pair_rate_hz == 7

    def test_unknown(self):
        with pytest.raises(ValidationError):
            apply_preset(RunConfig(), "nature")

    def test_paper_config_validates(self):
        assert paper_config(3).validate().seed == 3


class TestHistogramCsv:
    def test_round_trip(self, tmp_path):
        h = Histogram(1940, -3880, np.arange(20) * 7, 12345, 6789, 160 * 10**12)
        write_histogram_csv(h, tmp_path / "h.csv")
        assert read_histogram_csv(tmp_path / "h.csv") == h
        lines = (tmp_path / "h.csv").read_text().splitlines()
        assert "tau_ps,counts,g2" in lines

    def test_without_metadata(self, tmp_path):
        (tmp_path / "h.csv").write_text("tau_ps,counts,g2\n970.0,5,\n2910.0,3,\n")
        h = read_histogram_csv(tmp_path / "h.csv")
        assert (h.bin_width_ps, h.t_min_ps, h.counts.tolist()) == (1940, 0, [5, 3])

    def test_bad_header(self, tmp_path):
        (tmp_path / "h.csv").write_text("a,b\n1,2\n")
        with pytest.raises(ValidationError):
            read_histogram_csv(tmp_path / "h.csv")

    @given(st.lists(finite, min_size=16, max_size=16))
    def test_float_round_trip(self, values):
        import tempfile
        from pathlib import Path
        m = np.array(values).reshape(4, 4)
        with tempfile.TemporaryDirectory() as d:
            write_matrix_csv(m, Path(d) / "m.csv")
            back = read_matrix_csv(Path(d) / "m.csv")
        assert np.array_equal(back, m)


class TestCountsCsv:
    def test_round_trip(self, tmp_path):
        data = TomographyInput.from_vector(range(100, 116))
        write_counts_csv(data, tmp_path / "c.csv")
        assert read_counts_csv(tmp_path / "c.csv") == data

    def test_order_insensitive(self, tmp_path):
        rows = [f"{a.value},{b.value},{i}" for i, (a, b) in enumerate(ALL_SETTINGS)][::-1]
        (tmp_path / "c.csv").write_text("mode_s,mode_as,counts\n" + "\n".join(rows) + "\n")
        assert read_counts_csv(tmp_path / "c.csv").vector().tolist() == list(range(16))

    def test_fifteen_rows(self, tmp_path):
        rows = [f"{a.value},{b.value},1" for a, b in ALL_SETTINGS if (a, b) != (M.P3, M.P1)]
        (tmp_path / "c.csv").write_text("mode_s,mode_as,counts\n" + "\n".join(rows) + "\n")
        with pytest.raises(ValidationError, match=r"\(P3,P1\)"):
            read_counts_csv(tmp_path / "c.csv")

    def test_duplicate(self, tmp_path):
        rows = [f"{a.value},{b.value},1" for a, b in ALL_SETTINGS] + ["P1,P1,2"]
        (tmp_path / "c.csv").write_text("mode_s,mode_as,counts\n" + "\n".join(rows) + "\n")
        with pytest.raises(ValidationError, match="duplicate"):
            read_counts_csv(tmp_path / "c.csv")


class TestReport:
    @given(st.dictionaries(st.text(max_size=5), finite, max_size=8))
    def test_json_round_trip(self, d):
        assert json.loads(dumps_report({"v": d})) == {"v": d}

    def test_file_round_trip(self, tmp_path):
        rho = states.werner(0.9)
        report = {"schema_version": 1, "rho_real": rho.real.tolist(), "x": 0.1 + 0.2}
        write_report(report, tmp_path / "r.json")
        back = read_report(tmp_path / "r.json")
        assert back == report
        assert np.max(np.abs(np.array(back["rho_real"]) - rho.real)) <= 1e-12

    def test_non_finite_rejected(self):
        with pytest.raises(ValidationError, match=r"report\.fit\.tau"):
            dumps_report({"fit": {"tau": float("nan")}})
