import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from flowobs.battery import LinearCrossover, NoCrossover, ParametricCrossover
from flowobs.errors import ConfigError, IngestionError
from flowobs.harness import config, csvio
from flowobs.harness.cli import main
from flowobs.harness.noise import SplitMix64, uniform_noise
from flowobs.observer import MeasurementSample

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SHORT = (CONFIGS / "nominal.toml").read_text().replace("horizon = 1600.0", "horizon = 30.0")


@pytest.fixture
def short_cfg(tmp_path):
    p = tmp_path / "short.toml"
    p.write_text(SHORT)
    return p


@pytest.fixture(scope="module")
def gain_file(tmp_path_factory):
    out = tmp_path_factory.mktemp("syn")
    assert main(["synthesize", "--config", str(CONFIGS / "nominal.toml"), "--out", str(out)]) == 0
    return out / "gain.txt"


class TestConfig:
    def test_shipped_configs_load(self):
        nominal = config.load(CONFIGS / "nominal.toml")
        assert isinstance(nominal.crossover_truth, LinearCrossover)
        assert nominal.sample_period == 0.1 and nominal.horizon == 1600.0
        assert config.load(CONFIGS / "nominal_noisy.toml").noise_mv == 1.0
        assert isinstance(config.load(CONFIGS / "no_crossover.toml").crossover_truth,
                          NoCrossover)

    def test_defaults(self):
        cfg = config.loads("")
        assert cfg.sample_period == 1.0 and cfg.horizon == 1600.0
        assert cfg.synthesis.q_max == pytest.approx(18e-3)
        np.testing.assert_array_equal(cfg.x_hat0.as_array(), [0.87, 0.85, 0, 0, 0])

    def test_parametric_truth(self):
        cfg = config.loads('[truth]\ncrossover = "parametric"\nomega0 = [1e-9, 0.0, 0.0]\n')
        assert isinstance(cfg.crossover_truth, ParametricCrossover)

    @pytest.mark.parametrize("text, match", [
        ("[batery]\nv_res = 1.0\n", "unknown section"),
        ("[battery]\nvres = 1.0\n", "unknown key battery.vres"),
        ("[battery]\nv_res = -1.0\n", r"\[battery\]"),
        ("[battery]\nv_res = \"a\"\n", "must be numeric"),
        ("[truth]\ncrossover = \"quadratic\"\n", "none, linear or parametric"),
        ("[truth]\ncrossover = \"none\"\nk_mt = 1.0\n", "k_mt only"),
        ("[observer]\norder_l = 2\n", r"\[observer\]"),
        ("[observer]\nx_hat0 = [0.5, 0.5]\n", "x_hat0 needs 5"),
        ("[experiment]\nsample_period = 0.015\n", "multiple of sim_dt"),
        ("[experiment]\nseed = 1.5\n", "integer"),
        ("[synthesis]\nq_min = 0.05\n", r"\[synthesis\]"),
    ])
    def test_rejects(self, text, match):
        with pytest.raises(ConfigError, match=match):
            config.loads(text)

    def test_parse_error_location(self, tmp_path):
        p = tmp_path / "bad.toml"
        p.write_text("[battery]\nv_res = \n")
        with pytest.raises(ConfigError, match=r"bad\.toml.*line 2"):
            config.load(p)


class TestNoise:
    def test_reference_outputs(self):
        g = SplitMix64(0)
        assert [g.next_u64() for _ in range(3)] == [
            0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]

    def test_uniform_range_and_mean(self):
        n = uniform_noise(20000, 1e-3, seed=5)
        assert n.min() >= -1e-3 and n.max() < 1e-3
        assert abs(n.mean()) < 3e-5

    def test_seeded(self):
        assert uniform_noise(10, 1.0, 3).tobytes() == uniform_noise(10, 1.0, 3).tobytes()
        assert uniform_noise(10, 1.0, 3).tobytes() != uniform_noise(10, 1.0, 4).tobytes()


class TestCsv:
    def test_measurement_round_trip(self, tmp_path):
        samples = [MeasurementSample(0.1 * i, 2.2 + 1e-17 * i, 0.1, 9e-3) for i in range(5)]
        back = csvio.read_measurements(csvio.write_measurements(tmp_path / "m.csv", samples))
        assert back == samples

    @pytest.mark.parametrize("body, match", [
        ("", "empty"),
        ("time_min,v_out_V,current_A\n0,2.2,0\n", "flow_L_per_min"),
        ("time_min,v_out_V,current_A,flow_L_per_min\n", "no data rows"),
        ("time_min,v_out_V,current_A,flow_L_per_min\n0,2.2,0\n", "row 1 has 3 fields"),
        ("time_min,v_out_V,current_A,flow_L_per_min\n0,abc,0,0.009\n", "v_out_V"),
        ("time_min,v_out_V,current_A,flow_L_per_min\n0,nan,0,0.009\n", "non-finite"),
        ("time_min,v_out_V,current_A,flow_L_per_min\n1,2.2,0,0.009\n0,2.2,0,0.009\n",
         "not increasing"),
        ("time_min,v_out_V,current_A,flow_L_per_min\n0,2.2,0,-1\n1,2.2,0,0.009\n", "row 1"),
    ])
    def test_rejects(self, tmp_path, body, match):
        p = tmp_path / "m.csv"
        p.write_text(body)
        with pytest.raises(IngestionError, match=match):
            csvio.read_measurements(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IngestionError):
            csvio.read_measurements(tmp_path / "absent.csv")


class TestCli:
    def test_synthesize_outputs(self, gain_file):
        text = (gain_file.parent / "certificates.txt").read_text()
        assert "PASS" in text or "pass" in text

    def test_verify(self, gain_file, capsys):
        assert main(["verify", "--config", str(CONFIGS / "nominal.toml"),
                     "--gain", str(gain_file)]) == 0

    def test_verify_needs_gain(self):
        assert main(["verify", "--config", str(CONFIGS / "nominal.toml")]) == 2

    def test_corrupted_gain_fails(self, gain_file, tmp_path):
        lines = gain_file.read_text().splitlines()
        i = next(k for k, ln in enumerate(lines) if ln.startswith("matrix p_mat"))
        row = lines[i + 1].split()
        row[0] = repr(-float(row[0]))
        lines[i + 1] = " ".join(row)
        bad = tmp_path / "bad_gain.txt"
        bad.write_text("\n".join(lines) + "\n")
        assert main(["verify", "--config", str(CONFIGS / "nominal.toml"),
                     "--gain", str(bad)]) == 1

    def test_dimension_mismatch(self, gain_file, tmp_path):
        p = tmp_path / "l2.toml"
        p.write_text("[observer]\norder_l = 2\nlam = [0.5]\n")
        assert main(["verify", "--config", str(p), "--gain", str(gain_file)]) == 2

    def test_bad_config(self, tmp_path):
        p = tmp_path / "x.toml"
        p.write_text("[nope]\n")
        assert main(["synthesize", "--config", str(p), "--out", str(tmp_path)]) == 2

    def test_infeasible_program(self, tmp_path):
        p = tmp_path / "inf.toml"
        p.write_text("[synthesis]\nfeas_margin = 10.0\nbox_radius = 1.0\n")
        assert main(["synthesize", "--config", str(p), "--out", str(tmp_path)]) == 1

    def test_twin_artifacts_and_observe_replay(self, short_cfg, gain_file, tmp_path):
        out = tmp_path / "twin"
        assert main(["twin", "--config", str(short_cfg), "--out", str(out),
                     "--gain", str(gain_file)]) == 0
        for name in ("truth.csv", "measurements.csv", "trace.csv", "summary.txt",
                     "certificates.txt", "states.svg", "voltage.svg"):
            assert (out / name).is_file(), name
        obs = tmp_path / "obs"
        assert main(["observe", str(out / "measurements.csv"), "--config", str(short_cfg),
                     "--out", str(obs), "--gain", str(gain_file), "--no-plots"]) == 0
        assert (obs / "trace.csv").read_bytes() == (out / "trace.csv").read_bytes()
        assert not (obs / "states.svg").exists()

    def test_twin_deterministic(self, short_cfg, gain_file, tmp_path):
        runs = []
        for k in range(2):
            out = tmp_path / f"r{k}"
            noisy = short_cfg.read_text().replace("noise_mv = 0.0", "noise_mv = 1.0")
            cfg = tmp_path / "noisy.toml"
            cfg.write_text(noisy)
            assert main(["twin", "--config", str(cfg), "--out", str(out),
                         "--gain", str(gain_file)]) == 0
            runs.append(out)
        for name in ("truth.csv", "measurements.csv", "trace.csv", "summary.txt",
                     "states.svg", "voltage.svg"):
            assert (runs[0] / name).read_bytes() == (runs[1] / name).read_bytes(), name

    def test_seed_override(self, short_cfg, gain_file, tmp_path):
        noisy = tmp_path / "noisy.toml"
        noisy.write_text(short_cfg.read_text().replace("noise_mv = 0.0", "noise_mv = 1.0"))
        for seed in (1, 2):
            assert main(["twin", "--config", str(noisy), "--out", str(tmp_path / str(seed)),
                         "--gain", str(gain_file), "--seed", str(seed), "--no-plots"]) == 0
        a = (tmp_path / "1" / "measurements.csv").read_bytes()
        assert a != (tmp_path / "2" / "measurements.csv").read_bytes()

    def test_observe_bad_csv(self, short_cfg, gain_file, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("time_min,v_out_V\n0,2.2\n")
        assert main(["observe", str(p), "--config", str(short_cfg), "--out",
                     str(tmp_path / "o"), "--gain", str(gain_file)]) == 3

    def test_no_crossover_twin(self, gain_file, tmp_path):
        cfg = tmp_path / "none.toml"
        cfg.write_text((CONFIGS / "no_crossover.toml").read_text()
                       .replace("horizon = 1600.0", "horizon = 500.0"))
        out = tmp_path / "none"
        assert main(["twin", "--config", str(cfg), "--out", str(out), "--gain",
                     str(gain_file), "--no-plots"]) == 0
        tab = csvio.read_table(out / "trace.csv")
        q = tab["time_min"] >= 375.0
        # well under 1% of the flux the nominal mass-transfer law would produce
        assert abs(tab["crossover_hat_mol_per_min"][q].mean()) < 1e-2 * 5.6142e-8 * 0.1

    def test_sweep(self, short_cfg, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("[nope]\n")
        out = tmp_path / "sweep"
        code = main(["sweep", "--config", str(short_cfg), "--config", str(bad),
                     "--out", str(out), "--no-plots"])
        assert code == 2
        assert (out / "000_short" / "trace.csv").is_file()
        assert not (out / "001_bad").exists() or not (out / "001_bad" / "trace.csv").exists()

    @pytest.mark.skipif(shutil.which("flowobs") is None, reason="console script not installed")
    def test_console_script(self):
        res = subprocess.run(["flowobs", "--help"], capture_output=True, text=True)
        assert res.returncode == 0 and "synthesize" in res.stdout

    def test_module_entry(self):
        res = subprocess.run([sys.executable, "-m", "flowobs.harness.cli", "twin", "--help"],
                             capture_output=True, text=True)
        assert res.returncode == 0 and "--seed" in res.stdout
