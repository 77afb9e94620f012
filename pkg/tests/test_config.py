import pytest

from ostd.config import ConfigError, ExperimentConfig, dump_config, load_config, parse_config
from ostd.environments import Capsule
from ostd.kernels import KernelFamily


class TestParse:
    def test_defaults(self):
        cfg = parse_config("")
        assert cfg == ExperimentConfig()
        assert cfg.num_features == 100 and cfg.num_trajectories == 100 and cfg.horizon == 1000
        assert [k.lengthscale for k in cfg.dictionary] == [0.1, 1.0, 10.0]
        assert cfg.gamma == 0.75 and cfg.state_dim == 10

    def test_sections(self):
        cfg = parse_config("""
[experiment]
estimator = os_gptd
horizon = 20
[model]
lengthscales = 0.5, 2
kernel_family = Laplace
single_lengthscale = 2
[environment]
kind = puddle_world
[puddle_world]
discount = 0.6
continuing = no
puddles = 0.1 0.1 0.2 0.2 0.05
""")
        assert cfg.estimator == "os_gptd" and cfg.horizon == 20
        assert cfg.single_kernel.lengthscale == 2.0
        assert cfg.single_kernel.family is KernelFamily.LAPLACE
        assert cfg.gamma == 0.6 and cfg.state_dim == 2
        assert cfg.puddle_world.continuing is False
        assert cfg.puddle_world.puddles == (Capsule((0.1, 0.1), (0.2, 0.2), 0.05),)

    def test_single_kernel_defaults_to_first_entry(self):
        assert parse_config("[model]\nlengthscales = 3, 1").single_kernel.lengthscale == 3.0

    def test_overrides(self):
        cfg = parse_config("[experiment]\nhorizon = 20", ["experiment.horizon=30", "random_walk.num_states=5"])
        assert cfg.horizon == 30 and cfg.random_walk.num_states == 5

    @pytest.mark.parametrize("text", [
        "[experiment]\nestimator = td0",
        "[experiment]\nhorizon = ten",
        "[experiment]\nbogus = 1",
        "[nowhere]\nx = 1",
        "[model]\nlengthscales =",
        "[model]\nlengthscales = 0, 1",
        "[model]\nnoise_var = -1",
        "[environment]\nkind = maze",
        "[random_walk]\nnum_states = 1",
        "[puddle_world]\npuddles = 1 2 3",
        "not an ini file",
    ])
    def test_errors(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_bad_override(self):
        with pytest.raises(ConfigError):
            parse_config("", ["horizon=3"])

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.ini")

    def test_dump_round_trip(self):
        cfg = parse_config("[model]\nsingle_lengthscale = 1\n[environment]\nkind = puddle_world")
        assert parse_config(dump_config(cfg)) == cfg
        assert parse_config(dump_config(ExperimentConfig())) == ExperimentConfig()

    def test_shipped_configs_load(self):
        from pathlib import Path
        root = Path(__file__).resolve().parents[1] / "configs"
        rw = load_config(root / "random_walk.ini")
        pw = load_config(root / "puddle_world.ini")
        assert rw.single_kernel.lengthscale == 0.1 and rw.noise_var == 0.01
        assert pw.single_kernel.lengthscale == 1.0 and pw.noise_var == 0.001 and pw.gamma == 0.7
