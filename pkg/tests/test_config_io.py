import json

import numpy as np
import pytest

from ns2dlab.config import ConfigError, config_hash, load_config, parse_config
from ns2dlab.integrator import IntegratorConfig, NoiseModel, simulate
from ns2dlab.forcing import FORCING_SPANNING
from ns2dlab.io import FormatError, read_field, read_matrix, read_trajectory, write_field, write_matrix, write_trajectory
from ns2dlab.spectral import VorticityField, get_grid, random_field

BASE = {"N": 4, "nu": 0.3, "dt": 0.01, "T": 1.0, "seed": 7,
        "modes": [{"k": [1, 0], "q": 1.0}, {"k": [1, 1], "q": 0.5}]}


def cfg(**over):
    d = json.loads(json.dumps(BASE))
    d.update(over)
    return json.dumps(d)


class TestConfig:
    def test_minimal(self):
        c = parse_config(cfg())
        assert c.N == 4 and c.noise.m == 2 and c.integrator.seed == 7
        assert c.control["steps"] == 8 and c.coupling["eps"] == [1.0, 0.1, 0.01]

    def test_nested_noise_block(self):
        d = dict(BASE)
        d["noise"] = {"modes": d.pop("modes")}
        assert parse_config(json.dumps(d)).noise == parse_config(cfg()).noise

    def test_error_names_field(self):
        modes = BASE["modes"] + [{"k": [9, 0], "q": 1.0}]
        with pytest.raises(ConfigError) as e:
            parse_config(cfg(modes=modes))
        assert e.value.path == "noise.modes[2]"
        assert "outside truncation" in str(e.value)

    def test_duplicate_mode(self):
        modes = BASE["modes"] + [{"k": [1, 0], "q": 2.0}]
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config(cfg(modes=modes))

    @pytest.mark.parametrize("over,path", [
        ({"N": 0}, "N"), ({"dt": -1}, "dt"), ({"seed": 1.5}, "seed"), ({"nu": "x"}, "nu"),
        ({"scheme": "leapfrog"}, "scheme"), ({"colour": 1}, "colour"),
        ({"control": {"betas": []}}, "control.betas"), ({"control": {"betas": [1e-3, -1]}}, "control.betas[1]"),
        ({"control": {"interval": 0.015}}, "control.interval"), ({"control": {"speed": 1}}, "control.speed"),
        ({"coupling": {"eps": [0.1, 0]}}, "coupling.eps[1]"), ({"elliptic": {"cut": 1}}, "elliptic.cut"),
        ({"modes": [{"k": [0, 0], "q": 1}]}, "noise.modes[0]"), ({"modes": [{"k": [1, 0], "q": 0}]}, "noise.modes[0].q"),
    ])
    def test_field_paths(self, over, path):
        with pytest.raises(ConfigError) as e:
            parse_config(cfg(**over))
        assert e.value.path == path

    def test_bad_json(self):
        with pytest.raises(ConfigError):
            parse_config("{not json")

    def test_hash_is_canonical(self):
        a = parse_config(cfg()).hash
        d = json.loads(cfg())
        reordered = json.dumps(dict(reversed(list(d.items()))), indent=3)
        assert parse_config(reordered).hash == a and len(a) == 16
        assert parse_config(cfg(seed=8)).hash != a
        assert config_hash({}) == config_hash({})

    def test_load(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(cfg())
        assert load_config(p).T == 1.0


class TestFiles:
    def test_trajectory_round_trip(self, tmp_path):
        g = get_grid(3)
        tr = simulate(g, random_field(g, np.random.default_rng(0), 1.0), 0.2, IntegratorConfig(0.3, 0.05, seed=4),
                      NoiseModel.uniform(FORCING_SPANNING), replica=2)
        p = tmp_path / "t.bin"
        write_trajectory(p, tr, "abc")
        back, meta = read_trajectory(p)
        assert np.array_equal(back.states, tr.states) and np.array_equal(back.increments, tr.increments)
        assert back.noise == tr.noise and back.config == tr.config and back.replica == 2
        assert meta["config_hash"] == "abc"

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "t.bin"
        p.write_bytes(b"NOTATRAJ" + bytes(64))
        with pytest.raises(FormatError, match="magic"):
            read_trajectory(p)
        with pytest.raises(FormatError):
            read_matrix(p)

    def test_truncated(self, tmp_path):
        g = get_grid(2)
        tr = simulate(g, np.zeros(g.dim), 0.1, IntegratorConfig(0.3, 0.05), NoiseModel.uniform(FORCING_SPANNING))
        p = tmp_path / "t.bin"
        write_trajectory(p, tr)
        p.write_bytes(p.read_bytes()[:-8])
        with pytest.raises(FormatError, match="payload"):
            read_trajectory(p)

    @pytest.mark.parametrize("suffix", [".bin", ".csv"])
    def test_matrix_round_trip(self, tmp_path, suffix):
        M = np.random.default_rng(1).standard_normal((5, 5))
        p = tmp_path / f"m{suffix}"
        write_matrix(p, M, 0.0, 2.5, 1e-3, {"config_hash": "ff00", "seed": 3})
        back, info = read_matrix(p)
        assert np.array_equal(back, M)
        assert (info["dim"], info["s"], info["t"], info["beta"]) == (5, 0.0, 2.5, 1e-3)
        assert str(info["meta"]["config_hash"]) == "ff00"

    def test_field_round_trip(self, tmp_path):
        g = get_grid(3)
        w = VorticityField(g, random_field(g, np.random.default_rng(2), 1.0))
        p = tmp_path / "w.json"
        write_field(p, w)
        back = read_field(p)
        assert back.grid == g and np.allclose(back.x, w.x, rtol=0, atol=1e-15)
