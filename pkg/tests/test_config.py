from pathlib import Path

import pytest

from hymlab.config import default_config, load_config, override, parse_config, to_json
from hymlab.errors import ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

TEXT = """\
# comment line
[scenario]
name = demo        # trailing comment
seed = 7

[geometry]
potential = "modulus"
potential_params = {"eps": 0.05}
base_point = [0.1, -0.1]

[spectral]
lifts = [0.3, -0.3]

[grid]
N = 32

[flow]
tol = 1e-9
scheme = lawson
t_end = none
"""


def test_parse_text_config():
    cfg = parse_config(TEXT, "demo.toml")
    sc = cfg.scenario
    assert sc.name == "demo" and sc.seed == 7 and sc.N == 32
    assert sc.potential == "modulus" and sc.potential_params == {"eps": 0.05}
    assert sc.base_point == (0.1, -0.1) and sc.lifts == (0.3, -0.3)
    assert sc.flow.tol == 1e-9 and sc.flow.scheme == "lawson" and sc.flow.t_end is None
    assert cfg.normalize["eps0"] == 1e-2 and cfg.source == "demo.toml"


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.toml")), ids=lambda p: p.name)
def test_shipped_configs_load(path):
    cfg = load_config(path)
    assert cfg.scenario.N >= 8


@pytest.mark.parametrize("text, line, needle", [
    ("[grid]\nN = 7\n", 2, "even integer"),
    ("[grid]\n\nN = 'x'\n", 3, "[grid] N"),
    ("[scenario]\nseed = -1\n", 2, "seed"),
    ("[spectral]\nlifts = [0.1, 0.2]\n", 2, "sum to zero"),
    ("[nowhere]\nx = 1\n", 1, "unknown section"),
    ("[grid]\nM = 8\n", 2, "unknown field"),
    ("[flow]\nscheme = 'euler'\n", 2, "etdrk4"),
    ("[geometry]\npotential = 'nope'\n", 2, "potential"),
    ("[grid]\nN = [1,\n", 2, "cannot parse"),
])
def test_errors_carry_line_numbers(text, line, needle):
    with pytest.raises(ConfigError) as err:
        parse_config(text, "bad.toml")
    msg = str(err.value)
    assert msg.startswith(f"bad.toml:{line}:") and needle in msg


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/config.toml")


def test_json_mirror_roundtrip():
    cfg = parse_config(TEXT, "demo.toml")
    again = parse_config(to_json(cfg), "demo.json")
    assert again.scenario == cfg.scenario
    assert (again.normalize, again.poincare, again.check) == (cfg.normalize, cfg.poincare, cfg.check)
    with pytest.raises(ConfigError):
        parse_config("{ not json", "x.json")
    with pytest.raises(ConfigError):
        to_json(load_config(CONFIGS / "rank2.toml"))


def test_overrides():
    cfg = default_config()
    new = override(cfg, seed=3, grid=16, out="elsewhere")
    assert (new.scenario.seed, new.scenario.N, new.scenario.out) == (3, 16, "elsewhere")
    assert cfg.scenario.seed == 0
    assert override(cfg) is cfg
