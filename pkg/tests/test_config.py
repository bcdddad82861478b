import glob
import os

import pytest

import optioncritic
from optioncritic import config
from optioncritic.config import ConfigError

CONFIG_DIR = os.path.join(os.path.dirname(optioncritic.__file__), "configs")


def test_defaults_follow_fourrooms_setup():
    cfg = config.loads("")
    assert cfg.env == "fourrooms"
    assert cfg.agent.gamma == 0.99 and cfg.agent.temperature == 0.001
    assert cfg.env_cfg.relocation_episode == 1000


def test_sections_and_types():
    cfg = config.loads(
        "[run]\nn_runs = 3\nseed = 7  # base seed\n[agent]\nn_options = 8\nepsilon = 0.05\n"
        "[actor]\nuse_baseline = yes\nlr_term = 1e-2\n[env]\nslip = 0\n"
    )
    assert (cfg.n_runs, cfg.seed, cfg.agent.n_options) == (3, 7, 8)
    assert cfg.agent.actor.use_baseline is True and cfg.agent.actor.lr_term == 0.01
    assert cfg.env_cfg.slip == 0.0
    assert [cfg.run_agent_config(k).seed for k in range(3)] == [7, 8, 9]


@pytest.mark.parametrize(
    "text, message",
    [
        ("[agent]\nlearning_rate = 0.1\n", "line 2: unknown key 'learning_rate'"),
        ("[run]\nseed = 1\n[critic]\n", "line 3: unknown section"),
        ("seed = 1\n", "line 1: key 'seed' appears before any section"),
        ("[run]\nn_runs 3\n", "line 2: expected 'key = value'"),
        ("[agent]\nn_options = four\n", "line 2: n_options"),
        ("[actor]\nuse_baseline = maybe\n", "line 2: use_baseline"),
        ("[run]\nseed = 1\nseed = 2\n", "line 3: duplicate key"),
        ("[agent]\nseed = 1\n", "line 2: unknown key 'seed'"),
        ("[run]\nenv = atari\n", "unknown env"),
        ("[run]\nenv = mdp-file\n", "map_file"),
        ("[agent]\ngamma = 1.0\n", "gamma"),
        ("[actor]\nlr_intra = -1\n", "non-negative"),
    ],
)
def test_errors(text, message):
    with pytest.raises(ConfigError, match=message):
        config.loads(text)


def test_relative_map_file(tmp_path):
    (tmp_path / "c.cfg").write_text("[run]\nenv = mdp-file\n[env]\nmap_file = m.mdp\n")
    cfg = config.load(tmp_path / "c.cfg")
    assert cfg.env_cfg.map_file == str(tmp_path / "m.mdp")


def test_shipped_configs_parse():
    names = sorted(os.path.basename(p) for p in glob.glob(os.path.join(CONFIG_DIR, "*.cfg")))
    assert names == ["fourrooms_ac.cfg", "fourrooms_oc4.cfg", "fourrooms_oc8.cfg", "fourrooms_sarsa.cfg", "pinball.cfg"]
    for name in names:
        config.load(os.path.join(CONFIG_DIR, name))
