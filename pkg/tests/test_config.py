from pathlib import Path

import pytest

from devsurf.config import RunConfig, load_config, parse_config
from devsurf.errors import ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_bundled_configs_parse():
    dev = load_config(CONFIGS / "develop_cylinder.cfg").validate()
    assert dev.mode == "develop" and dev.samples == (30, 60) and dev.weights.w_d == 100
    pan = load_config(CONFIGS / "panelize_torus.cfg").validate()
    assert [str(s) for s in pan.specs()] == ["cylinder"] * 5


def test_round_trip_through_dumps():
    text = """
    mode = panelize
    scenario = torus-sector   # comment
    panels = 2 x 2
    [weights]
    w_d = 50
    [solver]
    max_iterations = 7
    [panels]
    default = free
    panel 3 = cone:25
    """
    cfg = parse_config(text).validate()
    assert cfg.panels == (2, 2) and cfg.weights.w_d == 50 and cfg.solver.max_iterations == 7
    assert [str(s) for s in cfg.specs()] == ["free", "free", "free", "cone:25"]
    again = parse_config(cfg.dumps()).validate()
    assert again.dumps() == cfg.dumps()


def test_mode_argument_wins():
    assert parse_config("mode = fit\nscenario = cone\n", mode="analyze").mode == "analyze"


@pytest.mark.parametrize("text, key", [
    ("bogus = 1\n", "bogus"),
    ("samples = 3\n", "samples"),
    ("[weights]\nw_q = 1\n", "weights.w_q"),
    ("[weights]\nw_d = -1\n", "weights"),
    ("[solver]\nmax_iterations = many\n", "solver.max_iterations"),
    ("[extras]\n", "[extras]"),
    ("[panels]\npanel 1 = cone:120\n", "panel 1"),
    ("[panels]\nfirst = free\n", "first"),
    ("no equals sign\n", "no equals sign"),
])
def test_errors_name_the_key(text, key):
    with pytest.raises(ConfigError) as info:
        parse_config("scenario = cone\n" + text).validate()
    assert key in str(info.value)


@pytest.mark.parametrize("cfg, key", [
    (RunConfig(), "scenario"),
    (RunConfig(mode="fit", surface="s.json"), "reference"),
    (RunConfig(mode="panelize", scenario="cone", panels=(1, 2), panel_specs={0: "free"}),
     "panel 1"),
    (RunConfig(mode="panelize", scenario="cone", panel_specs={0: "free", 4: "free"}), "panel 4"),
    (RunConfig(scenario="cone", moment_mode="fixed"), "moment_mode"),
    (RunConfig(scenario="cone", patch=(0, 3)), "patch"),
])
def test_validation(cfg, key):
    with pytest.raises(ConfigError, match=key):
        cfg.validate()


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("/nonexistent/run.cfg")
