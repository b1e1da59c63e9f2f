import pytest

from ivelab.expcli.config import ConfigError, RunConfig, load_config, parse_config, parse_seeds


def test_defaults_follow_protocol():
    cfg = parse_config("")
    assert cfg.learning_rate == 5e-5 and cfg.epochs == 10_000 and cfg.batch_size == 128
    assert cfg.rollout_steps == 500 and cfg.ive_horizons == (1, 2, 20) and cfg.ensemble_size == 20
    assert cfg.seeds == (0,)


def test_occupancy_experiments_default_to_twenty_seeds():
    assert parse_config("experiment = fig5").seeds == tuple(range(20))
    assert parse_config("", experiment="shift").seeds == tuple(range(20))
    assert parse_config("experiment = fig5\nseeds = 3").seeds == (3,)


def test_parse_values_and_comments():
    cfg = parse_config(
        "# comment\nexperiment = fig5  # trailing\nseeds = 0-2, 7\nwind_prob = 0.5\n"
        "exclude = false\nive_horizons = 1,3\n"
    )
    assert cfg.experiment == "fig5"
    assert cfg.seeds == (0, 1, 2, 7)
    assert cfg.wind_prob == 0.5 and cfg.exclude is False
    assert cfg.ive_horizons == (1, 3)
    assert cfg.gridworld().excluded_cell is None


@pytest.mark.parametrize("text", [
    "bogus = 1",
    "epochs = many",
    "no equals sign",
    "wind_prob = 2.0",
    "experiment = fig4",
    "learning_rate = -1",
    "exclude = maybe",
    "seeds = ",
    "ensemble_size = 1",
    "didactic_gamma = 1.0",
])
def test_invalid_configs(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_seed_ranges():
    assert parse_seeds("0-3") == (0, 1, 2, 3)
    with pytest.raises(ConfigError):
        parse_seeds("a-b")


def test_overrides_and_offset(tmp_path):
    path = tmp_path / "c.conf"
    path.write_text("seeds = 1,2\nout = here\n")
    cfg = load_config(path, out="there", experiment="didactic")
    assert cfg.out == "there" and cfg.experiment == "didactic"
    assert cfg.with_seed_offset(10).seeds == (11, 12)


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/config.conf")


def test_items_round_trip():
    cfg = RunConfig(seeds=(4, 5), wind_prob=0.25, true_pair=True)
    text = "\n".join(f"{k} = {v}" for k, v in cfg.items())
    assert parse_config(text) == cfg


def test_sub_configs():
    cfg = parse_config("learning_rate = 0.01\ndidactic_steps = 3")
    assert cfg.train_config(9).learning_rate == 0.01 and cfg.train_config(9).seed == 9
    assert cfg.didactic_config(2).steps == 3
    assert cfg.gridworld(wind_prob=0.5).wind_prob == 0.5
