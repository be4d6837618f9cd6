import pytest

from dgrec.config import ConfigError, ModelConfig, parse_config_text, resolve_config


def test_defaults():
    c = ModelConfig()
    assert (c.hidden, c.embed, c.layers, c.fanouts, c.dropout, c.batch) == (100, 100, 2, (10, 15), 0.2, 200)
    assert (c.base_lr, c.decay, c.decay_interval, c.max_session_len, c.patience) == (0.002, 0.98, 400, 20, 5)


def test_three_way_precedence(tmp_path, monkeypatch):
    cfg = tmp_path / "c.txt"
    cfg.write_text("# comment\nhidden = 32\nseed=5\ndropout=0.1  # trailing\n", encoding="utf-8")
    monkeypatch.setenv("DGREC_SEED", "3")
    assert resolve_config().seed == 3  # env fallback beats the default
    c = resolve_config(str(cfg))
    assert (c.hidden, c.seed, c.dropout, c.embed) == (32, 5, 0.1, 100)  # file beats env and default
    c = resolve_config(str(cfg), {"hidden": 8, "seed": 9})
    assert (c.hidden, c.seed, c.dropout) == (8, 9, 0.1)  # flags beat file
    monkeypatch.delenv("DGREC_SEED")
    assert resolve_config().seed == 0


def test_unknown_key_is_an_error(tmp_path):
    with pytest.raises(ConfigError):
        parse_config_text("hiddn=3\n")
    with pytest.raises(ConfigError):
        resolve_config(overrides={"learning_rate": "0.1"})


@pytest.mark.parametrize("text", ["hidden\n", "hidden=abc\n", "fanouts=1,x\n", "tie_embeddings=maybe\n"])
def test_malformed_values(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


@pytest.mark.parametrize("bad", [{"hidden": 0}, {"mode": "other"}, {"dropout": 1.0}, {"dtype": "float16"},
                                 {"layers": 2, "fanouts": (3,)}])
def test_validation(bad):
    with pytest.raises(ConfigError):
        ModelConfig(**bad)


def test_fanouts_and_layers_follow_each_other():
    assert resolve_config(overrides={"fanouts": "4,5,6"}).layers == 3
    assert resolve_config(overrides={"layers": 1}).fanouts == (10,)
    assert resolve_config(overrides={"layers": 3}).fanouts == (10, 15, 15)


def test_text_round_trip(tmp_path):
    c = ModelConfig(hidden=7, embed=7, fanouts=(2, 3), mode="long_only", tie_embeddings=True, base_lr=0.0125)
    path = tmp_path / "c.txt"
    path.write_text(c.to_text(), encoding="utf-8")
    assert resolve_config(str(path)) == c
