import pytest

from lvspread.config import get_float, get_floats, get_int, load_config, parse_config
from lvspread.errors import ConfigError


def test_parse_keys_values_and_comments():
    cfg = parse_config("# header\na = 2\nb=0.5   # inline\n\n mu_list = 0.1, 1 10\n")
    assert cfg == {"a": "2", "b": "0.5", "mu_list": "0.1, 1 10"}
    assert get_float(cfg, "a", None) == 2.0
    assert get_floats(cfg, "mu_list", ()) == [0.1, 1.0, 10.0]
    assert get_int(cfg, "N", 1) == 1


@pytest.mark.parametrize("text", ["a 2", "a = 1\na = 2", " = 3", "a ="])
def test_malformed_text_is_rejected(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_bad_numbers_name_the_key():
    cfg = parse_config("a = two\nN = 1.5\nl = 1, x")
    with pytest.raises(ConfigError, match="a"):
        get_float(cfg, "a", None)
    with pytest.raises(ConfigError, match="N"):
        get_int(cfg, "N", None)
    with pytest.raises(ConfigError, match="l"):
        get_floats(cfg, "l", ())


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.cfg")
