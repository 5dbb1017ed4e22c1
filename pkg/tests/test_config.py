import pytest

from divkit import ParseError
from divkit.config import (
    DEFAULT_CHAIN_TOLERANCE,
    DEFAULT_CONFIG_PATH,
    DEFAULT_DIMS,
    DEFAULT_GRID_POINTS,
    VerifyDefaults,
    get_config_path,
    get_log_level,
    get_thread_count,
)


def test_thread_count_from_env(monkeypatch):
    monkeypatch.setenv("DIVKIT_THREADS", "3")
    assert get_thread_count() == 3


def test_thread_count_invalid_values(monkeypatch):
    monkeypatch.setenv("DIVKIT_THREADS", "many")
    assert get_thread_count() >= 1
    monkeypatch.setenv("DIVKIT_THREADS", "0")
    assert get_thread_count() == 1


def test_log_level_and_config_path(monkeypatch):
    monkeypatch.setenv("LOG_LEVEL", "debug")
    assert get_log_level() == "DEBUG"
    monkeypatch.delenv("DIVKIT_CONFIG", raising=False)
    assert get_config_path() == DEFAULT_CONFIG_PATH
    monkeypatch.setenv("DIVKIT_CONFIG", "/tmp/other.yml")
    assert get_config_path() == "/tmp/other.yml"


def test_missing_file_gives_defaults(tmp_path):
    defaults = VerifyDefaults.load(str(tmp_path / "absent.yml"))
    assert defaults.dims == DEFAULT_DIMS
    assert defaults.tolerance == DEFAULT_CHAIN_TOLERANCE
    assert defaults.scan.points == DEFAULT_GRID_POINTS


def test_yaml_defaults(tmp_path):
    path = tmp_path / "divkit.yml"
    path.write_text(
        "verify:\n  samples: 40\n  dims: 3\n  tolerance: 1.0e-10\nscan:\n  points: 501\n  spacing: linear\n",
        encoding="utf-8",
    )
    defaults = VerifyDefaults.load(str(path))
    assert defaults.samples == 40
    assert defaults.dims == (3, 3)
    assert defaults.tolerance == 1e-10
    assert defaults.scan.points == 501
    assert defaults.scan.spacing == "linear"


@pytest.mark.parametrize(
    "body",
    ["verify: [unclosed\n", "- just\n- a list\n", "verify:\n  dims: []\n", "verify:\n  samples: many\n"],
)
def test_malformed_defaults_file(tmp_path, body):
    path = tmp_path / "divkit.yml"
    path.write_text(body, encoding="utf-8")
    with pytest.raises(ParseError) as exc:
        VerifyDefaults.load(str(path))
    assert exc.value.locus == str(path)
