import pytest
import ujson

from config import Config, SearchSettings, parse_tolerance


@pytest.fixture
def restore_config(monkeypatch):
    for name in (
        "SEED",
        "N_MAX",
        "ASCENT_RESTARTS",
        "JOBS",
        "LOG_LEVEL",
        "QUOTIENT_TOL",
        "TOLERANCE_OVERRIDES",
    ):
        monkeypatch.setattr(Config, name, getattr(Config, name))


def test_defaults_validate(restore_config):
    Config.validate_config()


def test_validation_lists_every_error(restore_config):
    Config.ASCENT_RESTARTS = 0
    Config.N_MAX = 12
    Config.LOG_LEVEL = "LOUD"
    with pytest.raises(ValueError) as info:
        Config.validate_config()
    message = str(info.value)
    assert message.startswith("配置错误")
    assert "ASCENT_RESTARTS" in message and "N_MAX" in message and "LOG_LEVEL" in message


def test_config_file(tmp_path, restore_config):
    path = tmp_path / "osscalc.json"
    path.write_text(ujson.dumps({"seed": 99, "n_max": 3}), encoding="utf-8")
    applied = Config.load_file(str(path))
    assert applied == {"seed": 99, "n_max": 3}
    assert Config.SEED == 99 and Config.N_MAX == 3


def test_config_file_rejects_unknown_keys(tmp_path, restore_config):
    path = tmp_path / "bad.json"
    path.write_text(ujson.dumps({"telegram_token": "x"}), encoding="utf-8")
    with pytest.raises(ValueError, match="telegram_token"):
        Config.load_file(str(path))
    with pytest.raises(ValueError):
        Config.load_file(str(tmp_path / "missing.json"))


def test_overrides_skip_none(restore_config):
    Config.apply_overrides(seed=5, n_max=None)
    assert Config.SEED == 5
    assert SearchSettings.from_config().seed == 5


def test_search_settings_modes():
    settings = SearchSettings(ascent_restarts=3)
    quick = settings.upper_only()
    assert quick.quick and not quick.lower_search and quick.factor_restarts == 0
    assert quick.upper_only() is quick
    assert not settings.replace(lower_search=False).quick
    assert settings.digest() == SearchSettings(ascent_restarts=3).digest()
    assert settings.digest() != settings.replace(seed=1).digest()


def test_parse_tolerance():
    assert parse_tolerance("smith=1e-6") == ("smith", 1e-6)
    assert parse_tolerance(" axioms =0.5") == ("axioms", 0.5)
    with pytest.raises(ValueError):
        parse_tolerance("smith")
    with pytest.raises(ValueError):
        parse_tolerance("=0.1")
    with pytest.raises(ValueError):
        parse_tolerance("smith=lots")


def test_tolerance_overrides_validated(restore_config):
    Config.TOLERANCE_OVERRIDES = {"smith": 1e-3}
    Config.validate_config()

    Config.TOLERANCE_OVERRIDES = {"smith": 0.0, "nosuch": 0.1}
    with pytest.raises(ValueError) as info:
        Config.validate_config()
    message = str(info.value)
    assert "TOLERANCE_OVERRIDES[smith]" in message and "nosuch" in message

    Config.TOLERANCE_OVERRIDES = [("smith", 0.1)]
    with pytest.raises(ValueError, match="TOLERANCE_OVERRIDES"):
        Config.validate_config()


def test_config_file_tolerance_overrides(tmp_path, restore_config):
    path = tmp_path / "tol.json"
    path.write_text(ujson.dumps({"tolerance_overrides": {"functional": 0.01}}), encoding="utf-8")
    Config.load_file(str(path))
    assert Config.TOLERANCE_OVERRIDES == {"functional": 0.01}
    Config.validate_config()


def test_digest_folds_run_context():
    settings = SearchSettings()
    assert settings.digest(tolerance=1e-6, n_max=4) == settings.digest(n_max=4, tolerance=1e-6)
    assert settings.digest(tolerance=1e-6, n_max=4) != settings.digest(tolerance=1e-3, n_max=4)
    assert settings.digest(tolerance=1e-6, n_max=4) != settings.digest(tolerance=1e-6, n_max=3)
    assert settings.digest(tolerance=1e-6) != settings.digest()
