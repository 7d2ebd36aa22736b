import pytest
from pydantic import ValidationError

from fragcalc.config import Settings, get_settings


class TestSettings:
    """Environment-driven configuration."""

    def test_defaults(self):
        s = Settings(_env_file=None)
        assert s.witness_height == 2
        assert s.fresh_marker == "'"
        assert s.log_level == "WARNING"

    def test_environment_override(self, monkeypatch):
        monkeypatch.setenv("WITNESS_HEIGHT", "3")
        monkeypatch.setenv("corpus_seed", "11")
        s = Settings(_env_file=None)
        assert s.witness_height == 3
        assert s.corpus_seed == 11

    @pytest.mark.parametrize("name,value", [
        ("EVAL_NODE_BUDGET", "0"),
        ("MAX_WITNESS_CANDIDATES", "-5"),
        ("WITNESS_HEIGHT", "-1"),
    ])
    def test_rejects_bad_values(self, monkeypatch, name, value):
        monkeypatch.setenv(name, value)
        with pytest.raises(ValidationError):
            Settings(_env_file=None)

    def test_cached(self):
        get_settings.cache_clear()
        assert get_settings() is get_settings()

    def test_model_config(self):
        assert Settings.model_config["env_file"] == ".env"
        assert Settings.model_config["case_sensitive"] is False
