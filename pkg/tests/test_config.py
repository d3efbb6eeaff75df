"""Tests for settings and the logging helpers."""

from pathlib import Path

import pytest

from divsurgeon.config import Settings, get_settings
from divsurgeon.logger import logger_timer


class TestSettings:
    """Tests for Settings defaults and environment overrides."""

    def test_defaults(self, monkeypatch) -> None:
        monkeypatch.delenv("DIVSURGEON_CHI_OVERRIDE", raising=False)
        settings = Settings()
        assert settings.threads == 1
        assert settings.cube_budget == 64
        assert settings.rk4_step == 1.0 / 64.0
        assert settings.chi_override is None
        assert settings.logs_dir == Path("logs")

    def test_environment_override(self, monkeypatch) -> None:
        monkeypatch.setenv("DIVSURGEON_THREADS", "4")
        monkeypatch.setenv("DIVSURGEON_PASTE_RESIDUAL_TOLERANCE", "0.01")
        settings = get_settings()
        assert settings.threads == 4
        assert settings.paste_residual_tolerance == 0.01

    def test_chi_override(self, fixed_chi) -> None:
        assert get_settings().chi_override == fixed_chi

    @pytest.mark.parametrize("threads, expected", [(0, 1), (-2, 1), (3, 3)])
    def test_worker_count(self, threads, expected) -> None:
        assert Settings(threads=threads).worker_count() == expected


class TestLoggerTimer:
    """Tests for logger_timer decorator."""

    def test_returns_result(self) -> None:
        @logger_timer("square")
        def square(x):
            return x * x

        assert square(3) == 9
        assert square.__name__ == "square"

    def test_reraises(self) -> None:
        @logger_timer("broken")
        def broken():
            raise RuntimeError("boom")

        with pytest.raises(RuntimeError, match="boom"):
            broken()
