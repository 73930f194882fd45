import logging

import pytest

from src.core.errors import (
    EXIT_IO,
    EXIT_PROPERTY,
    EXIT_VALIDATION,
    ArchiveFormatError,
    ConfigurationError,
    DivergenceError,
    PropertyFailure,
    report_exception_sync,
)
from src.core.safe import safe_command


def _raising(exc):
    def handler():
        raise exc

    return handler


class TestSafeCommand:
    @pytest.mark.parametrize(
        "exc,code",
        [
            (ConfigurationError("bad"), EXIT_VALIDATION),
            (ArchiveFormatError("bad magic"), EXIT_IO),
            (DivergenceError("nan"), EXIT_PROPERTY),
            (FileNotFoundError("x.png"), EXIT_IO),
        ],
    )
    def test_known_errors_map_to_exit_codes(self, exc, code, capsys):
        assert safe_command(_raising(exc), label="t")() == code
        assert capsys.readouterr().err.startswith("error: ")

    def test_success_passes_code_through(self):
        assert safe_command(lambda: 0, label="t")() == 0
        assert safe_command(lambda: None, label="t")() == 0

    def test_unexpected_error_goes_to_error_log(self, data_dir):
        code = safe_command(_raising(RuntimeError("boom")), label="t", env_lower="production")()
        assert code == EXIT_IO
        log = (data_dir / "log" / "error.log").read_text(encoding="utf-8")
        assert "RuntimeError: boom" in log

    def test_development_prints_traceback(self, data_dir, capsys):
        safe_command(_raising(RuntimeError("boom")), label="t", env_lower="development")()
        assert "RuntimeError: boom" in capsys.readouterr().err
        assert not (data_dir / "log" / "error.log").exists()

    def test_no_swallow_reraises(self):
        with pytest.raises(ConfigurationError):
            safe_command(_raising(ConfigurationError("bad")), label="t", swallow=False)()


def test_property_failure_lists_checks():
    exc = PropertyFailure("2 check(s) failed", ["grad/warp", "exact/shift"])
    assert exc.failures == ("grad/warp", "exact/shift")
    assert str(exc) == "2 check(s) failed: grad/warp, exact/shift"
    assert exc.exit_code == EXIT_PROPERTY


def test_report_keeps_traceback(caplog):
    try:
        raise RuntimeError("boom")
    except RuntimeError as ex:
        with caplog.at_level(logging.ERROR, logger="errors"):
            report_exception_sync(ex, where="interpolate", env_lower="production")
    records = [r for r in caplog.records if r.name == "errors"]
    assert records and records[0].getMessage() == "interpolate: boom"
    assert records[0].exc_info is not None and records[0].exc_info[0] is RuntimeError
