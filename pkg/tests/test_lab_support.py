import pytest
import structlog
from structlog.testing import capture_logs

from tools.lab_errors import (
    EXIT_INFEASIBLE, EXIT_INVALID_CONFIG, EXIT_VERDICT_FAILURE, InvalidInputError, LabError,
    QuadratureNotConvergedError, RegimeMismatchError, ResourceInfeasibleError, exit_code_for,
)
from tools.lab_logging import configure_logging, get_logger


@pytest.mark.parametrize("error,code", [
    (InvalidInputError("alpha"), EXIT_INVALID_CONFIG),
    (RegimeMismatchError("regime"), EXIT_INVALID_CONFIG),
    (ResourceInfeasibleError("atoms"), EXIT_INFEASIBLE),
    (QuadratureNotConvergedError("grid", coarse=1.0, fine=2.0), EXIT_INFEASIBLE),
    (LabError("other"), EXIT_VERDICT_FAILURE),
    (RuntimeError("unexpected"), EXIT_VERDICT_FAILURE),
])
def test_exit_codes(error, code):
    assert exit_code_for(error) == code


def test_invalid_input_is_a_value_error():
    with pytest.raises(ValueError):
        raise InvalidInputError("q must be >= 1")


def test_convergence_error_keeps_both_values():
    error = QuadratureNotConvergedError("disagree", coarse=0.5, fine=0.25)
    assert (error.coarse, error.fine) == (0.5, 0.25)


def test_logger_binds_module_name():
    with capture_logs() as logs:
        get_logger("tools.demo").info("ladder_point", R=64.0, ratio=2.0)
    assert logs == [{"event": "ladder_point", "R": 64.0, "ratio": 2.0, "module": "tools.demo", "log_level": "info"}]


def test_json_format_is_selectable(monkeypatch):
    monkeypatch.setenv("CFL_LOG_FORMAT", "json")
    try:
        configure_logging()
        assert isinstance(structlog.get_config()["processors"][-1], structlog.processors.JSONRenderer)
    finally:
        configure_logging(fmt="console")
    assert isinstance(structlog.get_config()["processors"][-1], structlog.dev.ConsoleRenderer)
