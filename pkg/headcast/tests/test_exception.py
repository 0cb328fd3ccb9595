import pytest

from headcast.src.utils.exception import (
    EXIT_CONFIG_OR_IO,
    EXIT_DEGENERATE_STATISTICS,
    HeadcastException,
    configuration_error,
    invalid_argument,
)


def test_message_carries_type_context_and_exit_code():
    error = HeadcastException(
        error=ValueError("All paired differences are zero."),
        error_type="DegenerateSample",
        context={"group": "R12", "n": 40},
        exit_code=EXIT_DEGENERATE_STATISTICS,
    )
    message = str(error)
    assert "Error Type: DegenerateSample" in message
    assert "Error Message: All paired differences are zero." in message
    assert f"Exit Code: {EXIT_DEGENERATE_STATISTICS}" in message
    assert "  group: R12" in message and "  n: 40" in message
    assert "File:" not in message, "no traceback outside an except block"


def test_error_type_defaults_to_the_wrapped_class():
    error = HeadcastException(KeyError("route_id"))
    assert error.error_type == "KeyError"
    assert error.exit_code == EXIT_CONFIG_OR_IO
    assert error.context == {}


def test_wrapping_inside_except_names_the_origin():
    try:
        raise OSError("disk full")
    except OSError as e:
        error = HeadcastException(e, error_type="OutputError", context={"path": "out/report.json"})
    assert "File: " in error.message
    assert "Line Number: " in error.message
    assert "  path: out/report.json" in error.message


def test_helpers_tag_their_errors():
    assert invalid_argument("w outside [0, 1]", w=1.5).error_type == "InvalidArgument"
    error = configuration_error("no tracks", data="dataset")
    assert error.error_type == "ConfigurationError"
    assert error.context == {"data": "dataset"}
    assert error.exit_code == EXIT_CONFIG_OR_IO
    with pytest.raises(HeadcastException):
        raise error


if __name__ == "__main__":
    pytest.main(["-v", __file__])
