import numpy as np
import structlog

from app.utils.logger import _plain_numbers, get_logger, setup_logging


def test_numpy_values_become_builtins():
    event = _plain_numbers(None, "info", {"rms": np.float64(1.5), "n": np.int64(3), "x": np.arange(3.0)})
    assert event == {"rms": 1.5, "n": 3, "x": [0.0, 1.0, 2.0]}
    assert type(event["rms"]) is float


def test_large_arrays_are_summarized():
    event = _plain_numbers(None, "info", {"estimate": np.zeros((100,))})
    assert event["estimate"] == "<array shape=(100,)>"


def test_logging_goes_to_stderr(capsys):
    setup_logging()
    get_logger("wave").info("stderr only", value=np.float64(0.25))
    captured = capsys.readouterr()
    assert captured.out == ""


def test_stack_info_is_rendered(capsys):
    setup_logging()
    assert any(isinstance(p, structlog.processors.StackInfoRenderer) for p in structlog.get_config()["processors"])

    get_logger("wave").info("with stack", stack_info=True)
    captured = capsys.readouterr()
    assert "test_stack_info_is_rendered" in captured.err
