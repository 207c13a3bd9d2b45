from pathlib import Path

import numpy as np
import pytest

from oupm.dsl import load_file

MODELS = Path(__file__).resolve().parents[1] / "src" / "oupm" / "models"


def model_path(name: str) -> Path:
    return MODELS / f"{name}.oum"


def model_text(name: str) -> str:
    return model_path(name).read_text(encoding="utf-8")


_cache = {}


def get_model(name: str):
    if name not in _cache:
        _cache[name] = load_file(model_path(name))
    return _cache[name]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def chain():
    return get_model("chain")


@pytest.fixture
def radar():
    return get_model("radar")


@pytest.fixture
def smallnet():
    return get_model("smallnet")


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def record(criterion: str, passed: bool, detail: str) -> str:
    line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
