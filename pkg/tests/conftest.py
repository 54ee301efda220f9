import numpy as np
import pytest

from iifpnet.model import LayerParams, MlpModel


def chain(weight=1.0, depth=3, a=0.5):
    """Scalar chain of ``depth`` 1x1 layers with zero bias."""
    return MlpModel([LayerParams([[weight]], [0.0]) for _ in range(depth)], a)


def random_model(rng, widths, a=0.5, scale=1.0):
    layers = [
        LayerParams(rng.normal(scale=scale, size=(o, i)), rng.normal(scale=0.3, size=o))
        for i, o in zip(widths[:-1], widths[1:])
    ]
    return MlpModel(layers, a)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
