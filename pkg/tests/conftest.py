import numpy as np
import pytest

from fewpixel.models.shapes import train_test_split
from fewpixel.models.tiny import TinyClassifier, train


class CountingScorer:
    """Wraps a scorer and counts every invocation, independent of any budget."""

    def __init__(self, inner):
        self.inner = inner
        self.invocations = 0

    def __call__(self, image):
        self.invocations += 1
        return self.inner(image)


@pytest.fixture(scope="session")
def small_split():
    return train_test_split(3000, 300, seed=7)


@pytest.fixture(scope="session")
def quick_model(small_split):
    (x, y), _ = small_split
    model, _ = train(x, y, epochs=4, seed=1)
    return model


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def random_model():
    return TinyClassifier.init((3072, 16, 3), seed=3)


@pytest.fixture(scope="session")
def default_split():
    return train_test_split()


@pytest.fixture(scope="session")
def shapes_model(default_split):
    """The classifier trained with the package defaults (about 10 s)."""
    (x, y), test = default_split
    model, report = train(x, y, test=test)
    model.report = report
    return model


ACCEPTANCE_LINES: list[str] = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        status = "PASS" if report.passed else "FAIL"
        ACCEPTANCE_LINES.append(f"{status}  {name}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
