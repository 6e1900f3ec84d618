import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gaussfit.geometry import Ball, Box
from gaussfit.sampler import SamplerConfig, sample_uniform

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def interval_batch():
    """Uniform samples on [0, 1]."""
    return sample_uniform(Box.cube(1), SamplerConfig(seed=11), 100_000)


@pytest.fixture(scope="session")
def square_batch():
    return sample_uniform(Box.cube(2), SamplerConfig(seed=12), 100_000)


@pytest.fixture(scope="session")
def disk_batch():
    return sample_uniform(Ball.unit(2), SamplerConfig(seed=13), 100_000)


@pytest.fixture(scope="session")
def ball10_batch():
    return sample_uniform(Ball.unit(10), SamplerConfig(seed=14), 100_000)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion.

    Used as a context manager: ``with acceptance(3, "shape"): ...``.
    """
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, {})

    class _Recorder:
        def __call__(self, number, title):
            self.number, self.title, self.detail = number, title, ""
            return self

        def note(self, text):
            self.detail = text

        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            status = "PASS" if exc_type is None else "FAIL"
            extra = f" ({self.detail})" if self.detail else ""
            lines[self.number] = f"criterion {self.number} [{status}] {self.title}{extra}"
            return False

    return _Recorder()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
