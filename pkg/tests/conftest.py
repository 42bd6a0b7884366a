import functools

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def _synth(template, seed):
    from twinexplain.data_io.synth import synth_scene
    return synth_scene(template, seed)


@functools.lru_cache(maxsize=None)
def _analysis(template, seed):
    from twinexplain.causal import SceneAnalysis
    an = SceneAnalysis(_synth(template, seed))
    return an, an.discover()


@pytest.fixture(scope="session")
def synth():
    """Cached synthetic scenes: synth(template, seed)."""
    return _synth


@pytest.fixture(scope="session")
def analysed():
    """Cached (SceneAnalysis, CausalGraph) for a synthetic scene."""
    return _analysis


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
