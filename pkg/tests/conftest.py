import numpy as np
import pytest

from frictionid.harness import NoiseModel, run_scenario, standard_scenario

ACCEPTANCE_LINES: list = []


def report(criterion: int, passed: bool, detail: str) -> None:
    """One PASS/FAIL line per acceptance criterion, echoed again in the terminal summary."""
    line = f"CRITERION {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def slippery_stream():
    return run_scenario(standard_scenario("slippery"))


@pytest.fixture(scope="session")
def short_slippery_stream():
    return run_scenario(standard_scenario("slippery", duration=1.5))


@pytest.fixture(scope="session")
def clean_slide_stream():
    """Noise-free sliding data sampled at the simulation step."""
    return run_scenario(standard_scenario("slippery", duration=1.5, sim_dt=0.01, noise=NoiseModel.none()))


@pytest.fixture(scope="session")
def hopping_stream():
    return run_scenario(standard_scenario("hopping"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
