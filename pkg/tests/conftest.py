import numpy as np
import pytest

from lgfusion.aekf import NoiseConfig
from lgfusion.harness import RunConfig
from lgfusion.sim import ScenarioConfig
from lgfusion.state import TargetState

R0 = np.diag([1e-6] * 3 + [1e-3] * 3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def small_run_config(steps=60, seed=0, f=1.0, truth_scale=1.0, **scn):
    """Scenario-I-like setup, shortened for unit tests."""
    sc = ScenarioConfig(
        dt=0.066,
        steps=steps,
        initial_state=TargetState(vel=[0.01, 0.0, 0.0]),
        q_nw=truth_scale * 1e-5 * np.eye(3),
        q_nv=truth_scale * 1e-2 * np.eye(3),
        r_true_hand=R0,
        r_true_base=R0,
        seed=seed,
        **scn,
    )
    noise = NoiseConfig.from_blocks(1e-5 * np.eye(3), 1e-2 * np.eye(3), R0, f, f)
    return RunConfig(sc, noise, noise, 1e-2 * np.eye(12))


ACCEPTANCE_LINES = []


@pytest.fixture
def report(capsys):
    """Print an acceptance verdict line immediately and again in the summary."""

    def emit(number, title, passed, detail):
        line = f"CRITERION {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
