import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import oracles  # noqa: E402
from nifeedback import StateSpaceModel, SynthesisOptions, synth_ni  # noqa: E402

SYSTEMS = Path(__file__).resolve().parents[1] / "systems"


@pytest.fixture
def example_plant():
    return StateSpaceModel(oracles.EXAMPLE_A, oracles.EXAMPLE_B, oracles.EXAMPLE_C, name="example")


@pytest.fixture
def example_options():
    return SynthesisOptions(Y1b_override=1.0, Y2=0.5, K3=-1.0, max_tries=0)


@pytest.fixture
def example_result(example_plant, example_options):
    return synth_ni(example_plant, example_options)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def systems_dir():
    return SYSTEMS


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
