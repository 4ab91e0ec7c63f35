import numpy as np
import pytest

from dhtest.graph import DirectedGraph
from dhtest.model import HypothesisModel

_REPORT: list[str] = []


@pytest.fixture
def report():
    """Append one acceptance line; all lines are printed in the terminal summary."""
    return _REPORT.append


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in _REPORT:
            terminalreporter.write_line(line)


@pytest.fixture
def two_agent_model():
    # agent 0 isolates state 0, agent 1 isolates state 1
    return HypothesisModel((
        np.array([[0.3, 0.7], [0.6, 0.4], [0.6, 0.4]]),
        np.array([[0.6, 0.4], [0.3, 0.7], [0.6, 0.4]]),
    ))


@pytest.fixture
def pair_graph():
    return DirectedGraph.from_edges(2, [(0, 1), (1, 0)])
