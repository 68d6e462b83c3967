import numpy as np
import pytest

from persuade.belief_core import (
    ConditionalBeliefFamily,
    FiniteSupportDistribution,
    InformationStructure,
    Prior,
    posterior_from_signals,
)

# lines recorded by the acceptance suite, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_structure(rng, n_receivers=2, n_states=2, max_signals=3):
    sizes = rng.integers(1, max_signals + 1, size=n_receivers)
    sets = [tuple(range(k)) for k in sizes]
    profiles = [tuple(int(s) for s in prof) for prof in np.ndindex(*sizes)]
    kernel = []
    for _ in range(n_states):
        w = rng.dirichlet(np.ones(len(profiles)))
        kernel.append(FiniteSupportDistribution(tuple(profiles), tuple(w)))
    return InformationStructure(tuple(sets), tuple(kernel))


def random_prior(rng, n_states=2):
    return Prior(tuple(rng.dirichlet(np.ones(n_states) * 2.0)))


def random_family(rng, n_receivers=2, n_states=2):
    prior = random_prior(rng, n_states)
    info = random_structure(rng, n_receivers, n_states)
    return posterior_from_signals(info, prior), prior


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def fig2_family() -> ConditionalBeliefFamily:
    """Morale optimum: low state splits (1, 1/3) and (1/3, 1); high state sits at (1/3, 1/3)."""
    return ConditionalBeliefFamily.from_binary([
        [((1.0, 1 / 3), 0.5), ((1 / 3, 1.0), 0.5)],
        [((1 / 3, 1 / 3), 1.0)],
    ])
