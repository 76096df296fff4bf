"""Shared fixtures: problems are session-scoped since construction (eigh of
a 256x256 Laplacian, kernel eigendecompositions) is not free."""

import numpy as np
import pytest

from dynlr import make_problem


@pytest.fixture(scope="session")
def toy():
    return make_problem("toy")


@pytest.fixture(scope="session")
def toy_rank5():
    return make_problem("toy", exact_rank=5)


@pytest.fixture(scope="session")
def lyapunov():
    return make_problem("lyapunov")


@pytest.fixture(scope="session")
def allen_cahn():
    return make_problem("allen_cahn")


@pytest.fixture(scope="session")
def burgers():
    return make_problem("burgers")


@pytest.fixture(scope="session")
def landau():
    return make_problem("vlasov_landau")


@pytest.fixture(scope="session")
def two_stream():
    return make_problem("vlasov_two_stream")


@pytest.fixture(scope="session")
def allen_cahn_reference(allen_cahn):
    """Dense reference states of Allen-Cahn at t = 0, 0.25, ..., 10."""
    times = [round(0.25 * k, 10) for k in range(1, 41)]
    states = allen_cahn.reference_states(times)
    return [0.0] + times, [allen_cahn.initial] + states


@pytest.fixture(scope="session")
def landau_reference(landau):
    """Dense Landau reference on a fine grid over [0, 16] plus its electric
    energy trace (enough to resolve the decay envelope peaks)."""
    times = [round(0.1 * k, 10) for k in range(1, 161)]
    states = landau.reference_states(times)
    ee = [landau.field.electric_energy(S) for S in states]
    return ([0.0] + times, [landau.initial] + states,
            [landau.field.electric_energy(landau.initial)] + ee)


@pytest.fixture(scope="session")
def two_stream_reference(two_stream):
    """Dense two-stream reference over [0, 50] with electric energy trace."""
    times = [round(0.5 * k, 10) for k in range(1, 101)]
    states = two_stream.reference_states(times)
    ee = [two_stream.field.electric_energy(S) for S in states]
    return ([0.0] + times, [two_stream.initial] + states,
            [two_stream.field.electric_energy(two_stream.initial)] + ee)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
