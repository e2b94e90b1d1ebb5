import numpy as np
import pytest

from qeopt.encoding import make_scheme
from qeopt.problem import example_instance_n4


@pytest.fixture(scope="session")
def n4_instance():
    return example_instance_n4()


@pytest.fixture(scope="session")
def n4_scheme():
    return make_scheme(4, 2)


def random_state_amps(rng: np.random.Generator, n_qubits: int) -> np.ndarray:
    amps = rng.standard_normal(1 << n_qubits) + 1j * rng.standard_normal(1 << n_qubits)
    return amps / np.linalg.norm(amps)
