import numpy as np
import pytest

from invarcp.sem import SemSpec, dataset_from_specs, noise_intervention


def simple_sem_pair():
    """X1, X2 -> Y -> X3; the second environment rescales the noise of
    every non-target node.  The invariant set is {X1, X2} = columns {0, 1}.
    """
    beta = np.zeros((4, 4))  # nodes: 0=Y, 1=X1, 2=X2, 3=X3
    beta[0, 1], beta[0, 2] = 0.8, -0.6
    beta[3, 0] = 0.7
    base = SemSpec(
        order=(1, 2, 0, 3), beta=beta, sigma=np.array([0.5, 1.0, 1.0, 0.8]), target=0
    )
    shifted = noise_intervention(base, scales={1: 2.0, 2: 1.6, 3: 2.5})
    return base, shifted


TRUE_PARENT_COLS = frozenset({0, 1})


@pytest.fixture
def null_dataset():
    def make(seed: int, n: int = 150):
        rng = np.random.default_rng([808, seed])
        return dataset_from_specs(simple_sem_pair(), [n, n], rng)

    return make
