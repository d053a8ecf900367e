import numpy as np
import pytest

from poissonkf import LinearGaussianModel, ScalarModel


@pytest.fixture
def scalar_benchmark() -> LinearGaussianModel:
    """A=-1, G=1, C=1, V=0.5, P0=1: stable, feasible for any rate."""
    return LinearGaussianModel.scalar(A=-1.0, G=1.0, C=1.0, V=0.5, x0_mean=0.0, P0=1.0)


@pytest.fixture
def scalar_theory_benchmark() -> ScalarModel:
    return ScalarModel(A=-1.0, G=1.0, C=1.0, V=0.5, lam=5.0, M=10, P0=1.0)


@pytest.fixture
def model_2d() -> LinearGaussianModel:
    return LinearGaussianModel(
        A=[[-1.0, 0.6], [0.2, -2.0]],
        G=[[1.0], [0.4]],
        C=[[1.0, 0.0]],
        V=[[0.3]],
        x0_mean=[1.0, -0.5],
        x0_cov=[[0.5, 0.1], [0.1, 0.4]],
    )


def random_spd(rng: np.random.Generator, n: int) -> np.ndarray:
    B = rng.standard_normal((n, n))
    return B @ B.T + 0.1 * np.eye(n)
