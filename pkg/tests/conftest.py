import numpy as np
import pytest

from mcmot.model import ModelParams


@pytest.fixture
def params_1d():
    """Scalar random-walk model used throughout the unit tests."""
    return ModelParams(
        F=[[1.0]], Q=[[1.0]], H=[[1.0]], R=[[1.0]],
        mu0=[0.0], Sigma0=[[100.0]],
        mu_fp=[0.0], Sigma_fp=[[100.0]],
        lambda_b=0.1, lambda_f=0.5, p_d=0.9, p_lam=0.1,
    )


@pytest.fixture
def params_2d():
    """Constant-velocity model with 2-D state, 1-D position observations."""
    return ModelParams(
        F=[[1.0, 1.0], [0.0, 1.0]],
        Q=[[0.1, 0.0], [0.0, 0.05]],
        H=[[1.0, 0.0]],
        R=[[0.5]],
        mu0=[0.0, 0.0], Sigma0=[[25.0, 0.0], [0.0, 4.0]],
        mu_fp=[0.0], Sigma_fp=[[25.0]],
        lambda_b=0.2, lambda_f=0.4, p_d=0.8, p_lam=0.2,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
