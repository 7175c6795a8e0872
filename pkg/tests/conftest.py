import pytest

from glacialdde import (HealedMapConfig, ModelParams, PeriodicForcing,
                        constant_history, history_length)

H = 0.01
T_FORCE = 4.1


@pytest.fixture
def forcing0():
    return PeriodicForcing(T=T_FORCE, phi=0.0)


@pytest.fixture
def params_bist():
    """Bistable delay, unforced."""
    return ModelParams(tau=1.45, u=0.0)


@pytest.fixture
def params_155():
    return ModelParams(tau=1.55, u=0.0)


@pytest.fixture
def cfg_bist(params_bist, forcing0):
    return HealedMapConfig(params=params_bist, forcing=forcing0, h=H)


@pytest.fixture
def cfg_155_009(forcing0):
    return HealedMapConfig(params=ModelParams(tau=1.55, u=0.09),
                           forcing=forcing0, h=H)


def hist(value, tau, h=H, t=0.0):
    return constant_history(value, history_length(tau, h), h, t)


def steps_per_period(h=H):
    return round(T_FORCE / h)
