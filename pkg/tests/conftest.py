import pytest
from hypothesis import HealthCheck, settings

import funnelcap as fc

settings.register_profile(
    "ci",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def ex1():
    return fc.builtin_system("pendulum_ex1")


@pytest.fixture(scope="session")
def ex2():
    return fc.builtin_system("nonlinear_ex2")


@pytest.fixture(scope="session")
def ex1_trajectory(ex1):
    return fc.simulate(ex1.scenario)


@pytest.fixture(scope="session")
def ex2_trajectory(ex2):
    return fc.simulate(ex2.scenario)


@pytest.fixture()
def ex1_config_path(tmp_path):
    path = tmp_path / "ex1_pendulum.json"
    path.write_text(fc.dump_defaults("pendulum_ex1"), encoding="utf-8")
    return path


@pytest.fixture()
def ex2_config_path(tmp_path):
    path = tmp_path / "ex2_nonlinear.json"
    path.write_text(fc.dump_defaults("nonlinear_ex2"), encoding="utf-8")
    return path
