import sys

import pytest

from feemech.models import LinearMarginalCurve, ShockModel
from feemech.weitzman import QuadraticEnvironment


def make_env(b_slope=-1.0, c_slope=1.0, var_d=1.0, var_c=0.0, cov=0.0, b0=20.0, c0=20.0, q_ref=20.0,
             kind="gaussian", token=None):
    return QuadraticEnvironment(
        LinearMarginalCurve(b0, b_slope, q_ref),
        LinearMarginalCurve(c0, c_slope, q_ref),
        ShockModel(kind, var_d, var_c, cov),
        token,
    )


@pytest.fixture
def env_factory():
    return make_env


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
