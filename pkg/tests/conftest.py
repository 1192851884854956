import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lvspread import fbsolver  # noqa: E402
from lvspread.model import ModelParams  # noqa: E402
from lvspread.semiwave import XiGrid  # noqa: E402
from lvspread.speed import ProfileCache, estimate_s0  # noqa: E402

REFERENCE = ModelParams(d=1.0, r=1.0, a=2.0, b=0.5, mu=1.0)
INFERIOR = ModelParams(d=1.0, r=1.0, a=0.5, b=2.0, mu=1.0)

_acceptance_lines = []


def record_acceptance(label, ok, detail):
    line = f"{label} {'PASS' if ok else 'FAIL'} {detail}"
    _acceptance_lines.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def reference():
    return REFERENCE


@pytest.fixture(scope="session")
def ref_cache():
    return ProfileCache(REFERENCE, XiGrid())


@pytest.fixture(scope="session")
def ref_s0(ref_cache):
    return estimate_s0(REFERENCE, XiGrid(), cache=ref_cache)


def _run(m, h0, t_end, dt=fbsolver.DEFAULT_DT, snapshot_times=(), n_u=fbsolver.DEFAULT_NU):
    R_max = round(h0 + 2.0 * (m.r * m.d) ** 0.5 * t_end + 25.0)
    init = fbsolver.InitialData.bump(h0, R_max, n_u=n_u)
    return fbsolver.simulate(init, m, t_end, dt=dt, snapshot_times=snapshot_times)


@pytest.fixture(scope="session")
def headline_run():
    """Reference parameters, mu = 1, v0 = 1, bump on [0, 5], t_end = 200."""
    return _run(REFERENCE, 5.0, 200.0, snapshot_times=(200.0,))


@pytest.fixture(scope="session")
def inferior_run():
    return _run(INFERIOR, 5.0, 200.0)


@pytest.fixture(scope="session")
def large_h0_run():
    return _run(REFERENCE, 20.0, 100.0)


@pytest.fixture(scope="session")
def dt_triple():
    """Short reference runs at dt = 0.04, 0.02, 0.01."""
    return [_run(REFERENCE, 5.0, 20.0, dt=dt) for dt in (0.04, 0.02, 0.01)]


@pytest.fixture(scope="session")
def run_factory():
    return _run
