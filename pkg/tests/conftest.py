import numpy as np
import pytest

from acc_sysid.model import CthpParams, PlatoonState
from acc_sysid.simulator import SimConfig, leader_series, pe_profile, simulate_platoon

TRUTH = CthpParams(0.1, 0.2, 1.2)

_verdicts = {}


def record_verdict(name, passed, detail=""):
    _verdicts[name] = (None if passed is None else bool(passed), detail)


@pytest.fixture
def verdict():
    return record_verdict


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_verdicts, key=lambda s: (len(s.split()[0]), s)):
        passed, detail = _verdicts[name]
        status = "PASS" if passed else ("SKIP" if passed is None else "FAIL")
        terminalreporter.write_line(f"{status}  {name}  {detail}")


@pytest.fixture(scope="session")
def pe_clean():
    """Noise-free 600 s trajectory from (0.1, 0.2, 1.2) with the default exciting leader."""
    cfg = SimConfig(TRUTH, 0.1, 600.0, PlatoonState(40.0, 30.0))
    clean, _ = simulate_platoon(cfg, leader_series(pe_profile(), 600.0, 0.1))
    return clean


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)
