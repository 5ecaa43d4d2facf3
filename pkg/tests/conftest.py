import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lqgball.formulas import SQRT_8_3, make_params

settings.register_profile("lqgball", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lqgball")


@pytest.fixture(scope="session")
def p83():
    return make_params(SQRT_8_3, "exact")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("LQGBALL_CACHE_DIR", str(tmp_path / "cache"))


# ---- acceptance reporting ----------------------------------------------------------
# Each acceptance test records one line; the lines are printed together at the
# end of the session so they appear in the plain ``pytest -v`` output.

_ACCEPTANCE: list[tuple[int, str]] = []


@pytest.fixture
def acceptance():
    def record(number: int, passed: bool, title: str, detail: str, seconds: float, *, stretch: bool = False):
        tag = "PASS" if passed else ("FAIL (non-blocking stretch)" if stretch else "FAIL")
        line = f"criterion {number:>2} {tag}: {title} -- {detail} [{seconds:.2f} s]"
        _ACCEPTANCE.append((number, line))
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE):
        terminalreporter.write_line(line)
