import pytest
from hypothesis import HealthCheck, settings

from tumordelay.stationary import ModelParams, stationary_report

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def standard_params():
    return ModelParams(alpha=1.0, sigma_bar=1.0, sigma_tilde=0.5, mu=1.0)


@pytest.fixture(scope="session")
def standard_report(standard_params):
    return stationary_report(standard_params)


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def verdict(request):
    """Record and print one PASS/FAIL line; returns the flag so the test can assert it."""
    lines = request.config.stash[_ACCEPTANCE]

    def record(label: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
        print(line)
        lines.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
