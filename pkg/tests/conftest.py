import pytest

from gpverify.mesh import build_grid


@pytest.fixture(scope="session")
def grid16():
    return build_grid(16, 32)


@pytest.fixture(scope="session")
def grid32():
    return build_grid(32, 64)


@pytest.fixture(scope="session")
def grid64():
    return build_grid(64, 128)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
