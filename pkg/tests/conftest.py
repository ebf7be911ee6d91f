import pytest

from wordqfa import verify


@pytest.fixture(scope="session")
def z_dfr():
    return verify.z_dfr()


@pytest.fixture(scope="session")
def f2_dfr():
    return verify.f2_dfr()


@pytest.fixture(scope="session")
def z_poly():
    return verify.z_poly()


@pytest.fixture(scope="session")
def zm_poly():
    return verify.zm_poly()


@pytest.fixture(scope="session")
def f2_exp():
    return verify.f2_exp()


@pytest.fixture(scope="session")
def shalen_machine():
    return verify.shalen_unbounded()


@pytest.fixture(scope="session")
def f2_oneway():
    return verify.f2_oneway()


ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    return request.config.stash.setdefault(ACCEPTANCE_LINES, [])


def pytest_terminal_summary(terminalreporter):
    lines = terminalreporter.config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
