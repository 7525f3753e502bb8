import pytest

from radreact.params import preset


@pytest.fixture
def electron():
    return preset("electron-cgs")


@pytest.fixture
def toy():
    """Electron constants with omega0 tau_e = 0.05, so transients die out in ~100 periods."""
    p = preset("electron-cgs")
    return p.replace(omega0=0.05 / p.tau_e)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    """Collects the one-line criterion verdicts for the end-of-run summary."""
    return request.config.stash.setdefault(_ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
