import numpy as np
import pytest

from hostsec.corpus import DomainRecord, PageCapture, PortProbe, TlsInfo, default_patch_table


@pytest.fixture(scope="session")
def patch_table():
    return default_patch_table()


def mkpage(url="http://site.test/", headers=(), body="", tls=None, status=200, chain=()):
    if tls is None:
        tls = url.startswith("https:")
    return PageCapture(url, tls, status, tuple(headers), body, tuple(chain))


def mkrecord(*pages, probes=(), banner=None, tls=None, domain="site.test", provider="P1"):
    return DomainRecord(domain, provider, tuple(pages) or (mkpage(),), tuple(probes), banner, tls)


def closed(port):
    return PortProbe(port, "closed")


def answered(port, headers=(), body="", chain=(), path=None):
    return PortProbe(port, "response", tuple(headers), body, tuple(chain), path)


def tls_info(*protocols, flags=()):
    return TlsInfo(bool(protocols), frozenset(protocols), frozenset(flags))


def ordinal_sample(rng, n, rho, thresholds_x, thresholds_y):
    """Discretized bivariate normal pair with correlation ``rho``."""
    z = rng.multivariate_normal([0.0, 0.0], [[1.0, rho], [rho, 1.0]], size=n)
    return (np.searchsorted(thresholds_x, z[:, 0]).astype(np.int32),
            np.searchsorted(thresholds_y, z[:, 1]).astype(np.int32))


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
