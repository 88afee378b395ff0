import os

import pytest
from hypothesis import HealthCheck, settings

from pcap.graph import build_domain, generate

settings.register_profile("pcap", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "pcap"))

# filled by tests/test_acceptance.py, printed once at the end of the session
ACCEPTANCE = {}


def path_domain(n):
    """path(n) with its interior {1..n-1}: the domain of the closed forms."""
    g = generate("path", n)
    return build_domain(g, [str(i) for i in range(1, n)])


@pytest.fixture
def path4():
    return path_domain(4)


@pytest.fixture
def k2():
    g = generate("complete", 2)
    return build_domain(g, g.vertices)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
