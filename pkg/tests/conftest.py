"""Shared fixtures and the acceptance-criteria summary."""

from __future__ import annotations

from collections import defaultdict

import numpy as np
import pytest

from lamfam.numerics import SeededRng

_OUTCOMES: dict[int, list[tuple[str, str]]] = defaultdict(list)

TITLES = {
    1: "closed-form divergence vs quadrature (20 cases, 1e-6, < 10 s)",
    2: "Fenchel-Young identity at escort moments (100 cases, 1e-8)",
    3: "chart round trips (100 draws, 1e-10 relative)",
    4: "escort law moments vs 1e6-sample Monte Carlo (5 SE)",
    5: "prox error product formula (1e3 steps, 1e-12)",
    6: "moment-matched q minimizes RD on a 5x5 grid (margin 1e-6)",
    7: "desk-scale table reproduction (10 x 200, < 5 min)",
    8: "online MLE fixed point and likelihood bound",
    9: "relaxed EM on the four-component mixture",
    10: "gradients vs central finite differences (1e-5 relative)",
    11: "fig1 curves normalize (1e-6) and Gaussian curve is exact (1e-8)",
}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _OUTCOMES[crit].append((report.nodeid.split("::")[-1], report.outcome))


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            item.user_properties.append(("criterion", int(m.args[0])))


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(TITLES):
        results = _OUTCOMES.get(n)
        if not results:
            tr.write_line(f"criterion {n:2d}: NOT RUN  {TITLES[n]}")
            continue
        failed = [name for name, outcome in results if outcome != "passed"]
        status = "FAIL" if failed else "PASS"
        extra = f"  [failed: {', '.join(failed)}]" if failed else ""
        tr.write_line(f"criterion {n:2d}: {status}  {TITLES[n]}{extra}")


@pytest.fixture
def rng():
    return SeededRng(1234).generator()


@pytest.fixture
def random_spd(rng):
    def make(d, kappa=10.0):
        from lamfam.numerics import spd_with_condition

        return spd_with_condition(d, kappa, rng)

    return make


def assert_close(a, b, rtol=0.0, atol=0.0):
    np.testing.assert_allclose(a, b, rtol=rtol, atol=atol)
