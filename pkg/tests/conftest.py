from __future__ import annotations

import numpy as np
import pytest

_CRITERIA = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_CRITERIA] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def record_criterion(request):
    """``record_criterion(k, passed, detail)`` for the acceptance summary."""
    table = request.config.stash[_CRITERIA]

    def record(k, passed, detail):
        table[k] = (bool(passed), detail)
        print(f"criterion {k}: {'PASS' if passed else 'FAIL'} - {detail}")

    return record


def pytest_terminal_summary(terminalreporter, config):
    table = config.stash[_CRITERIA]
    if not table:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(table):
        ok, detail = table[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'} - {detail}")
