import os

import pytest

from heattube import kernels

ACCEPTANCE_LINES = []


def pytest_collection_modifyitems(config, items):
    if os.environ.get("HEATTUBE_EXTENDED") == "1":
        return
    skip = pytest.mark.skip(reason="extended run; set HEATTUBE_EXTENDED=1")
    for item in items:
        if "extended" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(params=["numpy", "numba"] if kernels.HAVE_NUMBA else ["numpy"])
def each_backend(request):
    prev = kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(prev)
