"""Collects the acceptance-criterion lines and prints them after the run."""

import time
from contextlib import contextmanager

import pytest

_LINES: dict[int, str] = {}


class _Criterion:
    def __init__(self, number: int, title: str):
        self.number, self.title = number, title
        self.detail = ""


@pytest.fixture
def criterion():
    @contextmanager
    def record(number: int, title: str):
        c = _Criterion(number, title)
        start = time.perf_counter()
        ok = False
        try:
            yield c
            ok = True
        finally:
            took = time.perf_counter() - start
            line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {c.detail} [{took:.2f} s]"
            _LINES[number] = line
            print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_LINES):
        terminalreporter.write_line(_LINES[n])
