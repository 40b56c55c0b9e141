"""Shared test fixtures.

The acceptance suite records one verdict per numbered criterion through
the `criterion` fixture; after the run a summary section prints one
pass/fail line for each, with the measured numbers, whether or not the
corresponding test passed.
"""

import pytest

_VERDICTS = {}


@pytest.fixture
def criterion():
    """Record a one-line verdict for an acceptance criterion, then assert."""

    def _check(num: int, label: str, ok: bool, detail: str):
        _VERDICTS[num] = (bool(ok), label, detail)
        assert ok, f"criterion {num} ({label}): {detail}"

    return _check


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_VERDICTS):
        ok, label, detail = _VERDICTS[num]
        word = "PASS" if ok else "FAIL"
        terminalreporter.write_line(
            f"criterion {num:2d} [{word}] {label}: {detail}")
