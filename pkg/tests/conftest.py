import os

import pytest
from hypothesis import settings

# fixed examples by default; HYPOTHESIS_PROFILE=stress runs a wider random search
settings.register_profile("repro", derandomize=True, print_blob=True)
settings.register_profile("stress", max_examples=400, print_blob=True)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repro"))

_ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture
def record():
    """Store one pass/fail line for an acceptance criterion, then assert it."""

    def _record(number: int, title: str, passed: bool, detail: str) -> None:
        _ACCEPTANCE[number] = (title, passed, detail)
        print(f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} | {detail}")
        assert passed, detail

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        title, passed, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {n}. {title} | {detail}")
