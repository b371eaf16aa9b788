import time

import pytest

ACCEPTANCE_KEY = pytest.StashKey[dict]()


def _line(number, title, passed, detail):
    return f"criterion {number:>2} {'PASS' if passed else 'FAIL'}: {title} ({detail})"


@pytest.fixture
def criterion(request):
    """Run one acceptance check and record its outcome for the terminal summary.

    ``check`` returns (passed, detail); an exception counts as a failure.
    """
    store = request.config.stash.setdefault(ACCEPTANCE_KEY, {})

    def run(number: int, title: str, check, max_seconds: float | None = None):
        start = time.perf_counter()
        try:
            passed, detail = check()
        except Exception as exc:  # noqa: BLE001 - reported as a failed criterion
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        elapsed = time.perf_counter() - start
        if max_seconds is not None and elapsed > max_seconds:
            passed = False
            detail += f"; runtime {elapsed:.1f}s exceeds {max_seconds:g}s"
        else:
            detail += f"; {elapsed:.1f}s"
        store[number] = (title, passed, detail)
        print(_line(number, title, passed, detail))
        assert passed, _line(number, title, passed, detail)

    return run


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(ACCEPTANCE_KEY, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(store):
        terminalreporter.write_line(_line(number, *store[number]))
