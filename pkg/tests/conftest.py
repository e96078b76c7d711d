import pytest

_VERDICTS: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one verdict line per acceptance criterion; the lines are printed after the run."""

    def record(number: int, ok: bool, detail: str) -> bool:
        _VERDICTS[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(_VERDICTS[number])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[n])
