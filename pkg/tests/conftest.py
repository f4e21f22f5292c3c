"""Collects one verdict line per acceptance criterion and prints them at the end."""

VERDICTS: dict = {}


def record(number: int, passed: bool, detail: str) -> None:
    """Store the verdict for a criterion (a later call for the same number must agree)."""
    prev = VERDICTS.get(number)
    if prev is not None:
        passed = passed and prev[0]
        detail = f"{prev[1]}; {detail}"
    VERDICTS[number] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(VERDICTS):
        passed, detail = VERDICTS[number]
        terminalreporter.write_line(
            f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
