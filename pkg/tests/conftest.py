import pytest

_acceptance_lines = []


@pytest.fixture
def criterion_report():
    """Record one pass/fail line per acceptance criterion.

    Lines are echoed in the terminal summary so they survive output
    capture; the assertion still fails the test on a red criterion.
    """
    def _record(num, desc, ok):
        line = f"[criterion {num:2d}] {'PASS' if ok else 'FAIL'} - {desc}"
        _acceptance_lines.append(line)
        assert ok, line
    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _acceptance_lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in sorted(_acceptance_lines):
            terminalreporter.write_line(line)
