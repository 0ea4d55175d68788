"""Shared pytest hooks: acceptance criteria print one summary line each."""

ACCEPTANCE_RESULTS = {}


def record_acceptance(number, status, detail=""):
    ACCEPTANCE_RESULTS[number] = (status, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        status, detail = ACCEPTANCE_RESULTS[number]
        line = f"[ACCEPTANCE {number:>2}] {status}"
        if detail:
            line += f" - {detail}"
        terminalreporter.write_line(line)
