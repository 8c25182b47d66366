def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for chk in sorted(RESULTS, key=lambda c: c.number):
            terminalreporter.write_line(chk.line())
