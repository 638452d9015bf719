from collections import defaultdict

CRITERIA = {
    1: "sequence orthogonality (Gram identity, s=1..3)",
    2: "exact label balance",
    3: "projection law on balanced fields",
    4: "Bell correlations on a 16x16 grid",
    5: "CHSH value and product bound",
    6: "GHZ correlations and marginals (n=3,4, s=2)",
    7: "n-party scaling (n=3..8, s=3)",
    8: "mode state fidelity and cross terms",
    9: "entanglement entropy",
    10: "deterministic gen output",
}

_outcomes = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number): acceptance criterion this test checks")


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("criterion")
        if marker:
            item.user_properties.append(("criterion", marker.args[0]))


def pytest_runtest_logreport(report):
    number = dict(report.user_properties).get("criterion")
    if number is None:
        return
    if report.when == "call" or report.failed:
        _outcomes[number].append((report.nodeid.split("::")[-1], report.passed))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_outcomes):
        results = _outcomes[number]
        failed = [name for name, ok in results if not ok]
        status = "FAIL" if failed else "PASS"
        line = f"AC{number:<2} {status}  {CRITERIA.get(number, '')} ({len(results) - len(failed)}/{len(results)} checks)"
        if failed:
            line += "  failing: " + ", ".join(failed)
        tr.write_line(line)
