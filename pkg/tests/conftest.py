import pytest

MASTER_SEED = 20260901

CRITERIA = {
    1: "oracle values from true-value",
    2: "consistency: bias and RMSE decay",
    3: "asymptotic normality: KS and scaled variance",
    4: "coverage: oracle and plug-in intervals",
    5: "exact small-sample identities",
    6: "property suite",
}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion this test belongs to")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        rep.user_properties.append(("criterion", mark.args[0]))


def pytest_terminal_summary(terminalreporter):
    status = {}
    for reports in terminalreporter.stats.values():
        for rep in reports:
            props = dict(getattr(rep, "user_properties", ()))
            if "criterion" not in props:
                continue
            k = props["criterion"]
            ok = rep.passed or (rep.when != "call" and not rep.failed)
            if rep.skipped:
                ok = False
            status[k] = status.get(k, True) and ok
    if not status:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        if k in status:
            verdict = "PASS" if status[k] else "FAIL"
        else:
            verdict = "NOT RUN"
        terminalreporter.write_line(f"criterion {k} [{verdict}] {CRITERIA[k]}")
