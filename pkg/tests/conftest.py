import time

import pytest

# criterion number -> list of (title, passed, detail), one per test case
CRITERIA = {}


class Criterion:
    def __init__(self, number, title, limit_s):
        self.number, self.title, self.limit_s = number, title, limit_s
        self.details = []
        self.start = time.perf_counter()

    def note(self, text):
        self.details.append(text)


@pytest.fixture
def criterion(request):
    """Times a criterion body and records one summary line for it."""
    holder = {}

    def make(number, title, limit_s):
        holder["c"] = Criterion(number, title, limit_s)
        return holder["c"]

    yield make
    c = holder.get("c")
    if c is None:
        return
    elapsed = time.perf_counter() - c.start
    rep = getattr(request.node, "rep_call", None)
    passed = rep is not None and rep.passed and elapsed < c.limit_s
    detail = "; ".join(c.details + [f"{elapsed:.2f}s (limit {c.limit_s:g}s)"])
    CRITERIA.setdefault(c.number, []).append((c.title, passed, detail))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        cases = CRITERIA[n]
        passed = all(p for _, p, _ in cases)
        detail = " || ".join(d for _, _, d in cases)
        terminalreporter.write_line(f"criterion {n} {'PASS' if passed else 'FAIL'}: {cases[0][0]} | {detail}")
