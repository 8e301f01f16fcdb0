import time

import pytest

from singular_spade.optics import GaussianPsf

_LINES = pytest.StashKey[list]()


@pytest.fixture
def psf():
    return GaussianPsf(1.0)


class CriterionReport:
    """Collects the individual checks of one acceptance criterion."""

    def __init__(self, number, title, budget_s):
        self.number = number
        self.title = title
        self.budget_s = budget_s
        self.checks = []
        self.start = time.perf_counter()
        self.done = False

    def check(self, ok, detail):
        self.checks.append((bool(ok), detail))

    @property
    def passed(self):
        return bool(self.checks) and all(ok for ok, _ in self.checks)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        shown = [d if ok else f"FAILED {d}" for ok, d in self.checks]
        return f"criterion {self.number:2d} {status}: {self.title} [{'; '.join(shown)}]"

    def finish(self):
        elapsed = time.perf_counter() - self.start
        self.check(elapsed < self.budget_s, f"{elapsed:.1f}s of {self.budget_s:g}s budget")
        self.done = True
        return self.line()


@pytest.fixture
def criterion(request):
    reports = []

    def make(number, title, budget_s):
        report = CriterionReport(number, title, budget_s)
        reports.append(report)
        return report

    yield make
    lines = request.config.stash.setdefault(_LINES, [])
    for report in reports:
        if not report.done:
            report.check(False, "raised before completing")
            report.done = True
        lines.append((report.number, report.line()))
        print(report.line())


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
