import pytest


def pytest_configure(config):
    config._criterion_lines = []


@pytest.fixture
def criterion(request):
    """Record one verdict line per acceptance criterion for the terminal summary."""
    lines = request.config._criterion_lines

    def record(number, passed, detail):
        lines.append(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_criterion_lines", [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)


STANDARD_DOMAINS = ("half_line", "whole_line")
STANDARD_EPS = (0.0, 0.5)
STANDARD_K = (10.0, 1e2, 1e3, 1e4)


@pytest.fixture(scope="session")
def standard_suite():
    """Reports for the standard sweep: both domains, eps in {0, 0.5}, four k, h = 1/200.

    Returns {(domain, eps, k): DiagnosticsReport} plus the wall time under key "seconds".
    """
    import time

    from fastreact.diagnostics import limit_trajectory_for, measure
    from fastreact.problem import ProblemSpec
    from fastreact.system import solve_system

    out = {}
    start = time.perf_counter()
    for domain in STANDARD_DOMAINS:
        for eps in STANDARD_EPS:
            base = ProblemSpec(domain=domain, epsilon=eps)
            limit = limit_trajectory_for(base)
            for k in STANDARD_K:
                spec = base.with_(k=k)
                out[(domain, eps, k)] = measure(solve_system(spec), spec, limit)
    out["seconds"] = time.perf_counter() - start
    return out
