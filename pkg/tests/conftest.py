"""Shared fixtures and the acceptance reporting hook.

Long simulation runs are session scoped so the expensive scenarios are
integrated once and shared across test modules.
"""

import pytest

from cbfseq.harness import bundled_scenario_path, load_scenario, run


def pytest_configure(config):
    config._criterion_lines = []


@pytest.fixture(scope="session")
def criterion(request):
    """Reporter for the acceptance checks.

    Prints one PASS/FAIL line per criterion, collects it for the terminal
    summary, then asserts so a failed criterion also fails the test.
    """

    lines = request.config._criterion_lines

    def report(name, ok, detail=""):
        status = "PASS" if ok else "FAIL"
        line = f"{status}  {name}" + (f"  [{detail}]" if detail else "")
        print(line)
        lines.append(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_criterion_lines", [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def motivating_scenario():
    return load_scenario(bundled_scenario_path("motivating_example"))


@pytest.fixture(scope="session")
def replication_scenario():
    return load_scenario(bundled_scenario_path("robotarium_replication"))


@pytest.fixture(scope="session")
def stress_scenario():
    return load_scenario(bundled_scenario_path("obstacle_stress"))


@pytest.fixture(scope="session")
def line_scenario():
    return load_scenario(bundled_scenario_path("fcbf_line"))


@pytest.fixture(scope="session")
def motivating_smooth(motivating_scenario):
    return run(motivating_scenario, mode="smooth")


@pytest.fixture(scope="session")
def motivating_discrete(motivating_scenario):
    return run(motivating_scenario, mode="discrete")


@pytest.fixture(scope="session")
def replication_smooth(replication_scenario):
    return run(replication_scenario, mode="smooth")


@pytest.fixture(scope="session")
def stress_discrete(stress_scenario):
    return run(stress_scenario, mode="discrete")
